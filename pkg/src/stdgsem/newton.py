"""Newton's method, linear solves, sparsity patterns and unknown permutations."""

from __future__ import annotations

import io
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NewtonConvergenceError, SingularSystemError

log = logging.getLogger(__name__)

DENSE_LIMIT = 600


@dataclass(frozen=True)
class Gmres:
    restart: int = 50
    tol: float = 1e-12
    max_it: int = 1000


@dataclass(frozen=True)
class NewtonConfig:
    """Full-step Newton settings.

    ``linear`` is ``"auto"`` (dense LU below 600 unknowns, sparse LU above),
    ``"dense_lu"``, ``"sparse_lu"`` or a :class:`Gmres` instance.

    ``step_tol`` accepts an iterate whose Newton update is at rounding level,
    ``||du||_inf <= step_tol (1 + ||u||_inf)``, when the residual cannot reach
    the requested tolerance in floating point. Set it to 0 to disable.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_iter: int = 50
    linear: object = "auto"
    step_tol: float = 1e-14

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("Newton tolerances must be positive")
        if self.step_tol < 0:
            raise ValueError("step_tol must be >= 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class NewtonResult:
    u: np.ndarray
    iterations: int
    final_residual: float
    history: list = field(default_factory=list)
    stagnated: bool = False


def _inf(v) -> float:
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def _condest(A) -> float | None:
    try:
        if sp.issparse(A):
            if A.shape[0] > DENSE_LIMIT:
                return None
            A = A.toarray()
        return float(np.linalg.cond(A, 1))
    except np.linalg.LinAlgError:
        return float("inf")


def linear_solve(A, b, method="auto") -> np.ndarray:
    """Solve ``A x = b``.

    Direct solves are checked afterwards: ``||A x - b||_inf <= 1e-10 (1 + ||b||_inf)``
    scaled by ``||A||_inf`` so that badly scaled but well-posed systems pass.

    Raises
    ------
    SingularSystemError
        On factorization failure or an unacceptable residual.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"matrix shape {A.shape} does not match rhs length {n}")
    if method == "auto":
        method = "dense_lu" if n < DENSE_LIMIT else "sparse_lu"
    if isinstance(method, Gmres):
        Aop = sp.csr_matrix(A) if not sp.issparse(A) else A
        x, info = spla.gmres(Aop, b, rtol=method.tol, atol=0.0, restart=method.restart,
                             maxiter=method.max_it)
        if info != 0:
            raise SingularSystemError(f"GMRES did not converge (info={info})")
        return x
    try:
        if method == "dense_lu":
            Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
            with np.errstate(all="raise"), warnings.catch_warnings():
                # exactly zero pivot: scipy only warns, we want an error
                warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(Ad, check_finite=True)
            x = scipy.linalg.lu_solve((lu, piv), b)
        elif method == "sparse_lu":
            As = sp.csc_matrix(A)
            x = spla.splu(As).solve(b)
        else:
            raise ValueError(f"unknown linear solver {method!r}")
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
        raise SingularSystemError(f"linear solve failed: {exc}", _condest(A)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("linear solve produced non-finite values", _condest(A))
    res = _inf(A @ x - b)
    scale = 1.0 + _inf(b)
    normA = float(abs(A).sum(axis=1).max()) if sp.issparse(A) else float(np.abs(A).sum(axis=1).max())
    if res > 1e-10 * scale * max(1.0, normA * _inf(x) / scale):
        raise SingularSystemError(
            f"linear solve residual {res:.3e} exceeds tolerance", _condest(A)
        )
    return x


def newton_solve(residual, jacobian, u0, cfg: NewtonConfig | None = None, context=None) -> NewtonResult:
    """Full-step Newton with the Jacobian refreshed every iteration.

    Stops once ``||G(u)||_inf <= abs_tol`` or ``<= rel_tol * ||G(u0)||_inf``,
    or when the update has shrunk to rounding level (``stagnated=True``):
    either once with the residual within ``1e3`` of the target, or on two
    consecutive iterations.

    Raises
    ------
    NewtonConvergenceError
        After ``max_iter`` iterations without meeting either tolerance.
    """
    cfg = cfg or NewtonConfig()
    u = np.array(u0, dtype=float, copy=True)
    r = np.asarray(residual(u), dtype=float)
    r0 = _inf(r)
    history = [r0]
    target = max(cfg.abs_tol, cfg.rel_tol * r0)
    if r0 <= target:
        return NewtonResult(u=u, iterations=0, final_residual=r0, history=history)
    prev_tiny = False
    for it in range(1, cfg.max_iter + 1):
        J = jacobian(u)
        du = linear_solve(J, -r, cfg.linear)
        u = u + du
        r = np.asarray(residual(u), dtype=float)
        rn = _inf(r)
        history.append(rn)
        log.debug("newton it=%d residual=%.3e", it, rn)
        if rn <= target:
            return NewtonResult(u=u, iterations=it, final_residual=rn, history=history)
        # rounding-level update: near the target, or twice in a row (a fixed
        # point whose residual floor is inflated by scaling, e.g. (dt A)^{-1})
        tiny = it > 1 and _inf(du) <= cfg.step_tol * (1.0 + _inf(u))
        if tiny and (rn <= 1e3 * target or prev_tiny):
            return NewtonResult(u=u, iterations=it, final_residual=rn, history=history, stagnated=True)
        prev_tiny = tiny
        if not np.isfinite(rn):
            break
    raise NewtonConvergenceError(
        f"Newton did not converge in {cfg.max_iter} iterations "
        f"(residual {history[-1]:.3e}, target {target:.3e})"
        + (f" [{context}]" if context else ""),
        iterate=u,
        history=history,
        context=context,
    )


# -- sparsity ---------------------------------------------------------------------


@dataclass(frozen=True)
class SparsityPattern:
    rows: int
    cols: int
    entries: tuple  # sorted (row, col) pairs

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def as_set(self) -> frozenset:
        return frozenset(self.entries)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=bool)
        if self.entries:
            r, c = zip(*self.entries)
            out[list(r), list(c)] = True
        return out

    def to_pbm(self) -> bytes:
        """Plain (P1) portable bitmap, 1 = nonzero."""
        dense = self.to_dense()
        lines = ["P1", f"{self.cols} {self.rows}"]
        lines += [" ".join("1" if v else "0" for v in row) for row in dense]
        return ("\n".join(lines) + "\n").encode("ascii")

    def to_csv(self) -> bytes:
        buf = io.StringIO()
        buf.write("row,col\n")
        for r, c in self.entries:
            buf.write(f"{r},{c}\n")
        return buf.getvalue().encode("ascii")


def sparsity_of(A, tol: float = 1e-14, relative: bool = True) -> SparsityPattern:
    """Entries with ``|A_ij| > tol`` (times ``max|A|`` when ``relative``)."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    A = sp.coo_matrix(A)
    A.sum_duplicates()
    vals = np.abs(A.data)
    thresh = tol * (vals.max() if (relative and vals.size) else 1.0)
    keep = vals > thresh
    entries = sorted(zip(A.row[keep].tolist(), A.col[keep].tolist()))
    return SparsityPattern(rows=A.shape[0], cols=A.shape[1], entries=tuple(entries))


# -- orderings ----------------------------------------------------------------------


def _dune_square_order(nx: int, nt: int) -> list[tuple[int, int]]:
    """Node order of a 2D tensor Lagrange element built by subentity recursion.

    Vertices (x fastest), then edge interiors (x=0, x=1, t=0, t=1, each
    along its edge), then the cell interior (x fastest).
    """
    X, T = nx - 1, nt - 1
    order = [(0, 0), (X, 0), (0, T), (X, T)]
    order += [(0, j) for j in range(1, T)]
    order += [(X, j) for j in range(1, T)]
    order += [(i, 0) for i in range(1, X)]
    order += [(i, T) for i in range(1, X)]
    order += [(i, j) for j in range(1, T) for i in range(1, X)]
    return order


def time_lex_permutation(n_tau: int, n_xi: int, target_order: str = "time_major") -> np.ndarray:
    """Permutation from stage-major unknowns to ``target_order``.

    Stage-major index ``s * n_xi + i`` holds spatial node i at temporal node s.
    The result ``perm`` satisfies ``x_target = x_stage_major[perm]``, so a
    matrix is reordered with ``A[perm][:, perm]``.

    ``time_major`` groups all temporal nodes of one spatial node together.
    ``dune_like`` orders a single 1D-space x time element by subentity
    recursion (vertices, edges, interior), time being the second coordinate.
    """
    if n_tau < 1 or n_xi < 1:
        raise ValueError("sizes must be >= 1")
    if target_order == "time_major":
        return np.array([s * n_xi + i for i in range(n_xi) for s in range(n_tau)], dtype=np.int64)
    if target_order == "dune_like":
        if n_tau == 1 or n_xi == 1:
            n = max(n_tau, n_xi)
            line = [0, n - 1] + list(range(1, n - 1)) if n > 1 else [0]
            return np.array(line, dtype=np.int64)
        return np.array([s * n_xi + i for i, s in _dune_square_order(n_xi, n_tau)], dtype=np.int64)
    raise ValueError(f"unknown target ordering {target_order!r}")


def permute(A, perm) -> sp.csr_matrix:
    A = sp.csr_matrix(A)
    return A[perm][:, perm]


def inverse_permutation(perm) -> np.ndarray:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return inv
