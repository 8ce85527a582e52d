"""Temporal SBP operators and their Runge-Kutta (Butcher) encoding.

DG-SEM in time with an upwind flux on ``n`` LGL nodes is the ``n``-stage
Lobatto IIIC method. :func:`to_butcher` performs that conversion from the
SBP matrices; :func:`lobatto_tableau` stores the closed forms independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .quadrature import diff_matrix, lagrange_basis, lgl_rule


@dataclass(frozen=True, eq=False)
class SbpOperators:
    """Boundary, mass and differentiation matrices on one time element."""

    n: int
    B: np.ndarray
    M: np.ndarray
    D: np.ndarray

    @property
    def nodes(self) -> np.ndarray:
        return lgl_rule(self.n).nodes

    @property
    def weights(self) -> np.ndarray:
        return np.diag(self.M).copy()


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    s: int
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.allclose(self.A[-1], self.b, rtol=0, atol=1e-14))


@dataclass(frozen=True)
class OrderDefects:
    """Defects of the simplified order conditions B(j), C(j), D(j), j = 1..j_max."""

    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @staticmethod
    def satisfied(defects, tol: float) -> int:
        """Largest j such that defects[:j] are all <= tol."""
        k = 0
        for d in defects:
            if d > tol:
                break
            k += 1
        return k


def sbp_operators(n: int) -> SbpOperators:
    if n < 2:
        raise ValueError(f"SBP operators need n >= 2 nodes, got n={n}")
    basis = lagrange_basis(n)
    B = np.zeros((n, n))
    B[0, 0], B[-1, -1] = -1.0, 1.0
    M = np.diag(basis.rule.weights)
    D = diff_matrix(basis)
    return SbpOperators(n=n, B=B, M=M, D=D)


def sbp_defect(ops: SbpOperators) -> float:
    """Max-norm of ``M D + (M D)^T - B``."""
    MD = ops.M @ ops.D
    return float(np.max(np.abs(MD + MD.T - ops.B)))


def upwind_matrix(ops: SbpOperators) -> np.ndarray:
    """``D + M^{-1} e_1 e_1^T``: the strong-form operator with the upwind flux folded in."""
    Dt = ops.D.copy()
    Dt[0, 0] += 1.0 / ops.M[0, 0]
    return Dt


def to_butcher(ops: SbpOperators) -> ButcherTableau:
    """Butcher tableau equivalent to DG-SEM in time with upwind flux.

    ``A = (D + M^{-1} e_1 e_1^T)^{-1} / 2``, ``b = M 1 / 2``, ``c = (1 + tau) / 2``.
    """
    Dt = upwind_matrix(ops)
    n = ops.n
    lu, piv = scipy.linalg.lu_factor(Dt)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= 1e-14 * pivots.max():
        raise np.linalg.LinAlgError(
            f"D + M^-1 e1 e1^T is singular (pivot ratio {pivots.min() / pivots.max():.3e}); "
            "D is not null-space consistent"
        )
    A = 0.5 * scipy.linalg.lu_solve((lu, piv), np.eye(n))
    b = 0.5 * np.diag(ops.M).copy()
    c = 0.5 * (1.0 + ops.nodes)
    return ButcherTableau(s=n, A=A, b=b, c=c)


def lobatto_tableau(s: int) -> ButcherTableau:
    """Closed-form Lobatto IIIC tableaus for 2, 3 and 4 stages."""
    r5 = np.sqrt(5.0)
    if s == 2:
        A = [[1 / 2, -1 / 2], [1 / 2, 1 / 2]]
        b = [1 / 2, 1 / 2]
        c = [0.0, 1.0]
    elif s == 3:
        A = [[1 / 6, -1 / 3, 1 / 6], [1 / 6, 5 / 12, -1 / 12], [1 / 6, 2 / 3, 1 / 6]]
        b = [1 / 6, 2 / 3, 1 / 6]
        c = [0.0, 1 / 2, 1.0]
    elif s == 4:
        A = [
            [1 / 12, -r5 / 12, r5 / 12, -1 / 12],
            [1 / 12, 1 / 4, (10 - 7 * r5) / 60, r5 / 60],
            [1 / 12, (10 + 7 * r5) / 60, 1 / 4, -r5 / 60],
            [1 / 12, 5 / 12, 5 / 12, 1 / 12],
        ]
        b = [1 / 12, 5 / 12, 5 / 12, 1 / 12]
        c = [0.0, 1 / 2 - r5 / 10, 1 / 2 + r5 / 10, 1.0]
    else:
        raise ValueError(
            f"no closed-form Lobatto IIIC tableau for s={s}; "
            "use to_butcher(sbp_operators(s)) instead"
        )
    return ButcherTableau(s=s, A=np.array(A), b=np.array(b), c=np.array(c))


def order_condition_defects(tab: ButcherTableau, j_max: int) -> OrderDefects:
    """Defects of B(j), C(j) and D(j) for j = 1..j_max.

    B: ``|b^T c^{j-1} - 1/j|``;
    C: ``||A c^{j-1} - c^j / j||_max``;
    D: ``||A^T diag(b) c^{j-1} - diag(b)(1 - c^j) / j||_max``.
    """
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    A, b, c = tab.A, tab.b, tab.c
    Bd, Cd, Dd = [], [], []
    for j in range(1, j_max + 1):
        cj1 = c ** (j - 1)
        cj = c**j
        Bd.append(abs(b @ cj1 - 1.0 / j))
        Cd.append(np.max(np.abs(A @ cj1 - cj / j)))
        Dd.append(np.max(np.abs(A.T @ (b * cj1) - b * (1.0 - cj) / j)))
    return OrderDefects(B=np.array(Bd), C=np.array(Cd), D=np.array(Dd))


def null_space_consistent(D) -> bool:
    """True iff ``ker(D) = span(1)``.

    Exactly one singular value may fall below ``1e-12 * sigma_max`` and the
    constant vector must be annihilated.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    sigma = np.linalg.svd(D, compute_uv=False)
    if sigma[0] == 0.0:
        return False
    small = int(np.sum(sigma < 1e-12 * sigma[0]))
    if small != 1:
        return False
    return bool(np.max(np.abs(D @ np.ones(n))) <= 1e-12 * sigma[0])
