"""Space-time DG-SEM, marched one temporal element at a time.

On each time element the unknowns ``U = (U^1, ..., U^n)`` (stage-major) solve

    (B (x) I) U* - (D^T M (x) I) U = dt/2 (M (x) I) F(U),

with the upwind temporal flux ``U* = (u_n, 0, ..., 0, U^n)``. The element-final
value ``U^n`` starts the next element.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import AdmissibilityError
from .newton import DENSE_LIMIT, NewtonConfig, newton_solve
from .spatial import SemiDiscreteSystem
from .time_operators import SbpOperators


@dataclass(eq=False)
class TimeElementSystem:
    system: SemiDiscreteSystem
    ops: SbpOperators
    t_n: float
    dt: float
    u_n: np.ndarray

    def __post_init__(self):
        self.u_n = np.asarray(self.u_n, dtype=float)
        if self.u_n.shape != (self.system.dof,):
            raise ValueError(f"u_n has shape {self.u_n.shape}, expected ({self.system.dof},)")

    @property
    def size(self) -> int:
        return self.ops.n * self.system.dof

    @property
    def times(self) -> np.ndarray:
        return self.t_n + 0.5 * self.dt * (1.0 + self.ops.nodes)

    def blocks(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        if U.size != self.size:
            raise ValueError(f"expected {self.size} space-time unknowns, got {U.size}")
        return U.reshape(self.ops.n, self.system.dof)


def _element_rhs(sys: TimeElementSystem, blocks) -> np.ndarray:
    out = np.empty_like(blocks)
    for j, tj in enumerate(sys.times):
        try:
            out[j] = sys.system.rhs(tj, blocks[j])
        except AdmissibilityError as exc:
            raise AdmissibilityError(f"temporal node {j}: {exc}", state=exc.state, where=(j, exc.where)) from exc
    return out


def st_residual(sys: TimeElementSystem, U) -> np.ndarray:
    """``(B (x) I) U* - (D^T M (x) I) U - dt/2 (M (x) I) F(U)``."""
    ops = sys.ops
    Ub = sys.blocks(U)
    w = ops.weights
    R = -(ops.D.T * w[None, :]) @ Ub  # D^T M U
    R[0] -= sys.u_n
    R[-1] += Ub[-1]
    R -= 0.5 * sys.dt * w[:, None] * _element_rhs(sys, Ub)
    return R.reshape(-1)


def st_jacobian(sys: TimeElementSystem, U):
    """Exact derivative of :func:`st_residual`: ``(e_n e_n^T - D^T M) (x) I - dt/2 (M (x) I) diag(J_j)``.

    Dense below the dense-solver size threshold, sparse CSR otherwise.
    """
    ops = sys.ops
    n, dof = ops.n, sys.system.dof
    Ub = sys.blocks(U)
    T = -ops.D.T @ ops.M
    T[-1, -1] += 1.0
    w = ops.weights
    Js = [sys.system.jacobian(tj, Ub[j]) for j, tj in enumerate(sys.times)]
    if n * dof < DENSE_LIMIT:
        out = np.kron(T, np.eye(dof))
        for j, J in enumerate(Js):
            J = J.toarray() if sp.issparse(J) else np.asarray(J, dtype=float)
            out[j * dof:(j + 1) * dof, j * dof:(j + 1) * dof] -= 0.5 * sys.dt * w[j] * J
        return out
    eye = sp.identity(dof, format="csr")
    Js = [(-0.5 * sys.dt * w[j]) * sp.csr_matrix(J) for j, J in enumerate(Js)]
    return (sp.kron(sp.csr_matrix(T), eye, format="csr") + sp.block_diag(Js, format="csr")).tocsr()


@dataclass
class StdgStepResult:
    U: np.ndarray  # shape (n_tau, dof)
    u_next: np.ndarray
    newton_iterations: int


@dataclass
class StdgTrajectory:
    times: np.ndarray
    states: list
    element_solutions: list = field(default_factory=list)
    newton_iterations: list = field(default_factory=list)

    @property
    def stages(self) -> list:
        return self.element_solutions

    @property
    def total_newton_iterations(self) -> int:
        return int(sum(self.newton_iterations))


def stdg_step(system: SemiDiscreteSystem, ops: SbpOperators, t_n: float, u_n, dt: float,
              cfg: NewtonConfig | None = None) -> StdgStepResult:
    """Solve one time element from ``U = 1 (x) u_n``; ``u_next`` is the last block."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    sys = TimeElementSystem(system, ops, t_n, dt, u_n)
    res = newton_solve(
        lambda U: st_residual(sys, U),
        lambda U: st_jacobian(sys, U),
        np.tile(sys.u_n, ops.n),
        cfg,
        context=f"time element t={t_n:.6g} dt={dt:.6g}",
    )
    U = res.u.reshape(ops.n, system.dof)
    return StdgStepResult(U=U, u_next=U[-1].copy(), newton_iterations=res.iterations)


def stdg_integrate(system: SemiDiscreteSystem, ops: SbpOperators, t0: float, u0, t_end: float,
                   n_steps: int, cfg: NewtonConfig | None = None,
                   keep_elements: bool = True) -> StdgTrajectory:
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    times = np.linspace(t0, t_end, n_steps + 1)
    u = np.asarray(u0, dtype=float).copy()
    traj = StdgTrajectory(times=times, states=[u.copy()])
    for k in range(n_steps):
        step = stdg_step(system, ops, times[k], u, times[k + 1] - times[k], cfg)
        u = step.u_next
        traj.states.append(u.copy())
        traj.newton_iterations.append(step.newton_iterations)
        if keep_elements:
            traj.element_solutions.append(step.U.copy())
    return traj


def element_csv(traj: StdgTrajectory, ops: SbpOperators, space=None) -> str:
    """Element solutions as CSV ``element,stage,tau,t,x[,y],component,value``.

    Without a DG ``space`` the coordinate columns are replaced by a single
    ``index`` column holding the unknown number.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if space is not None:
        coords = [x.reshape(-1) for x in space.coordinates]
        r = space.r
        w.writerow(["element", "stage", "tau", "t"] + ["x", "y"][: space.d] + ["component", "value"])
    else:
        coords, r = None, 1
        w.writerow(["element", "stage", "tau", "t", "index", "component", "value"])
    for e, U in enumerate(traj.element_solutions):
        t0, t1 = traj.times[e], traj.times[e + 1]
        for j, tau in enumerate(ops.nodes):
            tj = t0 + 0.5 * (t1 - t0) * (1.0 + tau)
            vals = U[j].reshape(-1, r)
            for i in range(vals.shape[0]):
                pos = [repr(float(c[i])) for c in coords] if coords is not None else [i]
                for comp in range(r):
                    w.writerow([e, j, repr(float(tau)), repr(float(tj))] + pos + [comp, repr(float(vals[i, comp]))])
    return buf.getvalue()
