"""Method-of-lines stepping with fully implicit Lobatto IIIC Runge-Kutta methods.

Stage unknowns are stored stage-major: ``U = (u^1, ..., u^s)`` with each block
of length ``dof``. Two Jacobian formulations of the same stage system are
available:

``a_form``
    ``G(U) = U - 1 (x) u - dt (A (x) I) F(U)``, Jacobian ``I - dt (A (x) I) J``.
``a_inv_form``
    ``G(U) = ((dt A)^{-1} (x) I)(U - 1 (x) u) - F(U)``, Jacobian
    ``(dt A)^{-1} (x) I - J``, which has the sparsity of the space-time system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .newton import DENSE_LIMIT, NewtonConfig, newton_solve
from .spatial import SemiDiscreteSystem
from .time_operators import ButcherTableau

JAC_FORMS = ("a_form", "a_inv_form")


@dataclass
class RkStepResult:
    u_next: np.ndarray
    stages: np.ndarray  # shape (s, dof)
    newton_iterations: int
    t_next: float


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    stages: list = field(default_factory=list)  # per step, (s, dof) arrays
    newton_iterations: list = field(default_factory=list)

    @property
    def total_newton_iterations(self) -> int:
        return int(sum(self.newton_iterations))


def _check_form(jac_form: str) -> str:
    aliases = {"a": "a_form", "ainv": "a_inv_form"}
    jac_form = aliases.get(jac_form, jac_form)
    if jac_form not in JAC_FORMS:
        raise ValueError(f"unknown Jacobian form {jac_form!r}; expected one of {JAC_FORMS}")
    return jac_form


def _stage_rhs(system, tab, t, stages, dt):
    return np.stack([system.rhs(t + tab.c[j] * dt, stages[j]) for j in range(tab.s)])


def _inv_dtA(tab: ButcherTableau, dt: float) -> np.ndarray:
    cond = np.linalg.cond(tab.A)
    if not np.isfinite(cond) or cond > 1e12:
        raise np.linalg.LinAlgError(f"tableau matrix A is singular (cond {cond:.3e})")
    return np.linalg.inv(dt * tab.A)


def stage_jacobian(system: SemiDiscreteSystem, tab: ButcherTableau, t: float, stages, dt: float,
                   jac_form: str = "a_inv_form"):
    """Jacobian of the stage residual at ``stages`` (shape ``(s, dof)``).

    Returned dense below the dense-solver size threshold, sparse CSR otherwise.
    """
    jac_form = _check_form(jac_form)
    stages = np.asarray(stages, dtype=float).reshape(tab.s, system.dof)
    s, n = tab.s, system.dof
    Js = [system.jacobian(t + tab.c[j] * dt, stages[j]) for j in range(s)]
    if s * n < DENSE_LIMIT:
        Jd = [J.toarray() if sp.issparse(J) else np.asarray(J, dtype=float) for J in Js]
        if jac_form == "a_form":
            out = np.eye(s * n)
            for i in range(s):
                for j in range(s):
                    out[i * n:(i + 1) * n, j * n:(j + 1) * n] -= dt * tab.A[i, j] * Jd[j]
            return out
        out = np.kron(_inv_dtA(tab, dt), np.eye(n))
        for j in range(s):
            out[j * n:(j + 1) * n, j * n:(j + 1) * n] -= Jd[j]
        return out
    Js = [sp.csr_matrix(J) for J in Js]
    eye = sp.identity(n, format="csr")
    if jac_form == "a_form":
        blocks = [[(eye if i == j else None) for j in range(s)] for i in range(s)]
        for i in range(s):
            for j in range(s):
                a = tab.A[i, j]
                if a != 0.0:
                    term = -dt * a * Js[j]
                    blocks[i][j] = term if blocks[i][j] is None else blocks[i][j] + term
        return sp.bmat(blocks, format="csr")
    Ainv = _inv_dtA(tab, dt)
    return (sp.kron(sp.csr_matrix(Ainv), eye, format="csr") - sp.block_diag(Js, format="csr")).tocsr()


def stage_residual(system, tab, t, u, stages, dt, jac_form="a_inv_form") -> np.ndarray:
    jac_form = _check_form(jac_form)
    stages = np.asarray(stages, dtype=float).reshape(tab.s, system.dof)
    F = _stage_rhs(system, tab, t, stages, dt)
    W = stages - np.asarray(u, dtype=float)[None, :]
    if jac_form == "a_form":
        return (W - dt * (tab.A @ F)).reshape(-1)
    return (_inv_dtA(tab, dt) @ W - F).reshape(-1)


def rk_update(system, tab, t, u, stages, dt) -> np.ndarray:
    """``u + dt sum_j b_j F(t + c_j dt, U_j)``; equals the last stage for stiffly accurate tableaus."""
    F = _stage_rhs(system, tab, t, np.asarray(stages).reshape(tab.s, system.dof), dt)
    return np.asarray(u, dtype=float) + dt * (tab.b @ F)


def rk_step(system: SemiDiscreteSystem, tab: ButcherTableau, t: float, u, dt: float,
            cfg: NewtonConfig | None = None, jac_form: str = "a_inv_form") -> RkStepResult:
    """One implicit RK step; stages start from ``u`` and are solved with Newton."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    jac_form = _check_form(jac_form)
    u = np.asarray(u, dtype=float)
    s, n = tab.s, system.dof
    U0 = np.tile(u, s)
    res = newton_solve(
        lambda U: stage_residual(system, tab, t, u, U, dt, jac_form),
        lambda U: stage_jacobian(system, tab, t, U, dt, jac_form),
        U0,
        cfg,
        context=f"RK step t={t:.6g} dt={dt:.6g}",
    )
    stages = res.u.reshape(s, n)
    u_next = stages[-1].copy() if tab.stiffly_accurate else rk_update(system, tab, t, u, stages, dt)
    return RkStepResult(u_next=u_next, stages=stages, newton_iterations=res.iterations, t_next=t + dt)


def integrate(system: SemiDiscreteSystem, tab: ButcherTableau, t0: float, u0, t_end: float,
              n_steps: int, cfg: NewtonConfig | None = None, jac_form: str = "a_inv_form",
              keep_stages: bool = True) -> Trajectory:
    """Fixed-step driver; ``times`` is exactly ``linspace(t0, t_end, n_steps + 1)``."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    times = np.linspace(t0, t_end, n_steps + 1)
    u = np.asarray(u0, dtype=float).copy()
    traj = Trajectory(times=times, states=[u.copy()])
    for k in range(n_steps):
        step = rk_step(system, tab, times[k], u, times[k + 1] - times[k], cfg, jac_form)
        u = step.u_next
        traj.states.append(u.copy())
        traj.newton_iterations.append(step.newton_iterations)
        if keep_stages:
            traj.stages.append(step.stages.copy())
    return traj


def l2_time_error(times, stages, weights, nodes, exact, norm_sq=None) -> float:
    """``sqrt(sum_n dt_n/2 sum_j w_j |U_j^n - exact(t_j)|^2)`` with ``t_j`` the mapped LGL nodes.

    ``norm_sq`` gives the squared spatial norm of a difference vector and
    defaults to the plain sum of squares.
    """
    if norm_sq is None:
        def norm_sq(v):
            return float(np.sum(np.asarray(v) ** 2))
    total = 0.0
    for k, U in enumerate(stages):
        t0, t1 = times[k], times[k + 1]
        dt = t1 - t0
        for j, (w, tau) in enumerate(zip(weights, nodes)):
            tj = t0 + 0.5 * dt * (1.0 + tau)
            total += 0.5 * dt * w * norm_sq(U[j] - exact(tj))
    return float(np.sqrt(total))
