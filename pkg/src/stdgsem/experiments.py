"""Experiment drivers: EOC studies, rotating pulse, Euler vortex and Jacobian sparsity.

Every driver is deterministic. CSV renderers start with a ``# stdgsem-csv v1 <kind>``
comment line and print floats with ``repr`` so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .lodg import integrate, l2_time_error, stage_jacobian
from .mesh import DiscreteField, dg_space, interpolate, l2_error, uniform_mesh
from .models import (
    advdiff_model,
    advection_model,
    euler_model,
    rotating_pulse_exact,
    rotating_velocity,
    test_equation_system,
    vortex_exact,
)
from .newton import NewtonConfig, permute, sparsity_of, time_lex_permutation
from .spatial import assemble_semidiscrete
from .stdg import TimeElementSystem, st_jacobian, stdg_integrate
from .time_operators import lobatto_tableau, sbp_operators, to_butcher

CSV_VERSION = "v1"
METHODS = ("lodg", "stdg")
PULSE_EPS = 0.001
VORTEX_DOMAIN = ((-10.0, -10.0), (10.0, 10.0))
MAX_VORTEX_CELLS = 32


def csv_header(kind: str) -> str:
    return f"# stdgsem-csv {CSV_VERSION} {kind}\n"


def _rows_csv(kind: str, header, rows) -> str:
    buf = io.StringIO()
    buf.write(csv_header(kind))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _check_method(method: str) -> str:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return method


def _check_ntau(n_tau: int) -> int:
    if n_tau not in (2, 3, 4):
        raise ValueError(f"n_tau must be 2, 3 or 4, got {n_tau}")
    return n_tau


def _run(system, method, n_tau, u0, t_end, n_steps, cfg, jac_form):
    """Integrate with either method; both trajectories expose times/states/stages."""
    if method == "lodg":
        return integrate(system, lobatto_tableau(n_tau), 0.0, u0, t_end, n_steps, cfg, jac_form)
    return stdg_integrate(system, sbp_operators(n_tau), 0.0, u0, t_end, n_steps, cfg)


# -- EOC ----------------------------------------------------------------------------


@dataclass
class EocReport:
    label: str
    Ns: np.ndarray
    errors: np.ndarray
    rates: np.ndarray

    def to_csv(self) -> str:
        rows = [
            (self.label, int(N), float(e), float(self.rates[k - 1]) if k else "")
            for k, (N, e) in enumerate(zip(self.Ns, self.errors))
        ]
        return _rows_csv("eoc", ["label", "N", "error", "rate"], rows)


def eoc(Ns, errors) -> np.ndarray:
    """``rate_k = log(e_k / e_{k+1}) / log(N_{k+1} / N_k)``."""
    Ns = np.asarray(Ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if Ns.shape != errors.shape or Ns.size < 2:
        raise ValueError("need at least two (N, error) pairs of equal length")
    if np.any(~(errors > 0)):
        raise ValueError("errors must be positive")
    return np.log(errors[:-1] / errors[1:]) / np.log(Ns[1:] / Ns[:-1])


def testeq_study(method: str, n_tau: int, N_list=None, cfg: NewtonConfig | None = None,
                 jac_form: str = "a_inv_form") -> dict:
    """Pointwise and L2-in-time EOC reports on ``u' = -u``, ``u(0) = 4`` from one set of runs."""
    _check_method(method)
    _check_ntau(n_tau)
    N_list = [2**k for k in range(3, 10)] if N_list is None else [int(N) for N in N_list]
    cfg = cfg or NewtonConfig(abs_tol=1e-14, rel_tol=1e-14)
    system = test_equation_system()
    ops = sbp_operators(n_tau)
    point, l2 = [], []
    for N in N_list:
        traj = _run(system, method, n_tau, system.initial, 1.0, N, cfg, jac_form)
        point.append(abs(traj.states[-1][0] - system.exact(1.0)[0]))
        l2.append(l2_time_error(traj.times, traj.stages, ops.weights, ops.nodes, system.exact))
    out = {}
    for norm, errs in (("pointwise", point), ("l2_time", l2)):
        errs = np.array(errs)
        out[norm] = EocReport(label=f"{method}-ntau{n_tau}-{norm}", Ns=np.array(N_list), errors=errs,
                              rates=eoc(N_list, errs))
    return out


def run_eoc_testeq(method: str, n_tau: int, norm: str = "pointwise", N_list=None,
                   cfg: NewtonConfig | None = None, jac_form: str = "a_inv_form") -> EocReport:
    """EOC study on ``u' = -u``, ``u(0) = 4`` over (0, 1].

    ``norm`` is ``pointwise`` (``|u_N - 4/e|``) or ``l2_time`` (stage values
    at the temporal LGL nodes against the exact solution).
    """
    if norm not in ("pointwise", "l2_time"):
        raise ValueError(f"unknown norm {norm!r}")
    return testeq_study(method, n_tau, N_list, cfg, jac_form)[norm]


# -- rotating pulse -------------------------------------------------------------------


@dataclass
class AdvDiffResult:
    l2_error_final: float
    runtime: float
    newton_iterations: int
    n_steps: int
    dt: float
    p: int
    space: object = field(repr=False, default=None)
    trajectory: object = field(repr=False, default=None)


def pulse_problem(N: int, p: int, eps: float = PULSE_EPS):
    """Rotating pulse on the periodic unit square with ``N x N`` cells of degree ``p``."""
    space = dg_space(uniform_mesh(2, (0.0, 0.0), (1.0, 1.0), N), p)
    system = assemble_semidiscrete(space, advdiff_model(rotating_velocity, eps))
    u0 = interpolate(space, lambda x, y: rotating_pulse_exact(0.0, x, y, eps)).coeffs
    return space, system, u0


def run_advdiff(method: str, n_tau: int, N: int, dt: float | None = None, p: int | None = None,
                t_end: float = 1.0, eps: float = PULSE_EPS, cfg: NewtonConfig | None = None,
                jac_form: str = "a_inv_form") -> AdvDiffResult:
    """Rotating pulse to ``t_end``; ``dt=None`` couples ``dt = 1/N`` and ``p=None`` uses ``n_tau - 1``."""
    _check_method(method)
    _check_ntau(n_tau)
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    p = n_tau - 1 if p is None else int(p)
    dt = 1.0 / N if dt is None else float(dt)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n_steps = max(1, int(round(t_end / dt)))
    space, system, u0 = pulse_problem(N, p, eps)
    start = time.perf_counter()
    traj = _run(system, method, n_tau, u0, t_end, n_steps, cfg, jac_form)
    runtime = time.perf_counter() - start
    err = l2_error(DiscreteField(space, traj.states[-1]),
                   lambda t, x, y: rotating_pulse_exact(t, x, y, eps), t_end)
    return AdvDiffResult(l2_error_final=err, runtime=runtime, newton_iterations=traj.total_newton_iterations,
                         n_steps=n_steps, dt=t_end / n_steps, p=p, space=space, trajectory=traj)


# -- Euler vortex -----------------------------------------------------------------------


@dataclass
class VortexResult:
    l2_density_error: float
    min_density: float
    newton_stats: list  # iterations per step
    t_end: float

    @property
    def max_newton_iterations(self) -> int:
        return max(self.newton_stats, default=0)


def density_error(space, u, exact, t: float) -> float:
    """Discrete L2 error of the density component."""
    rho = space.to_array(u)[..., 0]
    ref = exact(t, *space.coordinates)[0]
    w = space.mass.diag.reshape(space.shape)[..., 0]
    return float(np.sqrt(np.sum(w * (rho - ref) ** 2)))


def run_euler_vortex(method: str, n_tau: int, cells_per_dim: int, dt: float, n_steps: int,
                     p: int = 1, cfg: NewtonConfig | None = None, jac_form: str = "a_inv_form",
                     allow_large: bool = False) -> VortexResult:
    """Isentropic vortex on [-10, 10]^2 advanced ``n_steps`` steps of size ``dt``."""
    _check_method(method)
    _check_ntau(n_tau)
    if cells_per_dim > MAX_VORTEX_CELLS and not allow_large:
        raise ValueError(f"cells_per_dim={cells_per_dim} exceeds {MAX_VORTEX_CELLS}; pass allow_large")
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    lower, upper = VORTEX_DOMAIN
    space = dg_space(uniform_mesh(2, lower, upper, cells_per_dim), p, r=4)
    system = assemble_semidiscrete(space, euler_model())
    exact = vortex_exact(lower, upper)
    u = interpolate(space, lambda x, y: exact(0.0, x, y)).coeffs
    t_end = dt * n_steps
    stats = []
    if n_steps > 0:
        traj = _run(system, method, n_tau, u, t_end, n_steps, cfg, jac_form)
        u = traj.states[-1]
        stats = list(traj.newton_iterations)
    return VortexResult(
        l2_density_error=density_error(space, u, exact, t_end),
        min_density=float(space.to_array(u)[..., 0].min()),
        newton_stats=stats,
        t_end=t_end,
    )


# -- sparsity ---------------------------------------------------------------------------

SPARSITY_FORMS = ("st", "a_form", "a_inv_form", "a_inv_permuted")


def advection_element_jacobians(p: int, n_tau: int) -> dict:
    """Jacobians of one space-time element of ``u_t + u_x = 0`` (one periodic cell, dt = 1).

    ``st`` is returned in the subentity (``dune_like``) ordering, the two RK
    forms in stage-major ordering, and ``a_inv_permuted`` is ``a_inv_form``
    moved to the subentity ordering.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if n_tau < 2:
        raise ValueError("n_tau must be >= 2")
    space = dg_space(uniform_mesh(1, 0.0, 1.0, 1), p)
    system = assemble_semidiscrete(space, advection_model(1.0))
    zeros = np.zeros(n_tau * space.dof)
    ops = sbp_operators(n_tau)
    tab = lobatto_tableau(n_tau) if n_tau <= 4 else to_butcher(ops)
    perm = time_lex_permutation(n_tau, space.dof, "dune_like")
    J_st = st_jacobian(TimeElementSystem(system, ops, 0.0, 1.0, np.zeros(space.dof)), zeros)
    J_a = stage_jacobian(system, tab, 0.0, zeros, 1.0, "a_form")
    J_ainv = stage_jacobian(system, tab, 0.0, zeros, 1.0, "a_inv_form")
    return {
        "st": permute(J_st, perm),
        "a_form": permute(J_a, np.arange(len(perm))),
        "a_inv_form": permute(J_ainv, np.arange(len(perm))),
        "a_inv_permuted": permute(J_ainv, perm),
    }


def dump_sparsity(p: int, n_tau: int | None = None, forms=SPARSITY_FORMS, tol: float = 1e-14) -> dict:
    """Patterns per requested form as ``{form: (pattern, pbm_bytes, csv_bytes)}``."""
    n_tau = p + 1 if n_tau is None else n_tau
    mats = advection_element_jacobians(p, n_tau)
    out = {}
    for form in forms:
        if form not in SPARSITY_FORMS:
            raise ValueError(f"unknown form {form!r}; expected one of {SPARSITY_FORMS}")
        pat = sparsity_of(mats[form], tol)
        out[form] = (pat, pat.to_pbm(), csv_header(f"sparsity {form}").encode("ascii") + pat.to_csv())
    return out


# -- CSV renderers ---------------------------------------------------------------------


def trajectory_csv(traj, space) -> str:
    """``step,t,norm_0,...`` with per-component discrete L2 norms."""
    r = space.r
    mass = space.mass.diag.reshape(-1, r)
    rows = []
    for k, (t, u) in enumerate(zip(traj.times, traj.states)):
        norms = np.sqrt(np.sum(mass * np.asarray(u).reshape(-1, r) ** 2, axis=0))
        rows.append([k, float(t)] + [float(v) for v in norms])
    return _rows_csv("trajectory", ["step", "t"] + [f"norm_{c}" for c in range(r)], rows)


def summary_csv(kind: str, items: dict) -> str:
    return _rows_csv(kind, ["key", "value"], list(items.items()))
