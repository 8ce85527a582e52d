import numpy as np
import pytest

from stdgsem.errors import AdmissibilityError
from stdgsem.lodg import integrate, rk_step
from stdgsem.mesh import dg_space, interpolate, uniform_mesh
from stdgsem.models import advection_model, euler_model, test_equation_system, vortex_exact
from stdgsem.newton import NewtonConfig
from stdgsem.spatial import assemble_semidiscrete
from stdgsem.stdg import (
    TimeElementSystem,
    element_csv,
    st_jacobian,
    st_residual,
    stdg_integrate,
    stdg_step,
)
from stdgsem.time_operators import lobatto_tableau, sbp_operators

TIGHT = NewtonConfig(abs_tol=1e-14, rel_tol=1e-14)


def _advection(N=8, p=2):
    space = dg_space(uniform_mesh(1, 0.0, 1.0, N), p)
    sys = assemble_semidiscrete(space, advection_model(1.0))
    u0 = interpolate(space, lambda x: np.sin(2 * np.pi * x)).coeffs
    return space, sys, u0


def test_test_equation_example():
    step = stdg_step(test_equation_system(), sbp_operators(2), 0.0, np.array([4.0]), 0.1)
    assert step.u_next[0] == pytest.approx(3.6199095, abs=1e-7)
    assert step.newton_iterations == 1


@pytest.mark.parametrize("n", [2, 3, 4])
def test_residual_vanishes_at_lobatto_stages(n):
    _, sys, u0 = _advection()
    dt = 0.05
    stages = rk_step(sys, lobatto_tableau(n), 0.0, u0, dt, TIGHT).stages
    res = st_residual(TimeElementSystem(sys, sbp_operators(n), 0.0, dt, u0), stages.reshape(-1))
    assert np.max(np.abs(res)) <= 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_constant_state_without_dynamics(n):
    sys = test_equation_system(rate=0.0)
    el = TimeElementSystem(sys, sbp_operators(n), 0.0, 0.3, np.array([2.5]))
    assert np.max(np.abs(st_residual(el, np.full(n, 2.5)))) <= 1e-14


def test_dt_enters_only_through_flux_term():
    _, sys, u0 = _advection(4, 1)
    ops = sbp_operators(3)
    U = np.random.default_rng(0).normal(size=3 * sys.dof)
    r1 = st_residual(TimeElementSystem(sys, ops, 0.0, 0.1, u0), U)
    r2 = st_residual(TimeElementSystem(sys, ops, 0.0, 0.3, u0), U)
    F = np.stack([sys.rhs(0.0, b) for b in U.reshape(3, -1)])
    np.testing.assert_allclose(r2 - r1, (-0.5 * 0.2 * ops.weights[:, None] * F).reshape(-1), atol=1e-13)


def test_jacobian_at_zero_dt():
    el = TimeElementSystem(test_equation_system(), sbp_operators(2), 0.0, 0.0, np.array([1.0]))
    np.testing.assert_allclose(st_jacobian(el, np.ones(2)), [[0.5, 0.5], [-0.5, 0.5]], atol=1e-15)


def test_jacobian_matches_finite_differences_euler():
    space = dg_space(uniform_mesh(2, (-10, -10), (10, 10), 2), 1, r=4)
    sys = assemble_semidiscrete(space, euler_model())
    ex = vortex_exact((-10, -10), (10, 10))
    u0 = interpolate(space, lambda x, y: ex(0.0, x, y)).coeffs
    rng = np.random.default_rng(4)
    U = np.tile(u0, 2) * (1 + 1e-2 * rng.uniform(-1, 1, 2 * u0.size))
    el = TimeElementSystem(sys, sbp_operators(2), 0.0, 0.05, u0)
    v = 1e-2 * rng.normal(size=U.size) * np.abs(U)
    h = 1e-6
    fd = (st_residual(el, U + h * v) - st_residual(el, U - h * v)) / (2 * h)
    assert np.linalg.norm(st_jacobian(el, U) @ v - fd) <= 1e-6 * np.linalg.norm(fd)


def test_equivalence_with_lodg_on_advection():
    _, sys, u0 = _advection(8, 2)
    a = integrate(sys, lobatto_tableau(3), 0.0, u0, 0.5, 10, TIGHT)
    b = stdg_integrate(sys, sbp_operators(3), 0.0, u0, 0.5, 10, TIGHT)
    for ua, ub in zip(a.states, b.states):
        assert np.max(np.abs(ua - ub)) <= 1e-9 * max(1.0, np.max(np.abs(ua)))
    for Sa, Sb in zip(a.stages, b.stages):
        np.testing.assert_allclose(Sa, Sb, atol=1e-9)


def test_trajectory_bookkeeping():
    traj = stdg_integrate(test_equation_system(), sbp_operators(2), 0.0, [4.0], 1.0, 4)
    np.testing.assert_array_equal(traj.times, np.linspace(0, 1, 5))
    assert len(traj.element_solutions) == 4 and traj.stages is traj.element_solutions
    assert traj.total_newton_iterations == 4
    with pytest.raises(ValueError):
        stdg_integrate(test_equation_system(), sbp_operators(2), 0.0, [4.0], 1.0, 0)
    with pytest.raises(ValueError):
        TimeElementSystem(test_equation_system(), sbp_operators(2), 0.0, 0.1, np.zeros(3))


def test_admissibility_reports_temporal_node():
    space = dg_space(uniform_mesh(2, (0, 0), (1, 1), 1), 1, r=4)
    sys = assemble_semidiscrete(space, euler_model())
    good = np.tile([1.0, 0.0, 0.0, 2.5], 4)
    bad = good.copy()
    bad[0] = -1.0
    el = TimeElementSystem(sys, sbp_operators(2), 0.0, 0.1, good)
    with pytest.raises(AdmissibilityError, match="temporal node 1"):
        st_residual(el, np.concatenate([good, bad]))


def test_element_csv():
    space, sys, u0 = _advection(2, 1)
    ops = sbp_operators(2)
    traj = stdg_integrate(sys, ops, 0.0, u0, 0.2, 2)
    text = element_csv(traj, ops, space)
    lines = text.splitlines()
    assert lines[0] == "element,stage,tau,t,x,component,value"
    assert len(lines) == 1 + 2 * 2 * sys.dof
    assert element_csv(traj, ops, space) == text
    plain = element_csv(stdg_integrate(test_equation_system(), ops, 0.0, [4.0], 1.0, 1), ops)
    assert plain.splitlines()[0] == "element,stage,tau,t,index,component,value"
