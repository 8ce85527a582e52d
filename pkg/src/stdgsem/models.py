"""PDE models plugged into the DG-SEM operator.

All model methods are vectorized: states carry the component axis last and
coordinates are passed as a tuple of arrays broadcastable against the state
without its component axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AdmissibilityError
from .spatial import SemiDiscreteSystem


class FluxModel:
    """Base class: ``d_t u = -div(F_c(u) - F_v(u, grad u)) + S(u)`` with F_v = diffusivity * grad u."""

    r: int = 1
    d: int = 1
    diffusivity: float = 0.0
    linear: bool = True
    name: str = "model"

    @property
    def has_diffusion(self) -> bool:
        return self.diffusivity > 0.0

    def flux(self, u, xs, t, axis: int) -> np.ndarray:
        """Convective flux component along ``axis``; same shape as ``u``."""
        raise NotImplementedError

    def wave_speed(self, u, xs, t, axis: int) -> np.ndarray:
        """Largest |eigenvalue| of the flux Jacobian along ``axis``, per point."""
        raise NotImplementedError

    def check(self, u) -> None:
        """Raise :class:`AdmissibilityError` for nonphysical states."""

    def source(self, u, xs, t) -> np.ndarray:
        return np.zeros_like(u)

    def max_wave_speed(self, uL, uR, axis: int, xsL=None, xsR=None, t=0.0) -> np.ndarray:
        """Interface estimate: the larger of both one-sided wave speeds."""
        return np.maximum(self.wave_speed(uL, xsL, t, axis), self.wave_speed(uR, xsR, t, axis))

    # pointwise convenience wrappers ------------------------------------------------

    def F_c(self, u, x=None, t=0.0) -> np.ndarray:
        """r x d convective flux tensor at a single state."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        xs = None if x is None else tuple(np.asarray(v, dtype=float) for v in np.atleast_1d(x))
        return np.stack([self.flux(u, xs, t, k) for k in range(self.d)], axis=-1)

    def F_v(self, u, grad_u, x=None, t=0.0) -> np.ndarray:
        """r x d viscous flux tensor ``diffusivity * grad_u``."""
        return self.diffusivity * np.asarray(grad_u, dtype=float).reshape(self.r, self.d)

    def S(self, u, x=None, t=0.0) -> np.ndarray:
        return self.source(np.atleast_1d(np.asarray(u, dtype=float)), x, t)


def _velocity(b, xs, d):
    if callable(b):
        if xs is None:
            raise ValueError("a spatially varying velocity needs coordinates")
        return tuple(np.asarray(v, dtype=float) for v in b(*xs))
    return tuple(float(v) for v in np.broadcast_to(np.asarray(b, dtype=float), (d,)))


class AdvectionModel(FluxModel):
    """Linear advection ``u_t + div(b u) = 0``, optionally with diffusion ``eps * Laplace(u)``."""

    name = "advection"

    def __init__(self, b, d: int | None = None, diffusivity: float = 0.0):
        if diffusivity < 0:
            raise ValueError(f"diffusivity must be >= 0, got {diffusivity}")
        if d is None:
            d = 2 if callable(b) else int(np.size(b))
        self.b = b
        self.d = d
        self.diffusivity = float(diffusivity)
        if diffusivity > 0:
            self.name = "advdiff"

    def velocity(self, xs):
        return _velocity(self.b, xs, self.d)

    def flux(self, u, xs, t, axis):
        bk = self.velocity(xs)[axis]
        if np.ndim(bk):
            bk = bk[..., None]
        return bk * u

    def wave_speed(self, u, xs, t, axis):
        bk = np.abs(self.velocity(xs)[axis])
        return np.broadcast_to(bk, np.shape(u)[:-1]) if np.ndim(bk) else np.full(np.shape(u)[:-1], bk)


def advection_model(b) -> AdvectionModel:
    return AdvectionModel(b)


def advdiff_model(b, eps: float) -> AdvectionModel:
    if eps < 0:
        raise ValueError(f"diffusion coefficient must be >= 0, got {eps}")
    d = 2 if callable(b) else int(np.size(b))
    m = AdvectionModel(b, d=d, diffusivity=eps)
    m.name = "advdiff"
    return m


def rotating_velocity(x, y):
    """``b = (-4 (y - 1/2), 4 (x - 1/2))``, divergence-free rigid rotation."""
    return -4.0 * (y - 0.5), 4.0 * (x - 0.5)


def rotating_pulse_exact(t, x, y, eps: float = 0.001):
    """Closed-form rotating, diffusing Gaussian pulse on [0, 1]^2."""
    x0 = np.asarray(x) - 0.5
    y0 = np.asarray(y) - 0.5
    xq = x0 * np.cos(4 * t) + y0 * np.sin(4 * t) + 0.25
    yq = -x0 * np.sin(4 * t) + y0 * np.cos(4 * t)
    s = 0.004 + 4.0 * eps * t
    return 0.004 / s * np.exp(-(xq**2 + yq**2) / s)


class EulerModel(FluxModel):
    """Compressible Euler equations in conservative variables (rho, rho v, E)."""

    name = "euler"
    linear = False

    def __init__(self, gamma: float = 1.4, d: int = 2):
        if gamma <= 1:
            raise ValueError(f"gamma must exceed 1, got {gamma}")
        self.gamma = float(gamma)
        self.d = d
        self.r = d + 2

    def pressure(self, u):
        rho = u[..., 0]
        m = u[..., 1 : 1 + self.d]
        return (self.gamma - 1.0) * (u[..., -1] - 0.5 * np.sum(m * m, axis=-1) / rho)

    def check(self, u):
        rho = u[..., 0]
        bad = ~(rho > 0)
        if not np.any(bad):
            bad = ~(self.pressure(u) > 0)
        if np.any(bad):
            idx = np.unravel_index(np.argmax(bad), bad.shape)
            state = u[idx]
            raise AdmissibilityError(
                f"nonphysical Euler state {state.tolist()} (need rho > 0 and P > 0)",
                state=state,
                where=idx,
            )

    def flux(self, u, xs, t, axis):
        rho = u[..., 0]
        mk = u[..., 1 + axis]
        vk = mk / rho
        P = self.pressure(u)
        f = u * vk[..., None]
        f[..., 1 + axis] += P
        f[..., -1] += P * vk
        return f

    def wave_speed(self, u, xs, t, axis):
        rho = u[..., 0]
        P = self.pressure(u)
        return np.abs(u[..., 1 + axis] / rho) + np.sqrt(self.gamma * P / rho)


def euler_model(gamma: float = 1.4) -> EulerModel:
    return EulerModel(gamma=gamma, d=2)


@dataclass(frozen=True)
class EulerState:
    rho: np.ndarray
    momentum: tuple
    energy: np.ndarray
    pressure: np.ndarray

    def conservative(self) -> np.ndarray:
        """Stack as (rho, rho v_1, rho v_2, E) along a trailing axis."""
        return np.stack([self.rho, *self.momentum, self.energy], axis=-1)


def vortex_initial(x, y, S: float = 5.0, M: float = 0.5, gamma: float = 1.4) -> EulerState:
    """Isentropic vortex centred at the origin, transported with unit x-velocity.

    The energy uses ``P/(gamma-1) + 0.5 (v_1^2 + v_2^2) / rho`` verbatim.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    f = 1.0 - x**2 - y**2
    base = 1.0 - S**2 * (gamma - 1.0) * M**2 * np.exp(f) / (8.0 * np.pi**2)
    if np.any(base <= 0):
        raise AdmissibilityError("vortex density formula is nonpositive", state=base)
    rho = base ** (1.0 / (gamma - 1.0))
    v1 = 1.0 - S * y * np.exp(f / 2.0) / (2.0 * np.pi)
    v2 = S * x * np.exp(f / 2.0) / (2.0 * np.pi)
    P = rho**gamma / (gamma * M**2)
    E = P / (gamma - 1.0) + 0.5 * (v1**2 + v2**2) / rho
    return EulerState(rho=rho, momentum=(rho * v1, rho * v2), energy=E, pressure=P)


def vortex_exact(lower, upper, S=5.0, M=0.5, gamma=1.4):
    """Initial vortex translated by ``(t, 0)`` with periodic wrap on ``[lower, upper]``."""
    Lx = upper[0] - lower[0]

    def exact(t, x, y):
        xs = np.mod(np.asarray(x) - t - lower[0], Lx) + lower[0]
        return np.moveaxis(vortex_initial(xs, y, S, M, gamma).conservative(), -1, 0)

    return exact


def test_equation_system(rate: float = -1.0, u0: float = 4.0) -> SemiDiscreteSystem:
    """Scalar linear test equation ``u' = rate * u`` (default ``u' = -u``, ``u(0) = 4``)."""
    jac = sp.csr_matrix(np.array([[rate]]))

    def rhs(t, u):
        return rate * np.asarray(u, dtype=float)

    def jacobian(t, u):
        return jac

    def exact(t):
        return np.array([u0 * np.exp(rate * t)])

    return SemiDiscreteSystem(dof=1, rhs=rhs, jacobian=jacobian, linear=True, exact=exact,
                              initial=np.array([u0]))


test_equation_system.__test__ = False  # not a pytest test despite the name
