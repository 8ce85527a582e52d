"""Legendre-Gauss-Lobatto rules, nodal Lagrange bases and differentiation matrices.

Everything here lives on the reference interval [-1, 1] and is shared by the
spatial and the temporal discretization.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100


def legendre(n: int, x):
    """Return (P_n(x), P_{n-1}(x)) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p, p_prev = ((2 * k - 1) * x * p - (k - 1) * p_prev) / k, p
    return p, p_prev


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """n-point LGL rule on [-1, 1]."""

    n: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@dataclass(frozen=True, eq=False)
class LagrangeBasis:
    """Nodal Lagrange basis through the nodes of ``rule``."""

    rule: QuadratureRule
    barycentric_weights: np.ndarray

    @property
    def n(self) -> int:
        return self.rule.n

    @property
    def nodes(self) -> np.ndarray:
        return self.rule.nodes


@lru_cache(maxsize=None)
def lgl_rule(n: int) -> QuadratureRule:
    """Return the ``n``-point Legendre-Gauss-Lobatto rule.

    Interior nodes are the roots of P'_{n-1}; they are found by Newton's
    method on (1 - x^2) P'_{n-1}(x) started from the Chebyshev-Gauss-Lobatto
    points, then symmetrized. Weights are ``2 / (n (n-1) P_{n-1}(x_i)^2)``.

    Raises
    ------
    ValueError
        If ``n < 2``.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"an LGL rule needs at least 2 nodes, got n={n}")
    N = n - 1
    x = -np.cos(np.pi * np.arange(n) / N)
    for _ in range(NEWTON_MAXITER):
        pN, pNm1 = legendre(N, x)
        # (1-x^2) P'_N = N (P_{N-1} - x P_N); the update below is Newton on it
        dx = (x * pN - pNm1) / (n * pN)
        dx[0] = dx[-1] = 0.0
        x = x - dx
        if np.max(np.abs(dx)) <= NEWTON_TOL:
            break
    x[0], x[-1] = -1.0, 1.0
    x = 0.5 * (x - x[::-1])
    if n % 2 == 1:
        x[N // 2] = 0.0
    pN, _ = legendre(N, x)
    w = 2.0 / (n * N * pN**2)
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(n=n, nodes=x, weights=w)


def barycentric_weights(nodes) -> np.ndarray:
    x = np.asarray(nodes, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    lam = 1.0 / np.prod(diff, axis=1)
    return lam


@lru_cache(maxsize=None)
def lagrange_basis(n: int) -> LagrangeBasis:
    rule = lgl_rule(n)
    lam = barycentric_weights(rule.nodes)
    lam.setflags(write=False)
    return LagrangeBasis(rule=rule, barycentric_weights=lam)


def diff_matrix(basis: LagrangeBasis) -> np.ndarray:
    """Differentiation matrix with ``D[j, i] = psi_i'(tau_j)``.

    Off-diagonal entries use the barycentric formula; the diagonal is the
    negative row sum so that ``D @ 1 == 0`` holds to rounding.
    """
    x = basis.nodes
    lam = basis.barycentric_weights
    n = len(x)
    D = np.zeros((n, n))
    for j in range(n):
        for i in range(n):
            if i != j:
                D[j, i] = (lam[i] / lam[j]) / (x[j] - x[i])
        D[j, j] = -np.sum(D[j])
    return D


def interpolation_matrix(basis: LagrangeBasis, points) -> np.ndarray:
    """Rows hold ``psi_i(points[k])`` for all basis functions i."""
    x = basis.nodes
    lam = basis.barycentric_weights
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    diff = pts[:, None] - x[None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = lam[None, :] / diff
        L = terms / np.sum(terms, axis=1, keepdims=True)
    # a point on (or subnormally close to) a node overflows its term;
    # there the interpolant is the cardinal value to rounding
    exact = ~np.isfinite(terms)
    rows = np.any(exact, axis=1)
    L[rows] = exact[rows].astype(float)
    return L


def eval_interpolant(basis: LagrangeBasis, coeffs, tau: float) -> float:
    """Evaluate ``sum_j coeffs[j] psi_j(tau)`` in barycentric form.

    Raises
    ------
    ValueError
        If ``tau`` lies outside [-1, 1]; extrapolation is refused.
    """
    tau = float(tau)
    if not -1.0 <= tau <= 1.0:
        raise ValueError(f"tau={tau} lies outside the reference interval [-1, 1]")
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (basis.n,):
        raise ValueError(f"expected {basis.n} coefficients, got shape {coeffs.shape}")
    return float(interpolation_matrix(basis, [tau])[0] @ coeffs)
