"""Collocated DG-SEM in space on periodic cuboid meshes.

The semidiscrete right-hand side is ``F(t, u) = M^{-1} L_h(u)`` where ``L_h``
collects LGL-collocated element integrals, a local Lax-Friedrichs convective
flux and symmetric interior-penalty terms for diffusion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .mesh import DgSpace
from .quadrature import diff_matrix, lagrange_basis

SQRT_EPS = float(np.sqrt(np.finfo(float).eps))


@dataclass(eq=False)
class SemiDiscreteSystem:
    """An ODE system ``u' = rhs(t, u)`` with a sparse Jacobian.

    ``space``/``model``/``eta`` are set for DG discretizations and left
    ``None`` for plain ODEs such as the scalar test equation.
    """

    dof: int
    rhs: Callable
    jacobian: Callable
    linear: bool = False
    space: DgSpace | None = None
    model: object | None = None
    eta: float | None = None
    exact: Callable | None = None
    initial: np.ndarray | None = None
    operator: "DgOperator | None" = field(default=None, repr=False)


def default_penalty(p: int) -> float:
    return 10.0 * p**2 if p > 0 else 1.0


def llf_flux(model, uL, uR, axis: int, sign: int = 1, xL=None, xR=None, t: float = 0.0):
    """Local Lax-Friedrichs flux ``H.n`` for the normal ``n = sign * e_axis``.

    ``H.n = (F(uL) + F(uR)).n / 2 + lambda/2 (uL - uR)``, with lambda the larger
    one-sided wave speed. Works pointwise or on stacked trace arrays.
    """
    uL = np.atleast_1d(np.asarray(uL, dtype=float))
    uR = np.atleast_1d(np.asarray(uR, dtype=float))
    model.check(uL)
    model.check(uR)
    fn = 0.5 * sign * (model.flux(uL, xL, t, axis) + model.flux(uR, xR, t, axis))
    lam = model.max_wave_speed(uL, uR, axis, xL, xR, t)
    return fn + 0.5 * np.asarray(lam)[..., None] * (uL - uR)


class IpFaceTerms(NamedTuple):
    """Interior-penalty face terms in bilinear-form sign (the operator subtracts them).

    ``left``/``right`` multiply the one-sided test-function traces;
    ``symmetry`` multiplies the average normal test gradient.
    """

    consistency: np.ndarray
    penalty: np.ndarray
    symmetry: np.ndarray
    left: np.ndarray
    right: np.ndarray


def interior_penalty_surface(diffusivity, uL, uR, dudn_L, dudn_R, h_e, eta) -> IpFaceTerms:
    """Symmetric interior-penalty terms on one facet with normal pointing left -> right.

    consistency ``{eps du/dn}``, penalty ``eta eps / h_e [u]`` and symmetry
    ``eps [u]``, where ``[u] = uL - uR``. The left cell receives
    ``-consistency + penalty`` and the right cell the negative.
    """
    jump = np.asarray(uL, dtype=float) - np.asarray(uR, dtype=float)
    cons = 0.5 * diffusivity * (np.asarray(dudn_L, dtype=float) + np.asarray(dudn_R, dtype=float))
    pen = eta * diffusivity / h_e * jump
    left = -cons + pen
    return IpFaceTerms(consistency=cons, penalty=pen, symmetry=diffusivity * jump, left=left, right=-left)


def _along(M, arr, axis):
    """Apply matrix ``M`` along ``axis`` of ``arr``: out[..i..] = sum_q M[i, q] arr[..q..]."""
    return np.moveaxis(np.tensordot(M, np.moveaxis(arr, axis, 0), axes=1), 0, axis)


def _expand(vec, axis, ndim):
    shp = [1] * ndim
    shp[axis] = len(vec)
    return np.reshape(vec, shp)


class DgOperator:
    """Evaluates ``M^{-1} L_h`` on a DG space for a given flux model."""

    def __init__(self, space: DgSpace, model, eta: float | None = None):
        if space.r != model.r:
            raise ValueError(f"space has {space.r} components, model needs {model.r}")
        if space.d != model.d:
            raise ValueError(f"space is {space.d}D, model is {model.d}D")
        if model.has_diffusion and space.p < 1:
            raise ValueError("interior penalty needs p >= 1")
        self.space = space
        self.model = model
        self.eta = default_penalty(space.p) if eta is None else float(eta)
        if space.p == 0:
            # finite-volume limit: one node, no volume term
            self.D = np.zeros((1, 1))
            self.w = np.array([2.0])
        else:
            basis = lagrange_basis(space.nq)
            self.D = diff_matrix(basis)
            self.w = basis.rule.weights
        # W^{-1} D^T W: weak-form volume operator after mass inversion
        self.Dhat = (self.D.T * self.w[None, :]) / self.w[:, None]
        self.h = space.mesh.spacing
        # avg cell volume / facet area, which is h_k on a uniform mesh
        self.h_e = self.h.copy()
        self._neighbors = None

    # -- residual ---------------------------------------------------------------

    def rhs(self, t: float, u) -> np.ndarray:
        sp_ = self.space
        U = sp_.to_array(np.asarray(u, dtype=float))
        model = self.model
        model.check(U)
        xs = sp_.coordinates
        nd = U.ndim
        out = np.zeros_like(U)
        w = self.w
        last = sp_.nq - 1
        eps = model.diffusivity
        for k in range(sp_.d):
            ca, na = sp_.cell_axis(k), sp_.node_axis(k)
            g = 2.0 / self.h[k]
            # volume
            F = model.flux(U, xs, t, k)
            out += g * _along(self.Dhat, F, na)
            # convective faces: face c sits between cell c (left) and c+1 (right)
            UL = np.take(U, last, axis=na)
            UR = np.roll(np.take(U, 0, axis=na), -1, axis=ca)
            xL = tuple(np.take(x, last, axis=na) for x in xs)
            xR = tuple(np.roll(np.take(x, 0, axis=na), -1, axis=ca) for x in xs)
            H = llf_flux(model, UL, UR, k, 1, xL, xR, t)
            sl_last = [slice(None)] * nd
            sl_last[na] = last
            sl_first = [slice(None)] * nd
            sl_first[na] = 0
            out[tuple(sl_last)] -= (g / w[last]) * H
            out[tuple(sl_first)] += (g / w[0]) * np.roll(H, 1, axis=ca)
            if eps > 0.0:
                G = g * _along(self.D, U, na)
                out -= eps * g * _along(self.Dhat, G, na)
                GL = np.take(G, last, axis=na)
                GR = np.roll(np.take(G, 0, axis=na), -1, axis=ca)
                ip = interior_penalty_surface(eps, UL, UR, GL, GR, self.h_e[k], self.eta)
                # operator gets minus the bilinear form
                out[tuple(sl_last)] -= (g / w[last]) * ip.left
                out[tuple(sl_first)] -= (g / w[0]) * np.roll(ip.right, 1, axis=ca)
                sym = 0.5 * g * g * ip.symmetry
                coefL = _expand(self.D[last] / w, na, nd)
                coefR = _expand(self.D[0] / w, na, nd)
                out += np.expand_dims(sym, na) * coefL
                out += np.expand_dims(np.roll(sym, 1, axis=ca), na) * coefR
        out += model.source(U, xs, t)
        return out.reshape(-1)

    # -- Jacobian -----------------------------------------------------------------

    def neighbor_table(self) -> np.ndarray:
        """(n_cells, 1 + 2d) array: each cell followed by its face neighbors."""
        if self._neighbors is None:
            mesh = self.space.mesh
            self._neighbors = np.array(
                [[c] + mesh.face_neighbors(c) for c in range(mesh.n_cells)], dtype=np.int64
            )
        return self._neighbors

    def coloring(self) -> np.ndarray:
        """Cell colors such that same-colored cells have disjoint face neighborhoods."""
        mesh = self.space.mesh
        periods = []
        for n in mesh.cells:
            if n <= 3:
                periods.append(n)
                continue
            k = next((m for m in range(3, n + 1) if n % m == 0), n)
            periods.append(k)
        colors = np.zeros(mesh.n_cells, dtype=np.int64)
        for c in range(mesh.n_cells):
            multi = mesh.cell_multi_index(c)
            col, stride = 0, 1
            for k in range(mesh.d):
                col += (multi[k] % periods[k]) * stride
                stride *= periods[k]
            colors[c] = col
        return colors

    def jacobian(self, t: float, u, exact_linear: bool | None = None) -> sp.csr_matrix:
        """Sparse Jacobian of :meth:`rhs` by grouped column evaluations.

        Linear models are differentiated exactly (``rhs`` applied to grouped
        unit vectors); nonlinear ones by forward differences with step
        ``sqrt(eps_mach) (1 + |u_j|)``.
        """
        if exact_linear is None:
            exact_linear = bool(self.model.linear)
        u = np.asarray(u, dtype=float)
        space = self.space
        nloc = space.nodes_per_cell * space.r
        ncell = space.mesh.n_cells
        N = space.dof
        nbr = self.neighbor_table()
        colors = self.coloring()
        base = None if exact_linear else self.rhs(t, u)
        rows_all, cols_all, vals_all = [], [], []
        loc = np.arange(nloc)
        for color in np.unique(colors):
            cells = np.nonzero(colors == color)[0]
            for l in range(nloc):
                cols = cells * nloc + l
                if exact_linear:
                    v = np.zeros(N)
                    v[cols] = 1.0
                    diff = self.rhs(t, v)
                    steps = np.ones(len(cols))
                else:
                    steps = SQRT_EPS * (1.0 + np.abs(u[cols]))
                    v = u.copy()
                    v[cols] += steps
                    # exact representable step
                    steps = v[cols] - u[cols]
                    diff = self.rhs(t, v) - base
                nb = nbr[cells]  # (ncg, 1+2d)
                rows = (nb[:, :, None] * nloc + loc[None, None, :]).reshape(len(cells), -1)
                cc = np.broadcast_to(cols[:, None], rows.shape)
                vals = diff[rows] / steps[:, None]
                rows_all.append(rows.reshape(-1))
                cols_all.append(cc.reshape(-1))
                vals_all.append(vals.reshape(-1))
        rows = np.concatenate(rows_all)
        cols = np.concatenate(cols_all)
        vals = np.concatenate(vals_all)
        key = rows * N + cols
        _, first = np.unique(key, return_index=True)
        J = sp.csr_matrix((vals[first], (rows[first], cols[first])), shape=(N, N))
        J.sum_duplicates()
        return J

    def block_pattern(self) -> sp.csr_matrix:
        """Structural cell-neighborhood pattern at dof level (all ones)."""
        space = self.space
        nloc = space.nodes_per_cell * space.r
        nbr = self.neighbor_table()
        ncell = space.mesh.n_cells
        blocks = sp.lil_matrix((ncell, ncell))
        for c in range(ncell):
            for nb in nbr[c]:
                blocks[nb, c] = 1.0
        return sp.kron(blocks.tocsr(), np.ones((nloc, nloc)), format="csr")


def assemble_semidiscrete(space: DgSpace, model, eta: float | None = None) -> SemiDiscreteSystem:
    """Build ``u' = M^{-1} L_h(u)`` for ``model`` on ``space``."""
    op = DgOperator(space, model, eta)
    cache = {}

    if model.linear:
        def jacobian(t, u):
            if "J" not in cache:
                cache["J"] = op.jacobian(t, np.zeros(space.dof), exact_linear=True)
            return cache["J"]
    else:
        def jacobian(t, u):
            return op.jacobian(t, u)

    return SemiDiscreteSystem(
        dof=space.dof,
        rhs=op.rhs,
        jacobian=jacobian,
        linear=bool(model.linear),
        space=space,
        model=model,
        eta=op.eta,
        operator=op,
    )


def spatial_jacobian(system: SemiDiscreteSystem, t: float, coeffs) -> sp.csr_matrix:
    return system.jacobian(t, np.asarray(coeffs, dtype=float))
