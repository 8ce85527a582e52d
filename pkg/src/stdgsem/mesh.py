"""Uniform periodic cuboid meshes, nodal DG spaces and discrete fields.

Unknown ordering is cell-lexicographic (x fastest), then node-lexicographic
within the cell (x fastest), then component. Reshaped in C order, a flat
coefficient vector therefore becomes an array of shape
``(cells_y, cells_x, nodes_y, nodes_x, r)`` in 2D and ``(cells_x, nodes_x, r)``
in 1D. Cell axis of direction k is ``d-1-k``; node axis is ``2d-1-k``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .quadrature import QuadratureRule, lgl_rule


@dataclass(frozen=True, eq=False)
class Mesh:
    d: int
    lower: tuple
    upper: tuple
    cells: tuple
    periodic: tuple

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / np.asarray(self.cells)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def measure(self) -> float:
        return float(np.prod(np.asarray(self.upper) - np.asarray(self.lower)))

    def cell_index(self, multi) -> int:
        """Flat cell index of a multi-index ``(ix[, iy])``."""
        idx, stride = 0, 1
        for k in range(self.d):
            idx += int(multi[k]) * stride
            stride *= self.cells[k]
        return idx

    def cell_multi_index(self, idx: int) -> tuple:
        out = []
        for k in range(self.d):
            out.append(idx % self.cells[k])
            idx //= self.cells[k]
        return tuple(out)

    def neighbor(self, idx: int, axis: int, side: int) -> int:
        """Face neighbor of cell ``idx`` across ``axis``; ``side`` is -1 or +1. Wraps periodically."""
        multi = list(self.cell_multi_index(idx))
        multi[axis] = (multi[axis] + side) % self.cells[axis]
        return self.cell_index(multi)

    def face_neighbors(self, idx: int) -> list[int]:
        return [self.neighbor(idx, k, s) for k in range(self.d) for s in (-1, 1)]


def uniform_mesh(d: int, lower, upper, cells) -> Mesh:
    """Periodic uniform mesh of ``[lower, upper]`` with ``cells`` cells per direction."""
    if d not in (1, 2):
        raise ValueError(f"only d = 1 or 2 is supported, got d={d}")
    lower = tuple(float(v) for v in np.broadcast_to(np.asarray(lower, dtype=float), (d,)))
    upper = tuple(float(v) for v in np.broadcast_to(np.asarray(upper, dtype=float), (d,)))
    cells_arr = np.broadcast_to(np.asarray(cells), (d,))
    if np.any(cells_arr != np.round(cells_arr)) or np.any(cells_arr < 1):
        raise ValueError(f"cell counts must be positive integers, got {cells}")
    if any(u <= l for l, u in zip(lower, upper)):
        raise ValueError(f"upper bounds {upper} must exceed lower bounds {lower}")
    cells = tuple(int(c) for c in cells_arr)
    return Mesh(d=d, lower=lower, upper=upper, cells=cells, periodic=(True,) * d)


@dataclass(frozen=True, eq=False)
class DgSpace:
    """Tensor-product nodal DG space of degree ``p`` with ``r`` components."""

    mesh: Mesh
    p: int
    r: int = 1

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("polynomial degree must be >= 0")
        if self.r < 1:
            raise ValueError("need at least one component")

    @property
    def rule(self) -> QuadratureRule:
        if self.p == 0:
            # single midpoint node; only meaningful for pure convection
            return QuadratureRule(n=1, nodes=np.zeros(1), weights=np.full(1, 2.0))
        return lgl_rule(self.p + 1)

    @property
    def d(self) -> int:
        return self.mesh.d

    @property
    def nq(self) -> int:
        return self.p + 1

    @property
    def nodes_per_cell(self) -> int:
        return self.nq**self.d

    @property
    def dof(self) -> int:
        return self.r * self.mesh.n_cells * self.nodes_per_cell

    @property
    def shape(self) -> tuple:
        return tuple(reversed(self.mesh.cells)) + (self.nq,) * self.d + (self.r,)

    def cell_axis(self, k: int) -> int:
        return self.d - 1 - k

    def node_axis(self, k: int) -> int:
        return 2 * self.d - 1 - k

    def to_array(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs).reshape(self.shape)

    @cached_property
    def coordinates(self) -> tuple:
        """Physical node coordinates, one array of shape ``shape[:-1]`` per direction."""
        base_shape = self.shape[:-1]
        h = self.mesh.spacing
        xs = []
        for k in range(self.d):
            centers = self.mesh.lower[k] + (np.arange(self.mesh.cells[k]) + 0.5) * h[k]
            pts = centers[:, None] + 0.5 * h[k] * self.rule.nodes[None, :]
            shp = [1] * (2 * self.d)
            shp[self.cell_axis(k)] = self.mesh.cells[k]
            shp[self.node_axis(k)] = self.nq
            # cell axis precedes node axis for every k, so a plain reshape places both
            full = np.broadcast_to(pts.reshape(shp), base_shape).copy()
            full.setflags(write=False)
            xs.append(full)
        return tuple(xs)

    @cached_property
    def mass(self) -> "GlobalMassDiagonal":
        h = self.mesh.spacing
        w = np.ones(self.shape[:-1])
        for k in range(self.d):
            shp = [1] * (2 * self.d)
            shp[self.node_axis(k)] = self.nq
            w = w * (0.5 * h[k]) * self.rule.weights.reshape(shp)
        diag = np.repeat(w.reshape(-1), self.r)
        diag.setflags(write=False)
        return GlobalMassDiagonal(space=self, diag=diag)


def dg_space(mesh: Mesh, p: int, r: int = 1) -> DgSpace:
    return DgSpace(mesh=mesh, p=int(p), r=int(r))


@dataclass(frozen=True, eq=False)
class GlobalMassDiagonal:
    space: DgSpace
    diag: np.ndarray

    def apply(self, v) -> np.ndarray:
        return self.diag * v

    def solve(self, v) -> np.ndarray:
        return v / self.diag


@dataclass(eq=False)
class DiscreteField:
    space: DgSpace
    coeffs: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if self.coeffs.size != self.space.dof:
            raise ValueError(f"expected {self.space.dof} coefficients, got {self.coeffs.size}")

    def as_array(self) -> np.ndarray:
        return self.space.to_array(self.coeffs)

    def copy(self) -> "DiscreteField":
        return DiscreteField(self.space, self.coeffs.copy(), self.time_tag)


def _evaluate(space: DgSpace, f) -> np.ndarray:
    xs = space.coordinates
    base = xs[0].shape
    vals = f(*xs)
    if np.isscalar(vals) or np.ndim(vals) == 0:
        vals = np.full(base + (space.r,), float(vals))
    else:
        vals = np.asarray(vals, dtype=float)
        if vals.shape == base:
            vals = vals[..., None]
        elif vals.shape[0] == space.r and vals.shape[1:] == base:
            vals = np.moveaxis(vals, 0, -1)
        else:
            vals = np.broadcast_to(vals, base + (space.r,))
    if vals.shape[-1] != space.r:
        raise ValueError(f"function returned {vals.shape[-1]} components, space has {space.r}")
    return np.ascontiguousarray(vals).reshape(-1)


def interpolate(space: DgSpace, f, t: float = 0.0) -> DiscreteField:
    """Nodal interpolation: coefficients are ``f(x[, y])`` at the mapped LGL nodes.

    ``f`` returns either an array shaped like the coordinates (one component)
    or a sequence of ``r`` such arrays.
    """
    return DiscreteField(space, _evaluate(space, f), t)


def l2_norm(field: DiscreteField) -> float:
    """Global discrete L2 norm, ``sqrt(sum_cells u_c^T M_c u_c)``, summed over components."""
    m = field.space.mass.diag
    return float(np.sqrt(np.sum(m * field.coeffs**2)))


def l2_error(field: DiscreteField, exact, t: float) -> float:
    """L2 norm of ``field - interpolate(exact(t, .))`` at the quadrature nodes."""
    ref = _evaluate(field.space, lambda *xs: exact(t, *xs))
    diff = DiscreteField(field.space, field.coeffs - ref, t)
    return l2_norm(diff)


def field_csv(field: DiscreteField) -> str:
    """Render a field as CSV with header ``x[,y],component,value``."""
    space = field.space
    xs = [x.reshape(-1) for x in space.coordinates]
    vals = field.coeffs.reshape(-1, space.r)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = ["x", "y"][: space.d]
    w.writerow(names + ["component", "value"])
    for i in range(vals.shape[0]):
        for c in range(space.r):
            w.writerow([repr(float(x[i])) for x in xs] + [c, repr(float(vals[i, c]))])
    return buf.getvalue()
