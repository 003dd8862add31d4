"""Tensor-product cell complexes for multi-element Cartesian domains.

A :class:`GridComplex` bundles three complexes built over the same domain:

* the primal Gauss-Lobatto complex, carrying velocity fluxes on edges and
  pressure on cells;
* two staggered complexes, one per momentum direction.  For ``w = x`` the
  x-coordinates come from the dual (extended Gauss) grid and the
  y-coordinates from the primal grid, so every staggered x-cell is a primal
  x-normal edge extent times a dual x-interval.  ``w = y`` mirrors this.

Orientation conventions (fixed once, used everywhere):

* x-normal edges (vertical) carry flux in +x, y-normal edges (horizontal)
  carry flux in +y;
* for the gradient map ``d10`` vertical edges run bottom to top and
  horizontal edges run left to right;
* cells are counterclockwise; ``d21`` is the outward-flux divergence.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .poly_basis import Basis1D, extended_gauss_nodes, gll_nodes

DIRECTIONS = ("x", "y")


@dataclass(frozen=True)
class DomainSpec:
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nel_x: int
    nel_y: int
    order: int

    def __post_init__(self):
        for name in ("x_range", "y_range"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ValueError(f"{name} must be a non-degenerate interval, got {(lo, hi)}")
            object.__setattr__(self, name, (float(lo), float(hi)))
        for name in ("nel_x", "nel_y", "order"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {val!r}")
            object.__setattr__(self, name, int(val))


class Axis:
    """A uniform 1D element partition with a fixed reference node pattern.

    Nodes on element interfaces are shared, so the axis has
    ``nel * (m - 1) + 1`` global nodes for an ``m``-node reference pattern.
    """

    def __init__(self, lo: float, hi: float, nel: int, ref_nodes, kind: str):
        self.lo, self.hi, self.nel, self.kind = float(lo), float(hi), int(nel), kind
        self.basis = Basis1D(np.asarray(ref_nodes, dtype=float))
        self.per_element = len(ref_nodes) - 1
        self.breaks = np.linspace(self.lo, self.hi, self.nel + 1)
        self.jacobian = (self.hi - self.lo) / self.nel / 2.0
        ref = self.basis.nodes
        coords = np.empty(self.n_nodes)
        for e in range(self.nel):
            coords[e * self.per_element:(e + 1) * self.per_element + 1] = (
                self.breaks[e] + self.jacobian * (ref + 1.0))
        coords[-1] = self.hi
        for e in range(self.nel + 1):
            coords[e * self.per_element] = self.breaks[e]
        self.coords = coords

    @property
    def n_nodes(self) -> int:
        return self.nel * self.per_element + 1

    @property
    def n_intervals(self) -> int:
        return self.nel * self.per_element

    def element_nodes(self, e: int) -> np.ndarray:
        return np.arange(e * self.per_element, (e + 1) * self.per_element + 1)

    def element_intervals(self, e: int) -> np.ndarray:
        return np.arange(e * self.per_element, (e + 1) * self.per_element)

    def to_physical(self, e: int, xi):
        return self.breaks[e] + self.jacobian * (np.asarray(xi) + 1.0)

    def locate(self, x):
        """Element index and reference coordinate for each physical ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        tol = 1e-12 * (self.hi - self.lo)
        if np.any(x < self.lo - tol) or np.any(x > self.hi + tol):
            raise ValueError("point outside the domain")
        e = np.clip(np.floor((x - self.lo) / (2.0 * self.jacobian)).astype(int), 0, self.nel - 1)
        xi = np.clip((x - self.breaks[e]) / self.jacobian - 1.0, -1.0, 1.0)
        return e, xi

    def nodal_values(self, x) -> np.ndarray:
        """Dense ``(len(x), n_nodes)`` matrix of the global nodal basis."""
        e, xi = self.locate(x)
        out = np.zeros((len(xi), self.n_nodes))
        h = self.basis.lagrange(xi)
        cols = e[:, None] * self.per_element + np.arange(self.per_element + 1)[None, :]
        np.put_along_axis(out, cols, h, axis=1)
        return out

    def edge_values(self, x) -> np.ndarray:
        """Dense ``(len(x), n_intervals)`` matrix of physical edge functions.

        Physical edge functions have unit integral over their own interval.
        """
        e, xi = self.locate(x)
        out = np.zeros((len(xi), self.n_intervals))
        ev = self.basis.edge(xi) / self.jacobian
        cols = e[:, None] * self.per_element + np.arange(self.per_element)[None, :]
        np.put_along_axis(out, cols, ev, axis=1)
        return out


def primal_axis(lo, hi, nel, p) -> Axis:
    return Axis(lo, hi, nel, gll_nodes(p).nodes, "primal")


def dual_axis(lo, hi, nel, p) -> Axis:
    return Axis(lo, hi, nel, extended_gauss_nodes(p), "dual")


def _coo(rows, cols, vals, shape):
    return sp.csr_matrix((np.asarray(vals, dtype=np.int64), (rows, cols)), shape=shape)


class TensorComplex:
    """Points, x-normal edges, y-normal edges and cells of a tensor grid.

    Numbering (x index fastest): point ``(i, j) -> j*(nx+1) + i``; x-normal
    edge at ``x_i`` spanning y-interval ``j`` -> ``j*(nx+1) + i``; y-normal
    edge on x-interval ``i`` at ``y_j`` -> ``n_xnormal + j*nx + i``; cell
    ``(i, j) -> j*nx + i``.  All edges list x-normal ones first.
    """

    def __init__(self, ax: Axis, ay: Axis, name: str = ""):
        self.ax, self.ay, self.name = ax, ay, name
        self.nx, self.ny = ax.n_intervals, ay.n_intervals

    @property
    def n_points(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_xnormal(self):
        return (self.nx + 1) * self.ny

    @property
    def n_ynormal(self):
        return self.nx * (self.ny + 1)

    @property
    def n_edges(self):
        return self.n_xnormal + self.n_ynormal

    @property
    def n_cells(self):
        return self.nx * self.ny

    def point(self, i, j):
        return j * (self.nx + 1) + i

    def xnormal(self, i, j):
        return j * (self.nx + 1) + i

    def ynormal(self, i, j):
        return self.n_xnormal + j * self.nx + i

    def cell(self, i, j):
        return j * self.nx + i

    @cached_property
    def _cell_ij(self):
        j, i = np.divmod(np.arange(self.n_cells), self.nx)
        return i, j

    @cached_property
    def _xn_ij(self):
        j, i = np.divmod(np.arange(self.n_xnormal), self.nx + 1)
        return i, j

    @cached_property
    def _yn_ij(self):
        j, i = np.divmod(np.arange(self.n_ynormal), self.nx)
        return i, j

    @cached_property
    def d10(self) -> sp.csr_matrix:
        """Points to edges, gradient orientation (head +1, tail -1)."""
        xi, xj = self._xn_ij
        yi, yj = self._yn_ij
        exn = np.arange(self.n_xnormal)
        eyn = self.n_xnormal + np.arange(self.n_ynormal)
        rows = np.concatenate([exn, exn, eyn, eyn])
        cols = np.concatenate([self.point(xi, xj + 1), self.point(xi, xj),
                               self.point(yi + 1, yj), self.point(yi, yj)])
        vals = np.concatenate([np.ones_like(exn), -np.ones_like(exn),
                               np.ones_like(eyn), -np.ones_like(eyn)])
        return _coo(rows, cols, vals, (self.n_edges, self.n_points))

    @cached_property
    def flux_rotation(self) -> sp.csr_matrix:
        """Diagonal sign map from gradient-oriented edges to flux-oriented edges."""
        s = np.concatenate([np.ones(self.n_xnormal, dtype=np.int64),
                            -np.ones(self.n_ynormal, dtype=np.int64)])
        return sp.diags(s, format="csr", dtype=np.int64)

    @cached_property
    def d10_outer(self) -> sp.csr_matrix:
        """Points to flux edges (discrete curl of a stream function)."""
        return (self.flux_rotation @ self.d10).tocsr()

    @cached_property
    def d21(self) -> sp.csr_matrix:
        """Flux edges to cells, outward positive (right/top +1, left/bottom -1)."""
        ci, cj = self._cell_ij
        c = np.arange(self.n_cells)
        rows = np.tile(c, 4)
        cols = np.concatenate([self.xnormal(ci + 1, cj), self.xnormal(ci, cj),
                               self.ynormal(ci, cj + 1), self.ynormal(ci, cj)])
        vals = np.repeat([1, -1, 1, -1], self.n_cells)
        return _coo(rows, cols, vals, (self.n_cells, self.n_edges))

    @cached_property
    def d21_inner(self) -> sp.csr_matrix:
        """Gradient-oriented edges to cells, counterclockwise circulation."""
        return (self.d21 @ self.flux_rotation).tocsr()

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        xi, _ = self._xn_ij
        _, yj = self._yn_ij
        return np.concatenate([(xi == 0) | (xi == self.nx), (yj == 0) | (yj == self.ny)])

    @cached_property
    def boundary_points(self) -> np.ndarray:
        j, i = np.divmod(np.arange(self.n_points), self.nx + 1)
        return (i == 0) | (i == self.nx) | (j == 0) | (j == self.ny)

    @cached_property
    def point_coords(self) -> np.ndarray:
        X, Y = np.meshgrid(self.ax.coords, self.ay.coords)
        return np.column_stack([X.ravel(), Y.ravel()])

    @cached_property
    def cell_areas(self) -> np.ndarray:
        return np.outer(np.diff(self.ay.coords), np.diff(self.ax.coords)).ravel()

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        dy = np.diff(self.ay.coords)
        dx = np.diff(self.ax.coords)
        return np.concatenate([np.repeat(dy, self.nx + 1), np.tile(dx, self.ny + 1)])

    @cached_property
    def edge_segments(self) -> np.ndarray:
        """``(n_edges, 4)`` rows ``(x0, y0, x1, y1)`` in gradient orientation."""
        X, Y = self.ax.coords, self.ay.coords
        xi, xj = self._xn_ij
        yi, yj = self._yn_ij
        xn = np.column_stack([X[xi], Y[xj], X[xi], Y[xj + 1]])
        yn = np.column_stack([X[yi], Y[yj], X[yi + 1], Y[yj]])
        return np.vstack([xn, yn])


def _merge_axis(primal: Axis, dual: Axis) -> sp.csr_matrix:
    """Primal node <- dual intervals containing it (two at element interfaces)."""
    p = primal.per_element
    rows, cols = [], []
    for e in range(primal.nel):
        for k in range(p + 1):
            rows.append(e * p + k)
            cols.append(e * (p + 1) + k)
    return _coo(rows, cols, np.ones(len(rows)), (primal.n_nodes, dual.n_intervals))


class GridComplex:
    """Primal Gauss-Lobatto complex plus the two staggered momentum complexes."""

    def __init__(self, spec: DomainSpec):
        self.spec = spec
        p = spec.order
        self.order = p
        self.xp = primal_axis(*spec.x_range, spec.nel_x, p)
        self.yp = primal_axis(*spec.y_range, spec.nel_y, p)
        self.xd = dual_axis(*spec.x_range, spec.nel_x, p)
        self.yd = dual_axis(*spec.y_range, spec.nel_y, p)
        self.primal = TensorComplex(self.xp, self.yp, "primal")
        self.staggered = {
            "x": TensorComplex(self.xd, self.yp, "staggered-x"),
            "y": TensorComplex(self.xp, self.yd, "staggered-y"),
        }
        sx = _merge_axis(self.xp, self.xd)
        sy = _merge_axis(self.yp, self.yd)
        # momentum control volume of each primal edge = union of staggered cells
        self.merge = {
            "x": sp.kron(sp.identity(self.yp.n_intervals, dtype=np.int64), sx, format="csr"),
            "y": sp.kron(sy, sp.identity(self.xp.n_intervals, dtype=np.int64), format="csr"),
        }

    @property
    def area(self) -> float:
        (x0, x1), (y0, y1) = self.spec.x_range, self.spec.y_range
        return (x1 - x0) * (y1 - y0)

    def momentum_edges(self, w: str) -> np.ndarray:
        """Primal edge indices whose fluxes are the unknowns of momentum direction ``w``."""
        n = self.primal.n_xnormal
        return np.arange(n) if w == "x" else n + np.arange(self.primal.n_ynormal)

    def element_count(self) -> int:
        return self.spec.nel_x * self.spec.nel_y


def build_grid(spec: DomainSpec) -> GridComplex:
    return GridComplex(spec)


def incidence_d10(grid: GridComplex) -> sp.csr_matrix:
    return grid.primal.d10


def incidence_d21(grid: GridComplex) -> sp.csr_matrix:
    return grid.primal.d21


def incidence_d21_staggered(grid: GridComplex, w: str) -> sp.csr_matrix:
    return grid.staggered[w].d21


def export_table(grid: GridComplex, complex_name: str = "primal") -> str:
    """Plain-text listing of every entity of one complex, for inspection."""
    cx = grid.primal if complex_name == "primal" else grid.staggered[complex_name]
    out = io.StringIO()
    out.write(f"# complex {cx.name} nx={cx.nx} ny={cx.ny}\n")
    out.write("# points: index x y boundary\n")
    for k, (x, y) in enumerate(cx.point_coords):
        out.write(f"P {k} {x:.17g} {y:.17g} {int(cx.boundary_points[k])}\n")
    out.write("# edges: index normal x0 y0 x1 y1 boundary (flux sign +x or +y)\n")
    for k, seg in enumerate(cx.edge_segments):
        kind = "x" if k < cx.n_xnormal else "y"
        coords = " ".join(f"{v:.17g}" for v in seg)
        out.write(f"E {k} {kind} {coords} {int(cx.boundary_edges[k])}\n")
    out.write("# cells: index i j xmin ymin xmax ymax orientation\n")
    ci, cj = cx._cell_ij
    X, Y = cx.ax.coords, cx.ay.coords
    for k in range(cx.n_cells):
        i, j = ci[k], cj[k]
        out.write(f"C {k} {i} {j} {X[i]:.17g} {Y[j]:.17g} {X[i + 1]:.17g} {Y[j + 1]:.17g} ccw\n")
    return out.getvalue()
