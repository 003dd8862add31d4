"""Discrete operators of the mimetic momentum discretization.

All metric-free structure lives in the incidence matrices of
:mod:`mimeticns.mesh_topology`; everything here carries metric: mass
matrices, reduction/reconstruction, the momentum map ``P^m_w``, the
pressure-force map ``P^p_w``, the convection matrix ``C_v`` and the
boundary functionals of the pressure and viscous fluxes.

Time-independent matrices on uniform Cartesian elements are Kronecker
products of assembled 1D matrices; only the velocity-dependent convection
matrix needs genuine 2D element assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .mesh_topology import DIRECTIONS, Axis, GridComplex, TensorComplex
from .poly_basis import gauss_nodes

POINT, EDGE, CELL = "point", "edge", "cell"


def _default_nquad(axis: Axis) -> int:
    return axis.per_element + 2


@lru_cache(maxsize=None)
def _ref_rule(n):
    g = gauss_nodes(n)
    return np.array(g.nodes), np.array(g.weights)


# --------------------------------------------------------------------------
# 1D building blocks


def _element_quadrature(axis: Axis, nquad: int):
    """Physical quadrature points ``(nel, Q)`` and weights ``(Q,)`` per element."""
    xi, w = _ref_rule(nquad)
    pts = axis.breaks[:-1, None] + axis.jacobian * (xi[None, :] + 1.0)
    return xi, pts, w * axis.jacobian


def _scatter_1d(axis: Axis, local, nodal_rows: bool, nodal_cols: bool, shape):
    """Assemble the same element matrix into every element of ``axis``."""
    m = axis.per_element
    rows, cols, vals = [], [], []
    r_off = np.arange(local.shape[0])
    c_off = np.arange(local.shape[1])
    for e in range(axis.nel):
        rr = e * m + r_off
        cc = e * m + c_off
        R, C = np.meshgrid(rr, cc, indexing="ij")
        rows.append(R.ravel())
        cols.append(C.ravel())
        vals.append(local.ravel())
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=shape)


@lru_cache(maxsize=None)
def _axis_mass(axis: Axis, kind: str) -> sp.csr_matrix:
    xi, w = _ref_rule(axis.per_element + 2)
    b = axis.basis
    if kind == "nodal":
        f = b.lagrange(xi)
        local = (f.T * w) @ f * axis.jacobian
        local = 0.5 * (local + local.T)
        return _scatter_1d(axis, local, True, True, (axis.n_nodes, axis.n_nodes))
    f = b.edge(xi)
    local = (f.T * w) @ f / axis.jacobian
    local = 0.5 * (local + local.T)
    return _scatter_1d(axis, local, False, False, (axis.n_intervals, axis.n_intervals))


def axis_mass(axis: Axis, kind: str) -> sp.csr_matrix:
    """1D mass matrix of the nodal (``"nodal"``) or edge (``"edge"``) functions."""
    return _axis_mass(axis, kind)


def histopolation_map(dual: Axis, primal: Axis) -> sp.csr_matrix:
    """``H[k, i]`` = integral of primal nodal function ``i`` over dual interval ``k``."""
    if dual.nel != primal.nel or dual.breaks[0] != primal.breaks[0]:
        raise ValueError("axes must share the element partition")
    xi, w = _ref_rule(primal.per_element + 2)
    dn = dual.basis.nodes
    local = np.empty((dual.per_element, primal.per_element + 1))
    for k in range(dual.per_element):
        half = 0.5 * (dn[k + 1] - dn[k])
        x = dn[k] + half * (xi + 1.0)
        local[k] = half * w @ primal.basis.lagrange(x)
    local *= primal.jacobian
    m_d, m_p = dual.per_element, primal.per_element
    rows, cols, vals = [], [], []
    for e in range(primal.nel):
        R, C = np.meshgrid(e * m_d + np.arange(m_d), e * m_p + np.arange(m_p + 1), indexing="ij")
        rows.append(R.ravel())
        cols.append(C.ravel())
        vals.append(local.ravel())
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(dual.n_intervals, primal.n_nodes))


def edge_trace_map(dual: Axis, primal: Axis) -> sp.csr_matrix:
    """``E[k, i]`` = physical primal edge function ``i`` evaluated at dual node ``k``.

    Primal edge functions jump across element interfaces; interface dual
    nodes take the average of both sides.
    """
    ev = primal.basis.edge(dual.basis.nodes) / primal.jacobian
    m_d, m_p = dual.per_element, primal.per_element
    E = sp.lil_matrix((dual.n_nodes, primal.n_intervals))
    for e in range(primal.nel):
        for k in range(m_d + 1):
            g = e * m_d + k
            interface = (k == 0 and e > 0) or (k == m_d and e < primal.nel - 1)
            scale = 0.5 if interface else 1.0
            for i in range(m_p):
                E[g, e * m_p + i] += scale * ev[k, i]
    return E.tocsr()


def boundary_edge_moments(axis: Axis, f_values, nquad: int):
    """Integrals of ``f * e_j`` over each element, ``e_j`` the physical edge functions.

    ``f_values`` holds ``f`` sampled at the physical quadrature points
    ``(nel, Q)`` returned by :func:`_element_quadrature`.
    """
    xi, _, w = _element_quadrature(axis, nquad)
    ev = axis.basis.edge(xi) / axis.jacobian
    return np.einsum("eq,q,qj->ej", np.asarray(f_values), w, ev).ravel()


# --------------------------------------------------------------------------
# Cochains: reduction and reconstruction


@dataclass
class Cochain:
    """Integral values of a form on the oriented entities of one complex."""

    values: np.ndarray
    complex: TensorComplex
    kind: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = {POINT: self.complex.n_points, EDGE: self.complex.n_edges,
             CELL: self.complex.n_cells}[self.kind]
        if self.values.shape != (n,):
            raise ValueError(f"{self.space} cochain needs {n} values, got {self.values.shape}")

    @property
    def space(self) -> str:
        return f"{self.complex.name}-{self.kind}"

    def __len__(self):
        return len(self.values)


def _interval_rule(axis: Axis, nquad: int):
    """Quadrature points ``(n_intervals, Q)`` and weights for every grid interval."""
    xi, w = _ref_rule(nquad)
    c = axis.coords
    half = 0.5 * np.diff(c)
    pts = c[:-1, None] + half[:, None] * (xi[None, :] + 1.0)
    return pts, half[:, None] * w[None, :]


def reduce(field, complex: TensorComplex, kind: str, nquad: int | None = None) -> Cochain:
    """Integrate ``field`` over every entity of ``complex`` of the given kind.

    ``field(x, y)`` returns a scalar density for cells and points, and a
    pair ``(u, v)`` for edges (flux through x-normal edges is the integral
    of ``u dy``, through y-normal edges of ``v dx``).
    """
    nq = nquad or max(_default_nquad(complex.ax), _default_nquad(complex.ay))
    X, Y = complex.ax.coords, complex.ay.coords
    if kind == POINT:
        P = complex.point_coords
        return Cochain(np.asarray(field(P[:, 0], P[:, 1]), dtype=float) * np.ones(len(P)),
                       complex, POINT)
    xq, xw = _interval_rule(complex.ax, nq)
    yq, yw = _interval_rule(complex.ay, nq)
    if kind == CELL:
        xx = xq[None, :, None, :]
        yy = yq[:, None, :, None]
        f = np.broadcast_to(field(xx, yy), (complex.ny, complex.nx, nq, nq))
        vals = np.einsum("jiab,ja,ib->ji", f, yw, xw).ravel()
        return Cochain(vals, complex, CELL)
    if kind == EDGE:
        xx = np.broadcast_to(X[None, :, None], (complex.ny, complex.nx + 1, nq))
        yy = np.broadcast_to(yq[:, None, :], xx.shape)
        u = np.broadcast_to(field(xx, yy)[0], xx.shape)
        fx = np.einsum("jia,ja->ji", u, yw).ravel()
        xx = np.broadcast_to(xq[None, :, :], (complex.ny + 1, complex.nx, nq))
        yy = np.broadcast_to(Y[:, None, None], xx.shape)
        v = np.broadcast_to(field(xx, yy)[1], xx.shape)
        fy = np.einsum("jia,ia->ji", v, xw).ravel()
        return Cochain(np.concatenate([fx, fy]), complex, EDGE)
    raise ValueError(f"unknown entity kind {kind!r}")


def reconstruct(c: Cochain, x, y):
    """Evaluate the basis expansion of ``c`` at points ``(x, y)``.

    Returns a density for cell cochains, a point value for point cochains,
    and the vector ``(u, v)`` for edge (flux) cochains.
    """
    cx = c.complex
    x, y = np.broadcast_arrays(np.atleast_1d(np.asarray(x, dtype=float)),
                               np.atleast_1d(np.asarray(y, dtype=float)))
    shape = x.shape
    x, y = x.ravel(), y.ravel()
    if c.kind == POINT:
        V = c.values.reshape(cx.ny + 1, cx.nx + 1)
        out = np.einsum("pj,ji,pi->p", cx.ay.nodal_values(y), V, cx.ax.nodal_values(x))
        return out.reshape(shape)
    if c.kind == CELL:
        V = c.values.reshape(cx.ny, cx.nx)
        out = np.einsum("pj,ji,pi->p", cx.ay.edge_values(y), V, cx.ax.edge_values(x))
        return out.reshape(shape)
    U = c.values[:cx.n_xnormal].reshape(cx.ny, cx.nx + 1)
    V = c.values[cx.n_xnormal:].reshape(cx.ny + 1, cx.nx)
    u = np.einsum("pj,ji,pi->p", cx.ay.edge_values(y), U, cx.ax.nodal_values(x))
    v = np.einsum("pj,ji,pi->p", cx.ay.nodal_values(y), V, cx.ax.edge_values(x))
    return u.reshape(shape), v.reshape(shape)


# --------------------------------------------------------------------------
# 2D operators


def mass_cells(cx: TensorComplex) -> sp.csr_matrix:
    return sp.kron(axis_mass(cx.ay, "edge"), axis_mass(cx.ax, "edge"), format="csr")


def mass_edges(cx: TensorComplex) -> sp.csr_matrix:
    xn = sp.kron(axis_mass(cx.ay, "edge"), axis_mass(cx.ax, "nodal"))
    yn = sp.kron(axis_mass(cx.ay, "nodal"), axis_mass(cx.ax, "edge"))
    return sp.block_diag([xn, yn], format="csr")


def mass_matrices(grid: GridComplex):
    """``(M11, M22, M1)``: staggered surface and volume mass matrices per direction, primal edge mass."""
    m11 = {w: mass_edges(grid.staggered[w]) for w in DIRECTIONS}
    m22 = {w: mass_cells(grid.staggered[w]) for w in DIRECTIONS}
    return m11, m22, mass_edges(grid.primal)


def momentum_projection(grid: GridComplex, w: str) -> sp.csr_matrix:
    """``P^m_w``: primal flux cochain to staggered-cell momentum cochain of direction ``w``."""
    pr = grid.primal
    if w == "x":
        block = sp.kron(sp.identity(grid.yp.n_intervals), histopolation_map(grid.xd, grid.xp))
        return sp.hstack([block, sp.csr_matrix((block.shape[0], pr.n_ynormal))], format="csr")
    block = sp.kron(histopolation_map(grid.yd, grid.yp), sp.identity(grid.xp.n_intervals))
    return sp.hstack([sp.csr_matrix((block.shape[0], pr.n_xnormal)), block], format="csr")


def pressure_force(grid: GridComplex, w: str, pressure=None, faces=()):
    """``(P^p_w, B_P)``: pressure cochain to pressure-force flux on staggered surfaces.

    The force flux through a surface with unit normal ``n`` is the integral
    of ``p (w . n)``.  On boundary surfaces of the listed ``faces`` the value
    is taken from the prescribed ``pressure(x, y)`` instead (collected in
    ``B_P``); elsewhere ``B_P`` is zero.
    """
    cx = grid.staggered[w]
    ncell = grid.primal.n_cells
    if w == "x":
        block = sp.kron(sp.identity(grid.yp.n_intervals), edge_trace_map(grid.xd, grid.xp))
        P = sp.vstack([block, sp.csr_matrix((cx.n_ynormal, ncell))], format="lil")
    else:
        block = sp.kron(edge_trace_map(grid.yd, grid.yp), sp.identity(grid.xp.n_intervals))
        P = sp.vstack([sp.csr_matrix((cx.n_xnormal, ncell)), block], format="lil")
    bp = np.zeros(cx.n_edges)
    if pressure is not None and faces:
        H = reduce(lambda x, y: (pressure(x, y), pressure(x, y)), cx, EDGE).values
        for idx in _face_surfaces(cx, w, faces):
            P[idx, :] = 0.0
            bp[idx] = H[idx]
    return P.tocsr(), bp


def _face_surfaces(cx: TensorComplex, w: str, faces):
    out = []
    for face in faces:
        if w == "x" and face in ("left", "right"):
            i = 0 if face == "left" else cx.nx
            out.extend(cx.xnormal(i, np.arange(cx.ny)))
        elif w == "y" and face in ("bottom", "top"):
            j = 0 if face == "bottom" else cx.ny
            out.extend(cx.ynormal(np.arange(cx.nx), j))
    return np.asarray(out, dtype=int)


def viscous_boundary(cx: TensorComplex, data, mu: float, nquad: int | None = None) -> np.ndarray:
    """``B_T``: ``mu`` times the boundary integral of ``q (beta . n)`` per surface basis function.

    ``data(x, y)`` is the prescribed boundary value of the momentum density
    component ``q`` (the velocity component along ``w``).
    """
    b = np.zeros(cx.n_edges)
    ax, ay = cx.ax, cx.ay
    nqy = nquad or _default_nquad(ay)
    nqx = nquad or _default_nquad(ax)
    _, yq, _ = _element_quadrature(ay, nqy)
    _, xq, _ = _element_quadrature(ax, nqx)
    jy = np.arange(cx.ny)
    ix = np.arange(cx.nx)
    for i, x0, sign in ((0, ax.lo, -1.0), (cx.nx, ax.hi, 1.0)):
        f = np.broadcast_to(data(np.full_like(yq, x0), yq), yq.shape)
        b[cx.xnormal(i, jy)] += sign * mu * boundary_edge_moments(ay, f, nqy)
    for j, y0, sign in ((0, ay.lo, -1.0), (cx.ny, ay.hi, 1.0)):
        f = np.broadcast_to(data(xq, np.full_like(xq, y0)), xq.shape)
        b[cx.ynormal(ix, j)] += sign * mu * boundary_edge_moments(ax, f, nqx)
    return b


@dataclass
class DiffusiveOperator:
    """Weak viscous traction: ``M11 T = G m + B_T`` with ``G = -mu D21^T M22``.

    ``T`` is the flux of ``mu * grad(q)`` through each staggered surface,
    i.e. the viscous traction component along ``w``.
    """

    mu: float
    m11: sp.csr_matrix
    gradient: sp.csr_matrix
    boundary: np.ndarray

    def traction(self, m: np.ndarray, solve=None) -> np.ndarray:
        rhs = self.gradient @ m + self.boundary
        return solve(rhs) if solve is not None else spla.spsolve(self.m11.tocsc(), rhs)


def diffusive_operator(grid: GridComplex, w: str, mu: float, bc_velocity=None,
                       nquad: int | None = None) -> DiffusiveOperator:
    if not mu > 0:
        raise ValueError(f"viscosity must be positive, got {mu!r}")
    cx = grid.staggered[w]
    m11 = mass_edges(cx)
    g = (-mu * (cx.d21.T @ mass_cells(cx))).tocsr()
    if bc_velocity is None:
        bt = np.zeros(cx.n_edges)
    else:
        comp = 0 if w == "x" else 1
        bt = viscous_boundary(cx, lambda x, y: bc_velocity(x, y)[comp], mu, nquad)
    return DiffusiveOperator(mu, m11, g, bt)


# --------------------------------------------------------------------------
# Convection


class ConvectionAssembler:
    """Reusable sparsity pattern and basis tables for ``C_v`` of one direction.

    ``C_v[r, c]`` is the integral of ``psi_c (v . beta_r)`` with ``psi`` the
    staggered-cell (2-form) basis, ``beta`` the staggered-surface (1-form)
    basis and ``v`` the velocity reconstructed from the primal flux cochain.
    """

    def __init__(self, grid: GridComplex, w: str, nquad: int | None = None):
        self.grid, self.w = grid, w
        cx = grid.staggered[w]
        self.cx = cx
        self.nq = nquad or grid.order + 2
        xi, w_ref = _ref_rule(self.nq)
        ax, ay = cx.ax, cx.ay
        mx, my = ax.per_element, ay.per_element
        self.tab = {
            "x_nodal": ax.basis.lagrange(xi), "x_edge": ax.basis.edge(xi) / ax.jacobian,
            "y_nodal": ay.basis.lagrange(xi), "y_edge": ay.basis.edge(xi) / ay.jacobian,
        }
        self.weights = np.outer(w_ref * ay.jacobian, w_ref * ax.jacobian)
        # transport velocity tables on the primal complex
        xp, yp = grid.xp, grid.yp
        self.vel_tab = {
            "x_nodal": xp.basis.lagrange(xi), "x_edge": xp.basis.edge(xi) / xp.jacobian,
            "y_nodal": yp.basis.lagrange(xi), "y_edge": yp.basis.edge(xi) / yp.jacobian,
        }
        nex, ney = grid.spec.nel_x, grid.spec.nel_y
        ex, ey = np.meshgrid(np.arange(nex), np.arange(ney))
        self.ex, self.ey = ex.ravel(), ey.ravel()
        # global indices, element-major, local (y, x) with x fastest
        k_n, k_e = np.arange(mx + 1), np.arange(mx)
        j_n, j_e = np.arange(my + 1), np.arange(my)
        cells = cx.cell((self.ex[:, None, None] * mx + k_e[None, None, :]),
                        (self.ey[:, None, None] * my + j_e[None, :, None]))
        xs = cx.xnormal((self.ex[:, None, None] * mx + k_n[None, None, :]),
                        (self.ey[:, None, None] * my + j_e[None, :, None]))
        ys = cx.ynormal((self.ex[:, None, None] * mx + k_e[None, None, :]),
                        (self.ey[:, None, None] * my + j_n[None, :, None]))
        ne = len(self.ex)
        cells = cells.reshape(ne, -1)
        xs, ys = xs.reshape(ne, -1), ys.reshape(ne, -1)
        self.rows = np.concatenate([np.repeat(xs, cells.shape[1], axis=1).ravel(),
                                    np.repeat(ys, cells.shape[1], axis=1).ravel()])
        self.cols = np.concatenate([np.tile(cells, (1, xs.shape[1])).ravel(),
                                    np.tile(cells, (1, ys.shape[1])).ravel()])
        self.shape = (cx.n_edges, cx.n_cells)

    def velocity_at_quadrature(self, flux: np.ndarray):
        """Reconstructed ``(u, v)`` at element quadrature points, each ``(E, Qy, Qx)``."""
        g, pr = self.grid, self.grid.primal
        p = g.order
        U = flux[:pr.n_xnormal].reshape(pr.ny, pr.nx + 1)
        V = flux[pr.n_xnormal:].reshape(pr.ny + 1, pr.nx)
        ar = np.arange(p + 1)
        rows_e = self.ey[:, None] * p + ar[None, :p]
        rows_n = self.ey[:, None] * p + ar[None, :]
        cols_e = self.ex[:, None] * p + ar[None, :p]
        cols_n = self.ex[:, None] * p + ar[None, :]
        Ue = U[rows_e[:, :, None], cols_n[:, None, :]]
        Ve = V[rows_n[:, :, None], cols_e[:, None, :]]
        t = self.vel_tab
        u = np.einsum("yj,eji,xi->eyx", t["y_edge"], Ue, t["x_nodal"])
        v = np.einsum("yj,eji,xi->eyx", t["y_nodal"], Ve, t["x_edge"])
        return u, v

    def assemble(self, flux: np.ndarray) -> sp.csr_matrix:
        u, v = self.velocity_at_quadrature(np.asarray(flux, dtype=float))
        t = self.tab
        bx = kernels.convection_blocks(u * self.weights, t["y_edge"], t["y_edge"],
                                       t["x_nodal"], t["x_edge"])
        by = kernels.convection_blocks(v * self.weights, t["y_nodal"], t["y_edge"],
                                       t["x_edge"], t["x_edge"])
        vals = np.concatenate([bx.ravel(), by.ravel()])
        return sp.csr_matrix((vals, (self.rows, self.cols)), shape=self.shape)


def convection_matrix(grid: GridComplex, flux, w: str, nquad: int | None = None) -> sp.csr_matrix:
    """One-shot ``C_v`` for direction ``w`` from a primal flux cochain."""
    values = flux.values if isinstance(flux, Cochain) else flux
    return ConvectionAssembler(grid, w, nquad).assemble(values)


# --------------------------------------------------------------------------


@dataclass
class OperatorSet:
    """Every time-independent operator of one grid, per momentum direction."""

    grid: GridComplex
    m11: dict
    m22: dict
    m1: sp.csr_matrix
    pm: dict
    pp: dict
    d21s: dict
    merge: dict
    d21: sp.csr_matrix
    convection: dict = field(repr=False)
    _m11_lu: dict = field(default_factory=dict, repr=False)

    def m11_solve(self, w: str, rhs):
        if w not in self._m11_lu:
            self._m11_lu[w] = spla.splu(self.m11[w].tocsc())
        return self._m11_lu[w].solve(np.asarray(rhs, dtype=float))


def build_operators(grid: GridComplex, nquad_convection: int | None = None) -> OperatorSet:
    m11, m22, m1 = mass_matrices(grid)
    pm = {w: momentum_projection(grid, w) for w in DIRECTIONS}
    pp = {w: pressure_force(grid, w)[0] for w in DIRECTIONS}
    d21s = {w: grid.staggered[w].d21.astype(float) for w in DIRECTIONS}
    conv = {w: ConvectionAssembler(grid, w, nquad_convection) for w in DIRECTIONS}
    return OperatorSet(grid, m11, m22, m1, pm, pp, d21s,
                       {w: grid.merge[w].astype(float) for w in DIRECTIONS},
                       grid.primal.d21.astype(float), conv)


def dump_coo(matrix, path) -> None:
    """Write ``matrix`` as ``row col value`` lines with a shape header."""
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        fh.write(f"# shape {m.shape[0]} {m.shape[1]} nnz {m.nnz}\n")
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
