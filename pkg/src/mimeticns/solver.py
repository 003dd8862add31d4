"""Steady incompressible Navier-Stokes on the mimetic spectral-element complex.

Unknowns of every linear solve, in order::

    [ u (primal edge fluxes) | p (primal cell integrals) | gauge multiplier |
      Z_x | Z_y ]

``Z_w = F_w - T_w`` is the convective minus viscous momentum flux of
direction ``w`` on the staggered surfaces, kept as an auxiliary unknown so
that the system stays sparse (its defining relation involves the inverse
surface mass matrix).  Rows are

* one momentum balance per interior primal edge: the sum of
  ``Z_w + H_w`` over the boundary of its staggered control volume,
* one strong normal-velocity row per boundary edge,
* exact continuity ``D21 u + lambda = 0`` per primal cell,
* the zero-mean pressure constraint,
* ``M11_w Z_w - (C_v + mu D21^T M22) P^m_w u = -B_T`` per direction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh_topology import DIRECTIONS, GridComplex
from .operators import CELL, EDGE, Cochain, OperatorSet, diffusive_operator, pressure_force, reduce

logger = logging.getLogger(__name__)

COMPATIBILITY_TOL = 1e-10


class SolverError(RuntimeError):
    """The linear system is singular or the configuration is inconsistent."""


class InconsistentBoundaryError(SolverError):
    """Prescribed normal velocities do not satisfy the global mass balance."""


@dataclass
class BoundaryCondition:
    """Velocity data on the whole boundary, optional pressure data on faces.

    The normal component of ``velocity(x, y) -> (u, v)`` is imposed strongly
    on boundary edge fluxes; the tangential component enters weakly through
    the viscous boundary functional.  ``pressure`` is only used on the
    listed ``pressure_faces``.
    """

    velocity: Callable
    pressure: Callable | None = None
    pressure_faces: tuple = ()
    flux_quadrature: int = 40

    def normal_fluxes(self, grid: GridComplex) -> tuple[np.ndarray, np.ndarray]:
        pr = grid.primal
        idx = np.flatnonzero(pr.boundary_edges)
        vals = reduce(self.velocity, pr, EDGE, nquad=self.flux_quadrature).values
        return idx, vals[idx]

    def net_outflow(self, grid: GridComplex) -> float:
        idx, vals = self.normal_fluxes(grid)
        g = np.zeros(grid.primal.n_edges)
        g[idx] = vals
        # each boundary edge belongs to exactly one cell, so the cell divergence sums to the outflow
        return float(np.sum(grid.primal.d21 @ g))

    def scaled(self, alpha: float) -> "BoundaryCondition":
        vel = self.velocity
        pres = self.pressure

        def velocity(x, y):
            u, v = vel(x, y)
            return alpha * np.asarray(u), alpha * np.asarray(v)

        pressure = None if pres is None else (lambda x, y: alpha * np.asarray(pres(x, y)))
        return BoundaryCondition(velocity, pressure, self.pressure_faces, self.flux_quadrature)


@dataclass
class SolverConfig:
    mu: float = 1.0
    tol: float = 1e-10
    max_iter: int = 200
    relax: float = 0.7
    linear_solver: str = "splu"
    convection: bool = True
    nquad_convection: int | None = None

    def __post_init__(self):
        if not 0.0 < self.relax <= 1.0:
            raise ValueError(f"relaxation factor must lie in (0, 1], got {self.relax}")
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if not self.mu > 0:
            raise ValueError(f"viscosity must be positive, got {self.mu}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.linear_solver not in ("splu", "spsolve"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")


@dataclass
class FlowState:
    grid: GridComplex
    u: Cochain
    p: Cochain
    m: dict
    residual_history: list = field(default_factory=list)
    mass_history: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    multiplier: float = 0.0

    @property
    def velocity_flux(self) -> np.ndarray:
        return self.u.values

    @property
    def pressure(self) -> np.ndarray:
        return self.p.values


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    n_edges: int
    n_cells: int
    n_aux: dict
    gauged: bool

    @property
    def n_primary(self) -> int:
        """Velocity, pressure and (when gauged) multiplier unknowns."""
        return self.n_edges + self.n_cells + int(self.gauged)

    @property
    def slices(self) -> dict:
        e, c, g = self.n_edges, self.n_cells, int(self.gauged)
        out = {"u": slice(0, e), "p": slice(e, e + c), "lambda": slice(e + c, e + c + g)}
        start = e + c + g
        for w in DIRECTIONS:
            out[w] = slice(start, start + self.n_aux[w])
            start += self.n_aux[w]
        return out


class SteadyProblem:
    """Iterate-independent blocks of the steady system for one grid, BC and viscosity."""

    def __init__(self, operators: OperatorSet, bc: BoundaryCondition, mu: float):
        self.ops, self.bc, self.mu = operators, bc, mu
        grid = operators.grid
        self.grid = grid
        pr = grid.primal
        self.bidx, self.bval = bc.normal_fluxes(grid)
        scale = max(1.0, float(np.sum(np.abs(self.bval))))
        net = bc.net_outflow(grid)
        if abs(net) > COMPATIBILITY_TOL * scale:
            raise InconsistentBoundaryError(
                f"boundary normal fluxes violate mass balance: net outflow {net:.3e}")
        self.interior = ~pr.boundary_edges
        self.diff = {w: diffusive_operator(grid, w, mu, bc.velocity) for w in DIRECTIONS}
        self.bp = {}
        self.pp = {}
        for w in DIRECTIONS:
            P, b = pressure_force(grid, w, bc.pressure, bc.pressure_faces)
            self.pp[w], self.bp[w] = P, b
        # control-volume balance operators: rows = primal edges of direction w
        self.balance = {w: (operators.merge[w] @ operators.d21s[w]).tocsr() for w in DIRECTIONS}
        self.viscous = {w: (-self.diff[w].gradient @ operators.pm[w]).tocsr() for w in DIRECTIONS}

    def initial_flux(self) -> np.ndarray:
        u0 = np.zeros(self.grid.primal.n_edges)
        u0[self.bidx] = self.bval
        return u0

    def _edge_rows(self):
        """Rows of the primal-edge block: momentum balance or boundary identity."""
        grid, pr = self.grid, self.grid.primal
        E, C = pr.n_edges, pr.n_cells
        mask_b = sp.diags(pr.boundary_edges.astype(float))
        mask_i = sp.diags(self.interior.astype(float))
        blocks_z, rows_p, rhs = {}, [], np.zeros(E)
        for w in DIRECTIONS:
            edges = grid.momentum_edges(w)
            sel = sp.csr_matrix((np.ones(len(edges)), (edges, np.arange(len(edges)))),
                                shape=(E, len(edges)))
            rows = mask_i @ sel @ self.balance[w]
            blocks_z[w] = rows
            rows_p.append(rows @ self.pp[w])
            rhs -= rows @ self.bp[w]
        rhs[self.bidx] = self.bval
        return mask_b, sum(rows_p), blocks_z, rhs

    def assemble(self, transport: np.ndarray | None, convection: bool = True,
                 gauge: bool = True) -> LinearSystem:
        ops, grid, pr = self.ops, self.grid, self.grid.primal
        E, C = pr.n_edges, pr.n_cells
        ru, rp, rz, rhs_e = self._edge_rows()
        nz = {w: grid.staggered[w].n_edges for w in DIRECTIONS}
        zu, zz, rhs_z = {}, {}, {}
        for w in DIRECTIONS:
            k = self.viscous[w]
            if convection and transport is not None:
                k = k + ops.convection[w].assemble(transport) @ ops.pm[w]
            zu[w] = -k
            zz[w] = ops.m11[w]
            rhs_z[w] = -self.diff[w].boundary
        blocks = [
            [ru, rp, rz["x"], rz["y"]],
            [ops.d21, None, None, None],
            [zu["x"], None, zz["x"], None],
            [zu["y"], None, None, zz["y"]],
        ]
        A = sp.bmat(blocks, format="csr", dtype=float)
        b = np.concatenate([rhs_e, np.zeros(C), rhs_z["x"], rhs_z["y"]])
        system = LinearSystem(A, b, E, C, nz, gauged=False)
        return fix_pressure_gauge(system) if gauge else system


def assemble_steady_system(operators: OperatorSet, transport, bc: BoundaryCondition,
                           mu: float, convection: bool = True, gauge: bool = True) -> LinearSystem:
    """Linear saddle system for one Picard iterate with frozen transport velocity."""
    values = transport.values if isinstance(transport, Cochain) else transport
    return SteadyProblem(operators, bc, mu).assemble(values, convection, gauge)


def fix_pressure_gauge(system: LinearSystem) -> LinearSystem:
    """Append a zero-mean pressure row and its multiplier column.

    The multiplier enters every continuity row, which removes the one
    redundant continuity equation of a pure velocity-boundary problem.
    """
    if system.gauged:
        return system
    E, C = system.n_edges, system.n_cells
    A = system.matrix.tocsr()
    n = A.shape[0]
    col = np.zeros(n)
    col[E:E + C] = 1.0
    row = np.zeros(n + 1)
    row[E:E + C] = 1.0
    # insert the multiplier right after the pressure block
    top = A[:E + C]
    bottom = A[E + C:]
    left = sp.hstack([top[:, :E + C], sp.csr_matrix(col[:E + C, None]), top[:, E + C:]])
    right = sp.hstack([bottom[:, :E + C], sp.csr_matrix((n - E - C, 1)), bottom[:, E + C:]])
    A2 = sp.vstack([left, sp.csr_matrix(row[None, :]), right], format="csr")
    b2 = np.concatenate([system.rhs[:E + C], [0.0], system.rhs[E + C:]])
    return LinearSystem(A2, b2, E, C, system.n_aux, gauged=True)


def _linear_solve(system: LinearSystem, strategy: str) -> np.ndarray:
    A = system.matrix.tocsc()
    try:
        if strategy == "spsolve":
            x = spla.spsolve(A, system.rhs)
        else:
            x = spla.splu(A, permc_spec="MMD_ATA").solve(system.rhs)
    except RuntimeError as exc:
        raise SolverError(f"linear system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite values")
    return x


def _rel_inf(a, ref):
    scale = np.max(np.abs(ref)) if np.size(ref) else 0.0
    num = np.max(np.abs(a)) if np.size(a) else 0.0
    return num / scale if scale > 0 else num


def solve_steady(grid: GridComplex, operators: OperatorSet, bc: BoundaryCondition,
                 config: SolverConfig, problem: SteadyProblem | None = None) -> FlowState:
    """Picard iteration with under-relaxation to a steady state.

    The first solve replaces the initial iterate outright (the zero
    extension of the boundary fluxes is not divergence free); later
    iterates are relaxed.  Each iterate is a convex combination of exactly
    divergence-free solutions, so continuity holds to round-off throughout.
    """
    problem = problem or SteadyProblem(operators, bc, config.mu)
    pr = grid.primal
    u = problem.initial_flux()
    lam = 0.0
    state = FlowState(grid, Cochain(u, pr, EDGE), Cochain(np.zeros(pr.n_cells), pr, CELL), {})
    for it in range(1, config.max_iter + 1):
        system = problem.assemble(u, convection=config.convection)
        x = _linear_solve(system, config.linear_solver)
        sl = system.slices
        u_new, p_new, lam = x[sl["u"]], x[sl["p"]], float(x[sl["lambda"]][0])
        theta = 1.0 if it == 1 else config.relax
        u_next = theta * u_new + (1.0 - theta) * u
        # pressure is the multiplier of the latest solve; relaxing it would
        # keep stale contributions from earlier transport fields
        p = p_new
        delta = _rel_inf(u_next - u, u_next)
        u = u_next
        state.residual_history.append(delta)
        state.mass_history.append(_rel_inf(pr.d21 @ u, u))
        state.iterations = it
        logger.debug("picard %d: delta=%.3e", it, delta)
        if not config.convection or (it > 1 and delta < config.tol) or np.max(np.abs(u)) == 0.0:
            state.converged = True
            break
    state.u = Cochain(u, pr, EDGE)
    state.p = Cochain(p, pr, CELL)
    state.m = {w: operators.pm[w] @ u for w in DIRECTIONS}
    state.multiplier = lam
    if not state.converged:
        logger.warning("Picard iteration did not converge in %d iterations (last delta %.3e)",
                       config.max_iter, state.residual_history[-1])
    return state


@dataclass
class MomentumResidual:
    """Net momentum flux out of each interior control volume of one direction."""

    residual: np.ndarray
    convective: np.ndarray
    pressure: np.ndarray
    viscous: np.ndarray

    @property
    def scale(self) -> float:
        return max(np.max(np.abs(a), initial=0.0)
                   for a in (self.convective, self.pressure, self.viscous))

    @property
    def relative(self) -> float:
        s = self.scale
        r = np.max(np.abs(self.residual), initial=0.0)
        return r / s if s > 0 else r


def momentum_residual(state: FlowState, operators: OperatorSet, bc: BoundaryCondition,
                      mu: float, convection: bool = True,
                      problem: SteadyProblem | None = None) -> dict:
    """``D21~ (F + H - T)`` summed over each interior momentum control volume."""
    problem = problem or SteadyProblem(operators, bc, mu)
    u, p = state.u.values, state.p.values
    out = {}
    for w in DIRECTIONS:
        m = operators.pm[w] @ u
        if convection:
            F = operators.m11_solve(w, operators.convection[w].assemble(u) @ m)
        else:
            F = np.zeros(operators.m11[w].shape[0])
        T = problem.diff[w].traction(m, solve=lambda r, w=w: operators.m11_solve(w, r))
        H = problem.pp[w] @ p + problem.bp[w]
        rows = problem.balance[w]
        keep = problem.interior[operators.grid.momentum_edges(w)]
        f, h, t = (rows @ F)[keep], (rows @ H)[keep], (rows @ T)[keep]
        out[w] = MomentumResidual(f + h - t, f, h, t)
    return out
