"""Exact solutions, error norms, convergence studies and the cavity benchmark."""

from __future__ import annotations

import hashlib
import logging
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .mesh_topology import DomainSpec, GridComplex, build_grid
from .operators import CELL, POINT, Cochain, build_operators, reconstruct
from .poly_basis import gauss_nodes
from .solver import BoundaryCondition, FlowState, SolverConfig, SolverError, solve_steady

logger = logging.getLogger(__name__)

# one period in y, centred on the axis of the wake
KOVASZNAY_DOMAIN = ((-0.5, 1.0), (-0.5, 0.5))
KOVASZNAY_NU = 1.0 / 40.0

CAVITY_REFERENCE_FILE = "botella_peyret_re1000.txt"
CAVITY_REFERENCE_SHA256 = "77894b9d431faa6de242e102befe6f95630ada6300cef1fded729f839300222c"

STREAMFUNCTION_CONTINUITY_TOL = 1e-8


@dataclass(frozen=True)
class KovasznayParams:
    nu: float = KOVASZNAY_NU

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"viscosity must be positive, got {self.nu}")

    @property
    def lam(self) -> float:
        return 1.0 / (2.0 * self.nu) - math.sqrt(1.0 / (4.0 * self.nu**2) + 4.0 * math.pi**2)


def kovasznay_exact(x, y, params: KovasznayParams = KovasznayParams()):
    """Velocity and pressure ``(u, v, p)`` of the Kovasznay wake."""
    lam = params.lam
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ex = np.exp(lam * x)
    u = 1.0 - ex * np.cos(2.0 * np.pi * y)
    v = lam / (2.0 * np.pi) * ex * np.sin(2.0 * np.pi * y)
    p = 0.5 * (1.0 - np.exp(2.0 * lam * x))
    return u, v, p


def kovasznay_velocity(params: KovasznayParams = KovasznayParams()):
    def velocity(x, y):
        u, v, _ = kovasznay_exact(x, y, params)
        return u, v
    return velocity


def kovasznay_pressure(params: KovasznayParams = KovasznayParams()):
    return lambda x, y: kovasznay_exact(x, y, params)[2]


def kovasznay_boundary(params: KovasznayParams = KovasznayParams()) -> BoundaryCondition:
    return BoundaryCondition(kovasznay_velocity(params))


def cavity_boundary(lid_velocity: float = -1.0) -> BoundaryCondition:
    """Unit-square cavity; the corners belong to the moving lid."""
    def velocity(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        u = np.where(y >= 1.0, lid_velocity, 0.0) + 0.0 * x
        return u, np.zeros_like(u)
    return BoundaryCondition(velocity)


# --------------------------------------------------------------------------
# Error norms


def _domain_rule(grid: GridComplex, nquad: int):
    """Tensor Gauss rule over every element: points ``(X, Y)`` and weights."""
    rule = gauss_nodes(nquad)
    pts, wts = [], []
    for axis in (grid.xp, grid.yp):
        b = axis.breaks
        half = 0.5 * np.diff(b)
        pts.append((b[:-1, None] + half[:, None] * (rule.nodes[None, :] + 1.0)).ravel())
        wts.append((half[:, None] * rule.weights[None, :]).ravel())
    X, Y = np.meshgrid(pts[0], pts[1])
    W = np.outer(wts[1], wts[0])
    return X.ravel(), Y.ravel(), W.ravel()


def l2_error(state: FlowState, velocity, pressure=None, nquad: int | None = None):
    """L2 norms of the velocity and mean-aligned pressure errors.

    ``pressure`` may be None, in which case the pressure error is NaN.
    The integration uses ``p + 3`` Gauss points per element direction.
    """
    grid = state.grid
    X, Y, W = _domain_rule(grid, nquad or grid.order + 3)
    uh, vh = reconstruct(state.u, X, Y)
    ue, ve = velocity(X, Y)
    ev = math.sqrt(float(np.sum(W * ((uh - ue) ** 2 + (vh - ve) ** 2))))
    if pressure is None:
        return ev, float("nan")
    ph = reconstruct(state.p, X, Y)
    pe = np.broadcast_to(np.asarray(pressure(X, Y), dtype=float), X.shape)
    area = float(np.sum(W))
    dp = (ph - np.sum(W * ph) / area) - (pe - np.sum(W * pe) / area)
    return ev, math.sqrt(float(np.sum(W * dp**2)))


# --------------------------------------------------------------------------
# Convergence studies


@dataclass
class ConvergenceRow:
    nel_x: int
    nel_y: int
    order: int
    dofs: int
    err_v: float
    err_p: float
    seconds: float = 0.0
    converged: bool = True
    iterations: int = 0

    @property
    def h(self) -> float:
        return 1.0 / max(self.nel_x, self.nel_y)


@dataclass
class ConvergenceReport:
    case: str
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def rates(self, attr: str = "err_v") -> list:
        """Pairwise rates against the previous row, None across a change of order."""
        out = [None]
        for a, b in zip(self.rows, self.rows[1:]):
            ea, eb = getattr(a, attr), getattr(b, attr)
            if a.order != b.order or a.h == b.h or not (ea > 0 and eb > 0):
                out.append(None)
            else:
                out.append(math.log(ea / eb) / math.log(a.h / b.h))
        return out

    def fitted_rate(self, attr: str = "err_v") -> float:
        """Least-squares slope of log(error) against log(h) over all rows."""
        h = np.array([r.h for r in self.rows])
        e = np.array([getattr(r, attr) for r in self.rows])
        slope = np.polyfit(np.log(h), np.log(e), 1)[0]
        return float(slope)

    def errors(self, attr: str = "err_v") -> np.ndarray:
        return np.array([getattr(r, attr) for r in self.rows])


def solve_kovasznay(nel_x: int, nel_y: int, order: int,
                    params: KovasznayParams = KovasznayParams(),
                    config: SolverConfig | None = None,
                    domain=KOVASZNAY_DOMAIN) -> FlowState:
    grid = build_grid(DomainSpec(domain[0], domain[1], nel_x, nel_y, order))
    ops = build_operators(grid)
    config = config or SolverConfig(mu=params.nu)
    return solve_steady(grid, ops, kovasznay_boundary(params), config)


def run_convergence(sweep, params: KovasznayParams = KovasznayParams(),
                    config: SolverConfig | None = None,
                    domain=KOVASZNAY_DOMAIN) -> ConvergenceReport:
    """Solve the Kovasznay problem for every ``(nel_x, nel_y, order)`` in ``sweep``.

    A row whose Picard iteration fails to converge is kept and flagged.
    """
    sweep = list(sweep)
    if not sweep:
        raise ValueError("convergence sweep is empty")
    config = config or SolverConfig(mu=params.nu)
    report = ConvergenceReport("kovasznay")
    vel, pres = kovasznay_velocity(params), kovasznay_pressure(params)
    for nx, ny, p in sweep:
        t0 = time.perf_counter()
        try:
            state = solve_kovasznay(nx, ny, p, params, config, domain)
        except SolverError as exc:
            logger.error("kovasznay %dx%d p=%d failed: %s", nx, ny, p, exc)
            report.rows.append(ConvergenceRow(nx, ny, p, 0, float("nan"), float("nan"),
                                              time.perf_counter() - t0, False))
            continue
        ev, ep = l2_error(state, vel, pres)
        pr = state.grid.primal
        report.rows.append(ConvergenceRow(nx, ny, p, pr.n_edges + pr.n_cells, ev, ep,
                                          time.perf_counter() - t0, state.converged,
                                          state.iterations))
        logger.info("kovasznay %dx%d p=%d: err_v=%.3e err_p=%.3e (%d its)",
                    nx, ny, p, ev, ep, state.iterations)
    return report


# --------------------------------------------------------------------------
# Lid-driven cavity


class ReferenceDataError(ValueError):
    pass


@dataclass(frozen=True)
class CavityReference:
    """Centerline profiles ``u(0.5, y)`` and ``v(x, 0.5)`` for a lid moving with ``u = lid``."""

    y: np.ndarray
    u: np.ndarray
    x: np.ndarray
    v: np.ndarray
    source: str
    lid: float = 1.0

    @classmethod
    def load(cls, path=None, verify: bool = True) -> "CavityReference":
        if path is None:
            raw = resources.files("mimeticns.data").joinpath(CAVITY_REFERENCE_FILE).read_bytes()
        else:
            raw = Path(path).read_bytes()
            verify = verify and Path(path).name == CAVITY_REFERENCE_FILE
        if verify and hashlib.sha256(raw).hexdigest() != CAVITY_REFERENCE_SHA256:
            raise ReferenceDataError("cavity reference data checksum mismatch")
        return cls.parse(raw.decode("utf-8"))

    @classmethod
    def parse(cls, text: str) -> "CavityReference":
        sections = {"u": [], "v": []}
        header, current = [], None
        for lineno, line in enumerate(text.splitlines(), 1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                header.append(s.lstrip("# "))
                continue
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip()
                if current not in sections:
                    raise ReferenceDataError(f"line {lineno}: unknown section {current!r}")
                continue
            if current is None:
                raise ReferenceDataError(f"line {lineno}: data before any section")
            parts = s.split()
            if len(parts) != 2:
                raise ReferenceDataError(f"line {lineno}: expected two columns")
            sections[current].append((float(parts[0]), float(parts[1])))
        source = next((h.split(":", 1)[1].strip() for h in header
                       if h.lower().startswith("source:")), "")
        if not source:
            raise ReferenceDataError("reference data header does not name its source")
        if not sections["u"] or not sections["v"]:
            raise ReferenceDataError("reference data needs both [u] and [v] sections")
        u = np.array(sorted(sections["u"]))
        v = np.array(sorted(sections["v"]))
        return cls(u[:, 0], u[:, 1], v[:, 0], v[:, 1], source)

    def for_lid(self, lid: float) -> "CavityReference":
        """Profiles for another lid velocity.

        A negative lid is the mirror image in ``x -> 1 - x`` of a positive
        one, so ``u`` changes sign and ``v`` is read at ``1 - x``.
        """
        s = abs(lid / self.lid)
        if lid * self.lid > 0:
            return CavityReference(self.y, s * self.u, self.x, s * self.v, self.source, lid)
        order = np.argsort(1.0 - self.x)
        return CavityReference(self.y, -s * self.u, (1.0 - self.x)[order], s * self.v[order],
                               self.source, lid)


@dataclass
class CavityResult:
    state: FlowState
    reference: CavityReference
    u_center: np.ndarray
    v_center: np.ndarray
    seconds: float = 0.0

    @property
    def u_deviation(self) -> np.ndarray:
        return self.u_center - self.reference.u

    @property
    def v_deviation(self) -> np.ndarray:
        return self.v_center - self.reference.v

    def max_deviation(self) -> float:
        """Largest centerline deviation as a fraction of the lid speed."""
        d = np.concatenate([self.u_deviation, self.v_deviation])
        return float(np.max(np.abs(d)) / abs(self.reference.lid))

    def rms_deviation(self) -> float:
        d = np.concatenate([self.u_deviation, self.v_deviation])
        return float(np.sqrt(np.mean(d**2)) / abs(self.reference.lid))


def centerlines(state: FlowState, y, x):
    """``u(0.5, y)`` and ``v(x, 0.5)`` of the reconstructed velocity."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    u, _ = reconstruct(state.u, np.full_like(y, 0.5), y)
    _, v = reconstruct(state.u, x, np.full_like(x, 0.5))
    return u, v


def run_cavity(re: float = 1000.0, nel: tuple = (4, 4), order: int = 6,
               lid_velocity: float = -1.0, config: SolverConfig | None = None,
               reference: CavityReference | None = None, convection: bool = True) -> CavityResult:
    """Steady cavity flow with viscosity ``1 / re`` on the unit square."""
    if not re > 0:
        raise ValueError(f"Reynolds number must be positive, got {re}")
    t0 = time.perf_counter()
    grid = build_grid(DomainSpec((0.0, 1.0), (0.0, 1.0), nel[0], nel[1], order))
    ops = build_operators(grid)
    if config is None:
        config = SolverConfig(mu=abs(lid_velocity) / re, convection=convection, max_iter=400)
    state = solve_steady(grid, ops, cavity_boundary(lid_velocity), config)
    if not state.converged:
        raise SolverError(f"cavity Picard iteration did not converge in {state.iterations} steps")
    ref = (reference or CavityReference.load()).for_lid(lid_velocity)
    u, v = centerlines(state, ref.y, ref.x)
    return CavityResult(state, ref, u, v, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# Streamfunction


def streamfunction(state: FlowState) -> Cochain:
    """Point values of ``psi`` with ``u = dpsi/dy``, ``v = -dpsi/dx``.

    ``psi`` is zero at the lower-left corner; it is summed along the bottom
    row and then up every column of primal edges.
    """
    pr = state.grid.primal
    flux = state.u.values
    scale = max(float(np.max(np.abs(flux), initial=0.0)), 1.0)
    resid = float(np.max(np.abs(pr.d21 @ flux), initial=0.0))
    if resid > STREAMFUNCTION_CONTINUITY_TOL * scale:
        raise SolverError(f"fluxes are not divergence free (residual {resid:.3e}); "
                          "no streamfunction exists")
    nx, ny = pr.nx, pr.ny
    U = flux[:pr.n_xnormal].reshape(ny, nx + 1)
    V = flux[pr.n_xnormal:].reshape(ny + 1, nx)
    psi = np.zeros((ny + 1, nx + 1))
    psi[0, 1:] = -np.cumsum(V[0])
    psi[1:] = psi[0] + np.cumsum(U, axis=0)
    return Cochain(psi.ravel(), pr, POINT)


def pressure_density(state: FlowState, x, y) -> np.ndarray:
    return reconstruct(Cochain(state.p.values, state.grid.primal, CELL), x, y)
