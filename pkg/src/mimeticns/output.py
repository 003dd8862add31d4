"""CSV, cochain and legacy VTK writers.

Every number is written with 17 significant digits, so the files carry the
exact doubles and identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .operators import CELL, Cochain, reconstruct
from .solver import FlowState
from .verification import CavityResult, ConvergenceReport, streamfunction

CONVERGENCE_HEADER = ("nel_x", "nel_y", "p", "dofs", "err_v", "err_p", "rate_v", "rate_p",
                      "seconds")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> Path:
    # newline="" keeps "\n" line ends on every platform
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write(text)
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def sample_lattice(state: FlowState, n: int = 101):
    """``u, v, p, psi`` on an ``n x n`` uniform lattice, x varying fastest."""
    (x0, x1), (y0, y1) = state.grid.spec.x_range, state.grid.spec.y_range
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    X, Y = np.meshgrid(xs, ys)
    X, Y = X.ravel(), Y.ravel()
    u, v = reconstruct(state.u, X, Y)
    p = reconstruct(Cochain(state.p.values, state.grid.primal, CELL), X, Y)
    psi = reconstruct(streamfunction(state), X, Y)
    return xs, ys, {"x": X, "y": Y, "u": u, "v": v, "p": p, "psi": psi}


def _vtk_text(xs, ys, data) -> str:
    nx, ny = len(xs), len(ys)
    out = io.StringIO()
    out.write("# vtk DataFile Version 3.0\n")
    out.write("mimeticns steady flow fields\n")
    out.write("ASCII\n")
    out.write("DATASET RECTILINEAR_GRID\n")
    out.write(f"DIMENSIONS {nx} {ny} 1\n")
    out.write(f"X_COORDINATES {nx} double\n")
    out.write(" ".join(fmt(v) for v in xs) + "\n")
    out.write(f"Y_COORDINATES {ny} double\n")
    out.write(" ".join(fmt(v) for v in ys) + "\n")
    out.write("Z_COORDINATES 1 double\n0\n")
    out.write(f"POINT_DATA {nx * ny}\n")
    out.write("VECTORS velocity double\n")
    for a, b in zip(data["u"], data["v"]):
        out.write(f"{fmt(a)} {fmt(b)} 0\n")
    for name in ("p", "psi"):
        out.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        out.write("\n".join(fmt(v) for v in data[name]) + "\n")
    return out.getvalue()


def write_fields(state: FlowState, directory, lattice: int = 101) -> list:
    """Write lattice samples, cochain dumps and a legacy VTK file; return the paths."""
    d = _ensure_dir(directory)
    pr = state.grid.primal
    xs, ys, data = sample_lattice(state, lattice)
    names = ("x", "y", "u", "v", "p", "psi")
    paths = [_write(d / "fields.csv", _csv_text(names, zip(*(data[k] for k in names))))]

    seg = pr.edge_segments
    normals = ["x"] * pr.n_xnormal + ["y"] * pr.n_ynormal
    rows = ((k, normals[k], *seg[k], state.u.values[k]) for k in range(pr.n_edges))
    paths.append(_write(d / "velocity_flux.csv",
                        _csv_text(("edge", "normal", "x0", "y0", "x1", "y1", "flux"), rows)))
    ci, cj = pr._cell_ij
    X, Y = pr.ax.coords, pr.ay.coords
    rows = ((k, X[ci[k]], Y[cj[k]], X[ci[k] + 1], Y[cj[k] + 1], state.p.values[k])
            for k in range(pr.n_cells))
    paths.append(_write(d / "pressure_cells.csv",
                        _csv_text(("cell", "x0", "y0", "x1", "y1", "pressure_integral"), rows)))
    psi = streamfunction(state).values
    pts = pr.point_coords
    rows = ((k, pts[k, 0], pts[k, 1], psi[k]) for k in range(pr.n_points))
    paths.append(_write(d / "streamfunction_points.csv",
                        _csv_text(("point", "x", "y", "psi"), rows)))
    paths.append(_write(d / "fields.vtk", _vtk_text(xs, ys, data)))
    return paths


def convergence_rows(report: ConvergenceReport, include_seconds: bool = False):
    rv, rp = report.rates("err_v"), report.rates("err_p")
    for row, a, b in zip(report.rows, rv, rp):
        yield (row.nel_x, row.nel_y, row.order, row.dofs, row.err_v, row.err_p, a, b,
               row.seconds if include_seconds else None)


def write_convergence(report: ConvergenceReport, directory, name: str = "convergence.csv",
                      include_seconds: bool = False) -> Path:
    """One CSV row per sweep entry.

    ``seconds`` is left blank unless ``include_seconds`` is set, so that
    repeated runs produce byte-identical files.
    """
    if not report.rows:
        raise ValueError("convergence report is empty")
    d = _ensure_dir(directory)
    return _write(d / name, _csv_text(CONVERGENCE_HEADER,
                                      convergence_rows(report, include_seconds)))


def write_centerlines(result: CavityResult, directory, name: str = "centerlines.csv") -> Path:
    d = _ensure_dir(directory)
    ref = result.reference
    rows = [("u", y, c, r, c - r) for y, c, r in zip(ref.y, result.u_center, ref.u)]
    rows += [("v", x, c, r, c - r) for x, c, r in zip(ref.x, result.v_center, ref.v)]
    return _write(d / name, _csv_text(("component", "coordinate", "computed", "reference",
                                       "deviation"), rows))
