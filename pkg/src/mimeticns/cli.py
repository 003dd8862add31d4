"""Command-line driver: ``run``, ``convergence`` and ``cavity-bench``.

Values come from built-in defaults, then an optional ``--config`` file,
then explicit flags.  Exit codes: 0 success, 1 usage, 2 solver failure,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import (DEFAULT_OUTPUT_DIR, OUTPUT_DIR_ENV, ConfigError, RunConfig, load_config,
                     merge, serialize_config)
from .mesh_topology import DomainSpec, build_grid
from .operators import build_operators
from .output import write_centerlines, write_convergence, write_fields
from .solver import BoundaryCondition, SolverConfig, SolverError, solve_steady
from .verification import (CavityReference, KovasznayParams, ReferenceDataError,
                           cavity_boundary, kovasznay_boundary, kovasznay_pressure,
                           kovasznay_velocity, l2_error, run_cavity, run_convergence)

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("mimeticns")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = _Parser(add_help=False)
    common.add_argument("--config", default=S, help="key = value configuration file")
    common.add_argument("--nel", nargs=2, type=_positive_int, metavar=("NX", "NY"), default=S)
    common.add_argument("--order", type=_positive_int, default=S)
    visc = common.add_mutually_exclusive_group()
    visc.add_argument("--nu", type=_positive_float, default=S, help="kinematic viscosity")
    visc.add_argument("--re", type=_positive_float, default=S, help="Reynolds number")
    common.add_argument("--tol", type=_positive_float, default=S)
    common.add_argument("--max-iter", dest="max_iter", type=_positive_int, default=S)
    common.add_argument("--relax", type=_positive_float, default=S)
    common.add_argument("--output-dir", "-o", dest="output_dir", default=S,
                        help=f"defaults to ${OUTPUT_DIR_ENV} or {DEFAULT_OUTPUT_DIR}")
    common.add_argument("--lattice", type=_positive_int, default=S,
                        help="plot lattice points per direction (default 101)")
    common.add_argument("--timings", action="store_const", const=True, default=S,
                        help="record wall-clock seconds in tables (breaks byte reproducibility)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="mimeticns", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    run = sub.add_parser("run", parents=[common], help="solve one case and write field files")
    run.add_argument("--case", choices=("kovasznay", "cavity", "custom"), default=S)
    run.add_argument("--domain", nargs=4, type=float, metavar=("X0", "X1", "Y0", "Y1"),
                     default=S)
    run.add_argument("--lid-velocity", dest="lid_velocity", type=float, default=S)
    run.add_argument("--free-stream", nargs=2, type=float, metavar=("U", "V"), default=S)
    run.add_argument("--stokes", action="store_const", const=True, default=S,
                     help="drop the convective term")

    conv = sub.add_parser("convergence", parents=[common], help="Kovasznay convergence study")
    conv.add_argument("--sweep", choices=("p", "h"), default=S)
    conv.add_argument("--orders", nargs="+", type=_positive_int, default=S)
    conv.add_argument("--nels", nargs="+", type=_positive_int, default=S)
    conv.add_argument("--domain", nargs=4, type=float, metavar=("X0", "X1", "Y0", "Y1"),
                      default=S)

    cav = sub.add_parser("cavity-bench", parents=[common],
                         help="lid-driven cavity against the reference centerlines")
    cav.add_argument("--lid-velocity", dest="lid_velocity", type=float, default=S)
    cav.add_argument("--reference", default=S, help="alternative reference data file")
    return parser


def _flag_layer(ns: argparse.Namespace) -> dict:
    out = {}
    d = vars(ns)
    for key in ("order", "nu", "re", "tol", "max_iter", "relax", "output_dir", "lattice",
                "timings", "case", "sweep", "lid_velocity"):
        if key in d:
            out[key] = d[key]
    if "nel" in d:
        out["nel_x"], out["nel_y"] = d["nel"]
    if "domain" in d:
        out["x_min"], out["x_max"], out["y_min"], out["y_max"] = d["domain"]
    if "free_stream" in d:
        out["u_inf"], out["v_inf"] = d["free_stream"]
    if "stokes" in d:
        out["convection"] = False
    for key in ("orders", "nels"):
        if key in d:
            out[key] = tuple(d[key])
    if "re" in out:
        out["nu"] = None
    elif "nu" in out:
        out["re"] = None
    return out


def parse_cli(argv=None) -> tuple:
    """``(command, RunConfig, namespace)`` for ``argv``; raises :class:`UsageError`."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError(parser.format_usage() + "mimeticns: error: a subcommand is required")
    file_layer = {}
    if "config" in vars(ns):
        try:
            file_layer = load_config(ns.config)
        except (OSError, ConfigError) as exc:
            raise UsageError(f"mimeticns: error: bad config file: {exc}") from exc
    flags = _flag_layer(ns)
    if ns.command == "run" and "case" not in flags and "case" not in file_layer:
        raise UsageError(parser.format_usage() + "mimeticns run: error: --case is required")
    defaults = RunConfig()
    if ns.command == "cavity-bench":
        defaults = RunConfig(case="cavity", nel_x=4, nel_y=4, order=6, re=1000.0)
        file_layer = {**file_layer, "case": "cavity"}
    elif ns.command == "convergence":
        file_layer = {**file_layer, "case": "kovasznay"}
    layers = [file_layer, flags]
    # a viscosity given in a later layer replaces the other parametrisation
    for layer in layers:
        if layer.get("nu") is not None:
            layer.setdefault("re", None)
        if layer.get("re") is not None:
            layer.setdefault("nu", None)
    try:
        cfg = merge(defaults, *layers)
    except (ConfigError, TypeError) as exc:
        raise UsageError(f"mimeticns: error: {exc}") from exc
    return ns.command, cfg, ns


def _solver_config(cfg: RunConfig, convection: bool = True) -> SolverConfig:
    return SolverConfig(mu=cfg.viscosity, tol=cfg.tol, max_iter=cfg.max_iter, relax=cfg.relax,
                        convection=cfg.convection and convection)


def _grid(cfg: RunConfig):
    (x0, x1), (y0, y1) = cfg.domain
    grid = build_grid(DomainSpec((x0, x1), (y0, y1), cfg.nel_x, cfg.nel_y, cfg.order))
    return grid, build_operators(grid)


def cmd_run(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    grid, ops = _grid(cfg)
    if cfg.case == "kovasznay":
        params = KovasznayParams(cfg.viscosity)
        bc = kovasznay_boundary(params)
    elif cfg.case == "cavity":
        bc = cavity_boundary(cfg.lid_velocity)
    else:
        u0, v0 = cfg.u_inf, cfg.v_inf
        bc = BoundaryCondition(lambda x, y: (u0 + 0.0 * x, v0 + 0.0 * y))
    state = solve_steady(grid, ops, bc, _solver_config(cfg))
    if not state.converged:
        raise SolverError(f"Picard iteration did not converge in {state.iterations} steps")
    d = cfg.out_path
    write_fields(state, d, cfg.lattice)
    (d / "run.cfg").write_text(serialize_config(cfg))
    print(f"case {cfg.case}: {cfg.nel_x}x{cfg.nel_y} elements, p={cfg.order}, "
          f"nu={cfg.viscosity:.6g}, {state.iterations} Picard iterations", file=out)
    print(f"max |D21 u| = {max(state.mass_history):.3e} (relative)", file=out)
    if cfg.case == "kovasznay":
        ev, ep = l2_error(state, kovasznay_velocity(params), kovasznay_pressure(params))
        print(f"L2 velocity error {ev:.6e}, L2 pressure error {ep:.6e}", file=out)
    print(f"fields written to {d}", file=out)
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    if cfg.sweep == "p":
        sweep = [(cfg.nel_x, cfg.nel_y, p) for p in cfg.orders]
    else:
        sweep = [(n, n, cfg.order) for n in cfg.nels]
    params = KovasznayParams(cfg.viscosity)
    report = run_convergence(sweep, params, _solver_config(cfg), cfg.domain)
    path = write_convergence(report, cfg.out_path, include_seconds=cfg.timings)
    rates = report.rates()
    for row, r in zip(report.rows, rates):
        rate = "" if r is None else f"  rate {r:.3f}"
        flag = "" if row.converged else "  (not converged)"
        print(f"{row.nel_x}x{row.nel_y} p={row.order:<3d} err_v={row.err_v:.6e} "
              f"err_p={row.err_p:.6e}{rate}{flag}", file=out)
    if cfg.sweep == "h" and len(report) > 1:
        print(f"best-fit velocity rate {report.fitted_rate():.3f}", file=out)
    print(f"table written to {path}", file=out)
    return EXIT_OK if all(r.converged for r in report.rows) else EXIT_SOLVER


def cmd_cavity(cfg: RunConfig, reference_path=None, out=None) -> int:
    out = out or sys.stdout
    ref = CavityReference.load(reference_path)
    config = _solver_config(cfg)
    result = run_cavity(1.0 / cfg.viscosity * abs(cfg.lid_velocity), (cfg.nel_x, cfg.nel_y),
                        cfg.order, cfg.lid_velocity, config, ref)
    d = cfg.out_path
    write_centerlines(result, d)
    write_fields(result.state, d, cfg.lattice)
    print(f"cavity Re={abs(cfg.lid_velocity) / cfg.viscosity:.6g}: {cfg.nel_x}x{cfg.nel_y} "
          f"elements, p={cfg.order}, {result.state.iterations} Picard iterations", file=out)
    print(f"reference: {ref.source}", file=out)
    print(f"centerline deviation: max {100 * result.max_deviation():.3f}% "
          f"rms {100 * result.rms_deviation():.3f}% of lid speed", file=out)
    print(f"results written to {d}", file=out)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        command, cfg, ns = parse_cli(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if command == "run":
            return cmd_run(cfg)
        if command == "convergence":
            return cmd_convergence(cfg)
        return cmd_cavity(cfg, getattr(ns, "reference", None))
    except (SolverError, ValueError) as exc:
        if isinstance(exc, ReferenceDataError):
            print(f"mimeticns: reference data error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"mimeticns: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"mimeticns: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
