"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``.  The expensive solves are
shared through module-scoped fixtures.
"""

import time

import numpy as np
import pytest

from mimeticns.cli import main
from mimeticns.mesh_topology import DomainSpec, build_grid
from mimeticns.operators import EDGE, build_operators, mass_matrices, reduce
from mimeticns.solver import (BoundaryCondition, SolverConfig, SteadyProblem, momentum_residual,
                              solve_steady)
from mimeticns.verification import (KOVASZNAY_DOMAIN, KOVASZNAY_NU, CavityReference,
                                    CavityResult, KovasznayParams, cavity_boundary, centerlines,
                                    kovasznay_boundary, run_convergence)

from oracles import Element

TIGHT_TOL = 1e-12


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def solve_case(case):
    if case == "kovasznay":
        (xr, yr), nel, mu = KOVASZNAY_DOMAIN, (2, 2), KOVASZNAY_NU
        bc = kovasznay_boundary(KovasznayParams(mu))
    else:
        xr, yr, nel, mu = (0.0, 1.0), (0.0, 1.0), (4, 4), 1e-3
        bc = cavity_boundary(-1.0)
    g = build_grid(DomainSpec(xr, yr, nel[0], nel[1], 6))
    ops = build_operators(g)
    prob = SteadyProblem(ops, bc, mu)
    t0 = time.perf_counter()
    st = solve_steady(g, ops, bc, SolverConfig(mu=mu, tol=TIGHT_TOL, max_iter=400), prob)
    return dict(state=st, ops=ops, bc=bc, mu=mu, problem=prob, seconds=time.perf_counter() - t0)


@pytest.fixture(scope="module")
def kovasznay_run():
    return solve_case("kovasznay")


@pytest.fixture(scope="module")
def cavity_run():
    return solve_case("cavity")


# ---------------------------------------------------------------------------


def test_criterion_1_mass_conservation(kovasznay_run, cavity_run, capsys):
    worst = {}
    for name, run in (("kovasznay", kovasznay_run), ("cavity", cavity_run)):
        worst[name] = max(run["state"].mass_history)
    ok = all(v <= 1e-12 for v in worst.values())
    report(capsys, 1, ok, "max_iterates ||D21 u||/||u|| " +
           ", ".join(f"{k} {v:.2e}" for k, v in worst.items()) + " (limit 1e-12)")
    assert ok


def test_criterion_2_momentum_balance(kovasznay_run, cavity_run, capsys):
    rel = {}
    for name, run in (("kovasznay", kovasznay_run), ("cavity", cavity_run)):
        assert run["state"].converged
        res = momentum_residual(run["state"], run["ops"], run["bc"], run["mu"],
                                problem=run["problem"])
        for w in "xy":
            rel[f"{name}-{w}"] = res[w].relative
    ok = all(v <= 1e-10 for v in rel.values())
    report(capsys, 2, ok, "relative interior residuals " +
           ", ".join(f"{k} {v:.2e}" for k, v in rel.items()) + " (limit 1e-10)")
    assert ok


def test_criterion_3_structure(capsys):
    from mimeticns.operators import diffusive_operator, momentum_projection, pressure_force
    failures = []
    for nx, ny, p in [(1, 1, 1), (2, 3, 2), (3, 2, 4), (2, 2, 6)]:
        g = build_grid(DomainSpec((0, 1), (0, 1), nx, ny, p))
        for cx in (g.primal, g.staggered["x"], g.staggered["y"]):
            if np.any((cx.d21 @ cx.d10_outer).toarray()) or np.any((cx.d21_inner @ cx.d10).toarray()):
                failures.append(f"dd!=0 {nx}x{ny} p{p}")
            for m in (cx.d10, cx.d21):
                if not set(np.unique(m.toarray())) <= {-1, 0, 1}:
                    failures.append(f"incidence entries {nx}x{ny} p{p}")
    for p in range(1, 9):
        m11, m22, _ = mass_matrices(build_grid(DomainSpec((0, 1), (0, 1), 2, 2, p)))
        for m in (m11["x"], m11["y"], m22["x"], m22["y"]):
            d = m.toarray()
            if np.max(np.abs(d - d.T)) > 1e-13 or np.min(np.linalg.eigvalsh(d)) <= 0:
                failures.append(f"not SPD p{p}")
    worst = 0.0
    xr, yr = (-0.5, 1.0), (0.25, 1.5)
    for p in (1, 2, 3):
        g = build_grid(DomainSpec(xr, yr, 1, 1, p))
        el = Element(p, xr, yr)
        m11, m22, _ = mass_matrices(g)
        for w in "xy":
            pairs = [(m11[w], el.m11(w)), (m22[w], el.m22(w)),
                     (momentum_projection(g, w), el.momentum_projection(w)),
                     (pressure_force(g, w)[0], el.pressure_force(w)),
                     (diffusive_operator(g, w, 1.0).gradient, -el.divergence_pairing(w))]
            for a, b in pairs:
                worst = max(worst, float(np.max(np.abs(a.toarray() - b))))
    if worst > 1e-11:
        failures.append(f"oracle mismatch {worst:.2e}")
    ok = not failures
    report(capsys, 3, ok, f"dd=0, incidence in {{-1,0,1}}, SPD p<=8, oracle max diff {worst:.1e}"
           + ("" if ok else f"; failures: {failures}"))
    assert ok


@pytest.fixture(scope="module")
def p_sweep():
    return run_convergence([(2, 2, p) for p in (2, 4, 6, 8, 10)])


@pytest.fixture(scope="module")
def h_sweep():
    return run_convergence([(n, n, 2) for n in (1, 2, 4, 8)])


def test_criterion_4_p_convergence(p_sweep, capsys):
    e = p_sweep.errors()
    ok = all(r.converged for r in p_sweep.rows)
    ratios = []
    for a, b in zip(e[:-1], e[1:]):
        if a < 1e-8:
            break  # floor reached
        ratios.append(b / a)
        ok = ok and b < a and b / a < 0.5
    report(capsys, 4, ok, "errors " + " ".join(f"{x:.2e}" for x in e) + "; ratios "
           + " ".join(f"{r:.3f}" for r in ratios) + " (limit < 0.5)")
    assert ok


def test_criterion_5_h_convergence(h_sweep, capsys):
    e = h_sweep.errors()
    fitted = h_sweep.fitted_rate()
    finest = h_sweep.rates()[-1]
    monotone = bool(np.all(np.diff(e) < 0))
    ok = monotone and abs(fitted - finest) <= 0.3 and all(r.converged for r in h_sweep.rows)
    report(capsys, 5, ok, "errors " + " ".join(f"{x:.3e}" for x in e)
           + f"; best-fit rate {fitted:.3f}, finest-pair rate {finest:.3f}, "
           f"difference {abs(fitted - finest):.3f} (limit 0.3)")
    assert ok


def test_criterion_6_cavity(cavity_run, capsys):
    st = cavity_run["state"]
    ref = CavityReference.load().for_lid(-1.0)
    u, v = centerlines(st, ref.y, ref.x)
    res = CavityResult(st, ref, u, v, cavity_run["seconds"])
    dev = res.max_deviation()
    ok = st.converged and dev <= 0.02 and cavity_run["seconds"] <= 600
    report(capsys, 6, ok, f"max centerline deviation {100 * dev:.2f}% of lid speed "
           f"(u {100 * np.max(np.abs(res.u_deviation)):.2f}%, "
           f"v {100 * np.max(np.abs(res.v_deviation)):.2f}%; limit 2%), "
           f"{st.iterations} Picard iterations in {cavity_run['seconds']:.0f} s (limit 600 s)")
    assert ok


def test_criterion_7_invariants(capsys):
    worst_fs, worst_lin = 0.0, 0.0
    for nx in (1, 2, 3):
        for ny in (1, 2, 3):
            for p in (1, 2, 3, 4):
                g = build_grid(DomainSpec((0.0, 2.0), (-0.5, 0.5), nx, ny, p))
                ops = build_operators(g)
                bc = BoundaryCondition(lambda x, y: (1.3 + 0 * x, -0.4 + 0 * y))
                s = solve_steady(g, ops, bc, SolverConfig(mu=0.05))
                exact = reduce(bc.velocity, g.primal, EDGE).values
                worst_fs = max(worst_fs, np.max(np.abs(s.u.values - exact)),
                               np.max(np.abs(s.p.values)))
                rot = BoundaryCondition(lambda x, y: (np.sin(np.pi * x) * np.cos(np.pi * y),
                                                      -np.cos(np.pi * x) * np.sin(np.pi * y)))
                cfg = SolverConfig(mu=0.3, convection=False)
                base = solve_steady(g, ops, rot, cfg)
                scaled = solve_steady(g, ops, rot.scaled(-2.5), cfg)
                scale = max(1.0, np.max(np.abs(base.u.values)), np.max(np.abs(base.p.values)))
                worst_lin = max(worst_lin,
                                np.max(np.abs(scaled.u.values + 2.5 * base.u.values)) / scale,
                                np.max(np.abs(scaled.p.values + 2.5 * base.p.values)) / scale)
    ok = worst_fs <= 1e-10 and worst_lin <= 1e-11
    report(capsys, 7, ok, f"free-stream max deviation {worst_fs:.1e} (limit 1e-10), "
           f"Stokes linearity max deviation {worst_lin:.1e} (limit 1e-11)")
    assert ok


def test_criterion_8_determinism(tmp_path, capsys):
    runs = {
        "p-sweep": ["convergence", "--sweep", "p", "--nel", "2", "2",
                    "--orders", "2", "4", "6", "8", "10"],
        "h-sweep": ["convergence", "--sweep", "h", "--order", "2", "--nels", "1", "2", "4", "8"],
        "cavity": ["cavity-bench"],
    }
    mismatched, compared = [], 0
    for name, argv in runs.items():
        outs = []
        for k in range(2):
            d = tmp_path / f"{name}-{k}"
            rc = main(argv + ["-o", str(d), "--lattice", "41"])
            assert rc == 0, f"{name} exited with {rc}"
            outs.append(d)
        for f in sorted(outs[0].glob("*.csv")):
            compared += 1
            if f.read_bytes() != (outs[1] / f.name).read_bytes():
                mismatched.append(f"{name}/{f.name}")
    ok = not mismatched and compared > 0
    report(capsys, 8, ok, f"{compared} CSV files compared across repeated runs"
           + ("" if ok else f"; differing: {mismatched}"))
    assert ok
