import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimeticns.cli import UsageError, main, parse_cli
from mimeticns.config import (ConfigError, RunConfig, merge, parse_config, parse_config_text,
                              parse_value, serialize_config)
from mimeticns.mesh_topology import DomainSpec, build_grid
from mimeticns.operators import build_operators
from mimeticns.output import CONVERGENCE_HEADER, fmt, write_convergence, write_fields
from mimeticns.solver import BoundaryCondition, SolverConfig, solve_steady
from mimeticns.verification import ConvergenceReport, ConvergenceRow


# --- configuration ----------------------------------------------------------

def test_defaults():
    c = RunConfig()
    assert (c.nel_x, c.nel_y, c.order, c.tol, c.relax) == (2, 2, 6, 1e-10, 0.7)
    assert c.viscosity == pytest.approx(1 / 40)
    assert c.domain == ((-0.5, 1.0), (-0.5, 0.5))


def test_viscosity_from_reynolds():
    assert RunConfig(case="cavity", re=1000.0, lid_velocity=-2.0).viscosity == pytest.approx(2e-3)
    assert RunConfig(case="kovasznay", re=40.0).viscosity == pytest.approx(1 / 40)


@pytest.mark.parametrize("kw", [dict(case="pipe"), dict(order=0), dict(nu=-1.0),
                                dict(nu=0.1, re=10.0), dict(relax=0.0), dict(tol=0.0),
                                dict(x_min=1.0), dict(x_min=1.0, x_max=0.0), dict(orders=()),
                                dict(sweep="q"), dict(lattice=1)])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw)


def test_parse_config_text():
    d = parse_config_text("# comment\ncase = cavity\nnel_x=3 # trailing\n\norders = 2, 4\n")
    assert d == {"case": "cavity", "nel_x": 3, "orders": (2, 4)}
    with pytest.raises(ConfigError):
        parse_config_text("nonsense line\n")
    with pytest.raises(ConfigError):
        parse_config_text("colour = red\n")
    with pytest.raises(ConfigError):
        parse_value("order", "six")
    assert parse_value("nu", "none") is None
    assert parse_value("convection", "false") is False


@given(st.builds(RunConfig,
                 case=st.sampled_from(["kovasznay", "cavity", "custom"]),
                 nel_x=st.integers(1, 9), order=st.integers(1, 12),
                 nu=st.one_of(st.none(), st.floats(1e-6, 10.0)),
                 tol=st.floats(1e-14, 1e-2), relax=st.floats(0.01, 1.0),
                 lid_velocity=st.floats(-5, 5, allow_nan=False),
                 convection=st.booleans(),
                 orders=st.lists(st.integers(1, 20), min_size=1, max_size=6).map(tuple)))
@settings(max_examples=60, deadline=None)
def test_config_round_trip(cfg):
    assert parse_config(serialize_config(cfg)) == cfg


def test_merge_precedence():
    base = RunConfig()
    out = merge(base, {"order": 4, "nel_x": 3}, {"order": 8})
    assert out.order == 8 and out.nel_x == 3
    assert base.order == 6


def test_cli_precedence(tmp_path):
    cfgfile = tmp_path / "a.cfg"
    cfgfile.write_text("case = kovasznay\norder = 5\nnel_x = 3\nnu = 0.1\n")
    _, cfg, _ = parse_cli(["run", "--config", str(cfgfile), "--order", "7"])
    assert (cfg.order, cfg.nel_x, cfg.nu) == (7, 3, 0.1)
    _, cfg, _ = parse_cli(["run", "--config", str(cfgfile), "--re", "20"])
    assert cfg.nu is None and cfg.viscosity == pytest.approx(0.05)


def test_cli_examples():
    cmd, cfg, _ = parse_cli(["run", "--case", "kovasznay", "--nel", "2", "2", "--order", "6"])
    assert cmd == "run" and (cfg.nel_x, cfg.nel_y, cfg.order) == (2, 2, 6)
    cmd, cfg, _ = parse_cli(["convergence", "--sweep", "h", "--order", "2",
                             "--nels", "1", "2", "4", "8"])
    assert cfg.sweep == "h" and cfg.nels == (1, 2, 4, 8) and cfg.case == "kovasznay"
    cmd, cfg, _ = parse_cli(["cavity-bench"])
    assert cmd == "cavity-bench"
    assert (cfg.nel_x, cfg.nel_y, cfg.order, cfg.lid_velocity) == (4, 4, 6, -1.0)
    assert cfg.viscosity == pytest.approx(1e-3)
    _, cfg, _ = parse_cli(["run", "--case", "custom", "--free-stream", "2", "0.5", "--stokes",
                           "--domain", "0", "3", "0", "1"])
    assert (cfg.u_inf, cfg.v_inf, cfg.convection) == (2.0, 0.5, False)
    assert cfg.domain == ((0.0, 3.0), (0.0, 1.0))


@pytest.mark.parametrize("argv", [[], ["run"], ["run", "--case", "pipe"],
                                  ["run", "--case", "kovasznay", "--order", "0"],
                                  ["run", "--case", "kovasznay", "--nu", "1", "--re", "2"],
                                  ["convergence", "--sweep", "x"],
                                  ["run", "--config", "/nonexistent/file.cfg"]])
def test_usage_errors(argv):
    with pytest.raises(UsageError):
        parse_cli(argv)


# --- exit codes -------------------------------------------------------------

def test_exit_ok_custom(tmp_path, capsys):
    assert main(["run", "--case", "custom", "--nel", "2", "1", "--order", "2",
                 "-o", str(tmp_path), "--lattice", "5"]) == 0
    assert (tmp_path / "fields.csv").exists() and (tmp_path / "run.cfg").exists()
    assert "fields written" in capsys.readouterr().out


def test_exit_usage(capsys):
    assert main(["run"]) == 1
    assert "--case" in capsys.readouterr().err
    assert main(["--help"]) == 0


def test_exit_solver_failure(tmp_path, capsys):
    rc = main(["run", "--case", "kovasznay", "--nel", "2", "2", "--order", "3",
               "--max-iter", "2", "-o", str(tmp_path)])
    assert rc == 2
    assert "did not converge" in capsys.readouterr().err


def test_exit_inconsistent_custom_domain_is_fine(tmp_path):
    # a free stream is divergence free on any box
    assert main(["run", "--case", "custom", "--free-stream", "0", "1", "--nel", "1", "1",
                 "--order", "1", "-o", str(tmp_path), "--lattice", "3"]) == 0


def test_exit_io_bad_reference(tmp_path, capsys):
    ref = tmp_path / "ref.txt"
    ref.write_text("no source here\n")
    rc = main(["cavity-bench", "--re", "10", "--nel", "1", "1", "--order", "2",
               "--reference", str(ref), "-o", str(tmp_path)])
    assert rc == 3
    assert "reference" in capsys.readouterr().err


def test_exit_io_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    rc = main(["run", "--case", "custom", "--nel", "1", "1", "--order", "1",
               "-o", str(blocker / "sub")])
    assert rc == 3


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("MIMETICNS_OUTPUT_DIR", str(tmp_path / "envdir"))
    assert main(["run", "--case", "custom", "--nel", "1", "1", "--order", "1",
                 "--lattice", "3"]) == 0
    assert (tmp_path / "envdir" / "fields.csv").exists()


# --- output files -----------------------------------------------------------

def uniform_state(a=1.25, b=0.0):
    g = build_grid(DomainSpec((0, 2), (0, 1), 2, 1, 3))
    ops = build_operators(g)
    bc = BoundaryCondition(lambda x, y: (a + 0 * x, b + 0 * y))
    return solve_steady(g, ops, bc, SolverConfig(mu=0.1))


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, -2.5e-300, 12345678.9):
        assert float(fmt(x)) == x
    assert fmt(float("nan")) == "nan"


def test_write_fields_deterministic(tmp_path):
    s = uniform_state()
    a = write_fields(s, tmp_path / "a", 11)
    b = write_fields(s, tmp_path / "b", 11)
    names = sorted(p.name for p in a)
    assert names == sorted(p.name for p in b)
    assert {"fields.csv", "fields.vtk", "velocity_flux.csv"} <= set(names)
    for pa, pb in zip(sorted(a), sorted(b)):
        assert pa.read_bytes() == pb.read_bytes()
    rows = list(csv.DictReader(io.StringIO((tmp_path / "a" / "fields.csv").read_text())))
    assert len(rows) == 11 * 11
    u = np.array([float(r["u"]) for r in rows])
    np.testing.assert_allclose(u, 1.25, atol=1e-12)
    vtk = (tmp_path / "a" / "fields.vtk").read_text()
    assert vtk.startswith("# vtk DataFile Version") and "RECTILINEAR_GRID" in vtk


def test_write_convergence(tmp_path):
    rep = ConvergenceReport("k", [ConvergenceRow(1, 1, 2, 12, 1.0, 2.0, 0.5, True, 3),
                                  ConvergenceRow(2, 2, 2, 40, 0.25, 0.5, 0.7, True, 4)])
    path = write_convergence(rep, tmp_path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(CONVERGENCE_HEADER)
    first, second = lines[1].split(","), lines[2].split(",")
    assert first[6] == "" and first[7] == ""
    assert float(second[6]) == pytest.approx(2.0) and float(second[7]) == pytest.approx(2.0)
    # wall-clock time stays out of the table unless asked for
    assert first[-1] == "" and second[-1] == ""
    timed = write_convergence(rep, tmp_path, "timed.csv", include_seconds=True)
    assert float(timed.read_text().splitlines()[1].split(",")[-1]) == 0.5
    with pytest.raises(ValueError):
        write_convergence(ConvergenceReport("k"), tmp_path)
