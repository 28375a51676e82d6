import json
import math
from pathlib import Path

import numpy as np
import pytest

from stefanlab import verify
from stefanlab.cli import EXIT_ACCEPTANCE, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, main, run
from stefanlab.config import ConfigError, RunConfig, build_problem, check, parse_text, seed_stream, validate
from stefanlab.errors import StructuralError
from stefanlab.io import (
    read_bin,
    read_csv,
    read_sources,
    read_trajectory,
    write_bin,
    write_csv,
    write_json,
    write_sources,
    write_trajectory,
)
from stefanlab.mesh import Grid, GridFunction, TimePartition, Trajectory

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_SOLVE = """\
mode = solve
grid.cells = 16
time.horizon = 0.02
time.steps = 4
initial = eigen
initial.amplitude = 3.0
visc.n = 10
exponents.k = [1.0]
"""


# -- io -------------------------------------------------------------------------


def test_csv_and_bin_round_trip(tmp_path):
    grid = Grid.uniform(2, 5)
    g = GridFunction(grid, np.random.default_rng(0).standard_normal(grid.size) * 1e3)
    write_csv(tmp_path / "g.csv", g)
    write_bin(tmp_path / "g.bin", g)
    assert np.array_equal(read_csv(tmp_path / "g.csv", grid).values, g.values)
    assert np.array_equal(read_bin(tmp_path / "g.bin", grid).values, g.values)
    raw = (tmp_path / "g.bin").read_bytes()
    assert int.from_bytes(raw[:8], "little") == grid.size and len(raw) == 8 + 8 * grid.size


def test_csv_bad_header_and_bin_bad_count(tmp_path):
    (tmp_path / "bad.csv").write_text("i,v\n0,1.0\n")
    with pytest.raises(StructuralError, match="header"):
        read_csv(tmp_path / "bad.csv")
    (tmp_path / "bad.bin").write_bytes((3).to_bytes(8, "little") + b"\0" * 8)
    with pytest.raises(StructuralError, match="count"):
        read_bin(tmp_path / "bad.bin")


def test_trajectory_and_sources_round_trip(tmp_path):
    grid, part = Grid.uniform(1, 6), TimePartition(0.5, 3)
    states = np.random.default_rng(1).standard_normal((4, 6))
    traj = read_trajectory(write_trajectory(tmp_path / "traj", Trajectory(grid, part, states)))
    assert traj.grid == grid and traj.partition == part and np.array_equal(traj.states, states)
    write_sources(tmp_path / "src", states[1:])
    f = read_sources(tmp_path / "src", grid, part)
    assert np.all(f[0] == 0) and np.array_equal(f[1:], states[1:])


def test_write_json_is_strict(tmp_path):
    write_json(tmp_path / "x.json", {"b": math.inf, "a": np.float64(1.5), "c": [math.nan]})
    text = (tmp_path / "x.json").read_text()
    assert json.loads(text) == {"a": 1.5, "b": "inf", "c": ["nan"]}
    assert text.index('"a"') < text.index('"b"')


# -- config ---------------------------------------------------------------------


def test_parse_text_basics():
    vals = parse_text("a.b = [1, 2]  # comment\nc = inf\nd = 'x # y'\ne = eigen\n")
    assert vals == {"a.b": [1, 2], "c": math.inf, "d": "x # y", "e": "eigen"}
    with pytest.raises(ConfigError, match="duplicate"):
        parse_text("a = 1\na = 2\n")
    with pytest.raises(ConfigError, match="key = value"):
        parse_text("just words\n")


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.cfg")))
def test_shipped_configs_validate(name):
    errors, _ = check(RunConfig.load(CONFIGS / name))
    assert errors == []


def test_shipped_sweep_configs_match_verify():
    assert RunConfig.load(CONFIGS / "visc_sweep.cfg").values == RunConfig.from_text(verify.VISC_SWEEP_CONFIG).values
    assert RunConfig.load(CONFIGS / "l1_sweep.cfg").values == RunConfig.from_text(verify.L1_SWEEP_CONFIG).values


def test_validate_negative_slope_names_monotonicity():
    cfg = RunConfig.from_text("phi.kind = breakpoints\nphi.breakpoints = [(-1, 1), (0, 0), (1, 1)]\nphi.z0 = 1.0\nphi.z1 = 1.0\n")
    errors = validate(cfg)
    assert errors and any("monotonicity" in e for e in errors)
    assert all(e.startswith("phi") for e in errors)


def test_r_above_threshold_warns_not_errors():
    cfg = RunConfig.from_text("grid.dim = 2\nexponents.r = [1.5, 3.0]\n")
    errors, warnings = check(cfg)
    assert errors == []
    assert len(warnings) == 1 and "above d/(d-1) threshold" in warnings[0]


def test_unknown_key_and_bad_types_are_errors():
    errors = validate(RunConfig({"grid.cels": 10, "time.steps": 0, "visc.n": -1}))
    assert any(e.startswith("grid.cels") for e in errors)
    assert any(e.startswith("time.steps") for e in errors)
    assert any(e.startswith("visc.n") for e in errors)


def test_text_round_trip_and_seed_streams():
    cfg = RunConfig.load(CONFIGS / "solve.cfg")
    again = RunConfig.from_text(cfg.to_text())
    assert again.values == cfg.values and again.digest() == cfg.digest()
    assert seed_stream(cfg, "probes") != seed_stream(cfg, "families")


def test_build_problem_from_config():
    spec = build_problem(RunConfig.from_text(SMALL_SOLVE))
    assert spec.grid == Grid.uniform(1, 16)
    assert spec.partition == TimePartition(0.02, 4)
    assert np.max(spec.initial.values) == pytest.approx(3.0, rel=0.01)


# -- cli ------------------------------------------------------------------------


def test_solve_zero_data_reports_zeros(tmp_path):
    status = run(RunConfig.from_text("grid.cells = 8\ntime.steps = 3\nvisc.n = 5\n"), tmp_path)
    assert status == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())["report"]
    assert all(rep[k] == 0 for k in ("u_L2H10", "phi_u_L2H10", "dtu_L2Hm1", "visc_term"))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == 0 and "sweep.csv" in manifest["artifacts"]


def test_cli_invalid_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.dim = 3\n")
    assert main(["solve", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_VALIDATION
    assert "grid.dim" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "missing.cfg")]) == EXIT_VALIDATION


def test_cli_solver_failure_exit_code(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL_SOLVE + "newton.tol = 1e-300\nnewton.max_iter = 1\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_SOLVER
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["status"] == EXIT_SOLVER and "ConvergenceError" in manifest["errors"][0]


def test_cli_acceptance_failure_exit_code(tmp_path, monkeypatch):
    def failing(numbers):
        res = verify.CriterionResult(7, "forced")
        res.add("x", 1.0, 0.0, False)
        return {7: res}

    monkeypatch.setattr(verify, "run_criteria", failing)
    assert main(["verify", "--out", str(tmp_path)]) == EXIT_ACCEPTANCE
    assert json.loads((tmp_path / "report.json").read_text())["passed"] is False


def test_cli_rerun_from_manifest_is_byte_identical(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL_SOLVE)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["solve", "--config", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "b")]) == EXIT_OK
    for name in ("report.json", "sweep.csv", "manifest.json", "trajectory/state_000004.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_trunclab_verdicts(tmp_path):
    assert main(["trunclab", "--config", str(CONFIGS / "trunclab.cfg"), "--out", str(tmp_path / "a1")]) == EXIT_OK
    rep = json.loads((tmp_path / "a1" / "report.json").read_text())
    assert rep["weak_pairing_trend"] == "converging" and rep["l1_trunc_trend"] == "vanishing"
    assert rep["strong_lemma"]["chain_holds"]
    assert main(["trunclab", "--config", str(CONFIGS / "trunclab_cubic.cfg"), "--out", str(tmp_path / "a3")]) == EXIT_OK
    rep = json.loads((tmp_path / "a3" / "report.json").read_text())
    assert rep["weak_convergence_to_indicator"] == "fails"


def test_cli_small_visc_sweep(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(SMALL_SOLVE.replace("mode = solve", "mode = visc_sweep") + "sweep.n = [1, 10, 100]\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    out = tmp_path / "o"
    assert len(list((out / "trajectories").iterdir())) == 3
    rep = json.loads((out / "report.json").read_text())
    assert set(rep["minty_theta_l1"]) == {"1.0"} and len(rep["equicontinuity_modulus"]) == 3
    assert (out / "sweep.csv").read_text().count("\n") == 4
