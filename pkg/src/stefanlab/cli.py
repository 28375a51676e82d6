"""Command-line front end.

    stefanlab solve    --config run.cfg --out results/
    stefanlab sweep    --config visc.cfg --out results/
    stefanlab l1sweep  --config l1.cfg --out results/
    stefanlab verify   --out results/
    stefanlab trunclab --config trunc.cfg --out results/

Exit status: 0 ok, 2 invalid config, 3 solver failure, 4 failed acceptance
check. ``STEFANLAB_WORKERS`` sets the number of worker processes used for
sweep points (default 1).
"""

import argparse
import hashlib
import json
import math
from pathlib import Path
import platform
import sys

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, RunConfig, build_newton, build_problem, check, l1_sweep_for, seed_stream
from .errors import NumericalError
from .harness import SweepResult, equicontinuity_modulus, estimate_report, minty_diagnostic, viscosity_sweep
from .io import write_json, write_trajectory
from .solver import ViscosityParam, solve

__all__ = ["run", "main", "EXIT_OK", "EXIT_VALIDATION", "EXIT_SOLVER", "EXIT_ACCEPTANCE"]

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 2, 3, 4

COMMANDS = {
    "solve": "solve",
    "sweep": "visc_sweep",
    "l1sweep": "l1_sweep",
    "verify": "verify",
    "trunclab": "trunclab",
}


def _spec_digest(spec):
    h = hashlib.sha256()
    h.update(json.dumps(spec.nl.to_config(), sort_keys=True).encode())
    h.update(json.dumps([list(spec.grid.lengths), list(spec.grid.cells)]).encode())
    h.update(json.dumps([spec.partition.horizon, spec.partition.steps]).encode())
    h.update(spec.initial.values.tobytes())
    for m in range(spec.partition.steps + 1):
        h.update(spec.source_values(m).tobytes())
    return h.hexdigest()


def _n_label(n):
    return "inf" if math.isinf(n) else f"{n:g}"


def _run_solve(cfg, out, meta):
    spec = build_problem(cfg)
    meta["spec_sha256"] = _spec_digest(spec)
    meta["warnings"] += list(spec.warnings)
    visc = ViscosityParam(cfg["visc.n"])
    traj = solve(spec, visc, build_newton(cfg))
    write_trajectory(out / "trajectory", traj)
    rep = estimate_report(traj, spec, visc, cfg["exponents.r"], cfg["exponents.k"], seed_stream(cfg, "probes"))
    rep_dict = rep.to_dict()
    rep_dict["equicontinuity_modulus"] = equicontinuity_modulus(traj) if spec.partition.steps >= 2 else None
    write_json(out / "report.json", {"mode": "solve", "report": rep_dict})
    single = SweepResult([visc.n], [rep], [], {})
    (out / "sweep.csv").write_text(single.to_csv())
    return EXIT_OK


def _write_sweep(out, sweep, label, extra):
    for i, (a, traj) in enumerate(zip(sweep.axis, sweep.trajectories)):
        if traj is not None:
            write_trajectory(out / "trajectories" / f"{i:02d}_{label}{_n_label(a)}", traj)
    data = sweep.to_dict()
    data.update(extra)
    write_json(out / "report.json", data)
    (out / "sweep.csv").write_text(sweep.to_csv())


def _run_visc_sweep(cfg, out, meta):
    spec = build_problem(cfg)
    meta["spec_sha256"] = _spec_digest(spec)
    meta["warnings"] += list(spec.warnings)
    sweep = viscosity_sweep(
        spec, cfg["sweep.n"], build_newton(cfg), cfg["exponents.r"], cfg["exponents.k"], seed_stream(cfg, "probes")
    )
    ref = sweep.trajectories[-1]
    ks = list(cfg["exponents.k"]) or [1.0]
    minty = {}
    if ref is not None:
        for k in ks:
            minty[str(k)] = [
                None if t is None else minty_diagnostic(t, ref, spec.nl, k).theta_l1 for t in sweep.trajectories
            ]
    equi = [None if t is None else equicontinuity_modulus(t) for t in sweep.trajectories]
    _write_sweep(out, sweep, "n", {"mode": "visc_sweep", "minty_theta_l1": minty, "equicontinuity_modulus": equi})
    return EXIT_SOLVER if sweep.failures else EXIT_OK


def _run_l1_sweep(cfg, out, meta):
    spec = build_problem(cfg)
    meta["spec_sha256"] = _spec_digest(spec)
    sweep = l1_sweep_for(cfg, spec, seed=seed_stream(cfg, "probes"))
    _write_sweep(out, sweep, "level", {"mode": "l1_sweep"})
    return EXIT_SOLVER if sweep.failures else EXIT_OK


def _run_verify(cfg, out, meta):
    from .verify import run_criteria

    results = run_criteria(cfg["verify.criteria"])
    for res in results.values():
        print(res.summary())
    data = {
        "mode": "verify",
        "passed": all(r.passed for r in results.values()),
        "criteria": [r.to_dict() for r in results.values()],
    }
    # wall-clock timings would break byte-identical reruns
    for c in data["criteria"]:
        c.pop("seconds")
    write_json(out / "report.json", data)
    return EXIT_OK if data["passed"] else EXIT_ACCEPTANCE


def _run_trunclab(cfg, out, meta):
    from .mesh import Grid, GridFunction
    from .trunclab import check_strong_truncation_lemma, counterexample_report

    rep = counterexample_report(tuple(cfg["trunclab.n"]), cfg["trunclab.amplitude_exp"], tuple(cfg["trunclab.k"]))
    # a strongly convergent family v + noise/j, for the p > 1 chain
    rng = np.random.default_rng(seed_stream(cfg, "families"))
    grid = Grid.uniform(1, 1000)
    v = GridFunction(grid, np.sin(np.pi * grid.coordinates()[0]))
    noise = rng.uniform(-1, 1, size=grid.size)
    family = [GridFunction(grid, v.values + noise / j) for j in (1, 2, 4, 8, 16)]
    p = max(cfg["exponents.p"], default=2.0)
    strong = check_strong_truncation_lemma(family, v, p, tuple(cfg["trunclab.k"]), (1.5,) if p > 1.5 else ())
    data = rep.to_dict()
    data["mode"] = "trunclab"
    data["strong_lemma"] = strong.to_dict()
    write_json(out / "report.json", data)
    return EXIT_OK


_RUNNERS = {
    "solve": _run_solve,
    "visc_sweep": _run_visc_sweep,
    "l1_sweep": _run_l1_sweep,
    "verify": _run_verify,
    "trunclab": _run_trunclab,
}


def run(config, out_dir=None):
    """Validate, execute and persist one run; returns the exit status."""
    errors, warnings = check(config)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(out_dir if out_dir is not None else config["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "mode": config.mode,
        "config_text": config.to_text(),
        "config": config.resolved(),
        "config_sha256": config.digest(),
        "versions": {
            "stefanlab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "warnings": list(warnings),
    }
    try:
        status = _RUNNERS[config.mode](config, out, meta)
    except ConfigError as exc:
        meta["errors"] = exc.problems
        status = EXIT_VALIDATION
    except (NumericalError, OSError) as exc:
        meta["errors"] = [f"{type(exc).__name__}: {exc}"]
        status = EXIT_SOLVER
    meta["status"] = status
    meta["artifacts"] = sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file() and p.name != "manifest.json")
    write_json(out / "manifest.json", meta)
    for e in meta.get("errors", []):
        print(f"error: {e}", file=sys.stderr)
    return status


def main(argv=None):
    parser = argparse.ArgumentParser(prog="stefanlab", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, mode in COMMANDS.items():
        p = sub.add_parser(name, help=f"run in {mode} mode")
        p.add_argument("--config", help="key = value config file, or a manifest.json from an earlier run")
        p.add_argument("--out", help="output directory (overrides output_dir)")
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig({})
    except (OSError, ConfigError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    mode = COMMANDS[args.command]
    if "mode" in cfg.values and cfg.mode != mode:
        print(f"warning: config mode {cfg.mode!r} overridden by command {args.command!r}", file=sys.stderr)
    cfg = cfg.replace(mode=mode)
    return run(cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
