"""Flat ``key = value`` run configuration with dotted section names.

Values are Python literals (numbers, strings, lists, tuples); bare words
and ``inf`` are accepted. ``#`` starts a comment.

    mode = visc_sweep
    grid.dim = 1
    grid.cells = 256
    sweep.n = [1, 4, 16, 64, 256]
"""

import ast
from dataclasses import dataclass
import hashlib
import json
import math
from pathlib import Path
import re

import numpy as np

from .mesh import Grid, GridFunction, TimePartition
from .nonlinear import Nonlinearity
from .solver import (
    MANUFACTURED,
    NewtonConfig,
    ProblemSpec,
    ViscosityParam,
    dirac_approx,
    eigen_field,
    manufactured_source,
)

__all__ = ["RunConfig", "ConfigError", "parse_text", "validate", "check", "build_problem", "seed_stream", "MODES"]

MODES = ("solve", "visc_sweep", "l1_sweep", "verify", "trunclab")

DEFAULTS = {
    "mode": "solve",
    "seed": 0,
    "output_dir": "out",
    "grid.dim": 1,
    "grid.cells": 64,
    "grid.length": 1.0,
    "time.horizon": 0.1,
    "time.steps": 64,
    "phi.kind": "stefan",
    "phi.plateau": (0.0, 1.0),
    "phi.slope": 1.0,
    "phi.breakpoints": None,
    "phi.lipschitz": None,
    "phi.z0": None,
    "phi.z1": None,
    "initial": "zero",
    "initial.amplitude": 1.0,
    "source": "zero",
    "source.amplitude": 1.0,
    "visc.n": math.inf,
    "sweep.n": [1, 4, 16, 64, 256],
    "sweep.levels": [0, 1, 2, 3],
    "sweep.n_fixed": math.inf,
    "sweep.center": None,
    "sweep.width0": 0.1,
    "sweep.ratio": 2.0,
    "sweep.mass": 1.0,
    "sweep.role": "initial",
    "exponents.r": [],
    "exponents.k": [],
    "exponents.p": [],
    "newton.tol": 1e-10,
    "newton.max_iter": 50,
    "newton.damping": 0.5,
    "trunclab.amplitude_exp": 1.0,
    "trunclab.n": [10, 100, 1000],
    "trunclab.k": [0.5, 1.0, 2.0],
    "verify.criteria": [1, 2, 3, 4, 5, 6, 7, 8],
}

# named streams split from the single config seed
SEED_STREAMS = {"probes": 0, "families": 1}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def _literal(text):
    text = text.strip()
    if text in ("inf", "+inf", "infinity"):
        return math.inf
    if text in ("none", "None", "null"):
        return None
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _strip_comment(line):
    quote = None
    for i, ch in enumerate(line):
        if quote:
            quote = None if ch == quote else quote
        elif ch in "'\"":
            quote = ch
        elif ch == "#":
            return line[:i]
    return line


def parse_text(text, source="<config>"):
    """Parse config text into a flat dict; duplicate keys are an error."""
    out, problems = {}, []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = _strip_comment(line).strip()
        if not body:
            continue
        if "=" not in body:
            problems.append(f"{source}:{lineno}: expected 'key = value'")
            continue
        key, value = (s.strip() for s in body.split("=", 1))
        if not re.fullmatch(r"[A-Za-z_][\w]*(\.[A-Za-z_][\w]*)*", key):
            problems.append(f"{source}:{lineno}: bad key {key!r}")
            continue
        if key in out:
            problems.append(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = _literal(value)
    if problems:
        raise ConfigError(problems)
    return out


def _dump_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, str):
        return v if re.fullmatch(r"[\w.:\-/]+", v) and _literal(v) == v else repr(v)
    return repr(v)


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass(frozen=True)
class RunConfig:
    """Explicitly set entries (``values``) layered over ``DEFAULTS``."""

    values: dict

    @classmethod
    def from_text(cls, text, source="<config>"):
        return cls(parse_text(text, source))

    @classmethod
    def load(cls, path):
        """Read a config file, or the config echoed inside a run's ``manifest.json``."""
        p = Path(path)
        text = p.read_text()
        if p.suffix == ".json":
            return cls.from_text(json.loads(text)["config_text"], str(p))
        return cls.from_text(text, str(p))

    def __getitem__(self, key):
        if key in self.values:
            return self.values[key]
        return DEFAULTS[key]

    def get(self, key, default=None):
        return self.values.get(key, DEFAULTS.get(key, default))

    def replace(self, **updates):
        vals = dict(self.values)
        for k, v in updates.items():
            vals[k.replace("__", ".")] = v
        return RunConfig(vals)

    def to_text(self):
        return "".join(f"{k} = {_dump_value(self.values[k])}\n" for k in sorted(self.values))

    def resolved(self):
        """Every key with its effective value, JSON-ready."""
        keys = sorted(set(DEFAULTS) | set(self.values))
        return {k: _jsonable(self[k]) for k in keys}

    def digest(self):
        return hashlib.sha256(json.dumps(self.resolved(), sort_keys=True).encode()).hexdigest()

    @property
    def mode(self):
        return self["mode"]


def seed_stream(config, name):
    """Independent ``SeedSequence`` for one named consumer of randomness."""
    return np.random.SeedSequence(int(config["seed"]), spawn_key=(SEED_STREAMS[name],))


# -- validation -----------------------------------------------------------------


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _num_list(v):
    return isinstance(v, (list, tuple)) and all(_is_num(x) for x in v)


_DIRAC = re.compile(r"dirac_approx\((.*)\)$")


def _parse_dirac(text, dim):
    args = ast.literal_eval("(" + _DIRAC.match(text).group(1) + ",)")
    if len(args) != 3:
        raise ValueError("dirac_approx takes (center, width, mass)")
    center, width, mass = args
    center = tuple(np.broadcast_to(np.asarray(center, float), (dim,)))
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")
    return center, float(width), float(mass)


def _field_id_problem(key, text, dim, kind):
    if not isinstance(text, str):
        return f"{key}: expected an id string, got {text!r}"
    if text in ("zero", "eigen"):
        return None
    if text.startswith("manufactured:"):
        name = text.split(":", 1)[1]
        if name not in MANUFACTURED:
            return f"{key}: unknown manufactured solution {name!r}; choose from {sorted(MANUFACTURED)}"
        return None
    if _DIRAC.match(text):
        try:
            _parse_dirac(text, dim)
        except (ValueError, SyntaxError, TypeError) as exc:
            return f"{key}: bad dirac_approx arguments: {exc}"
        return None
    if kind == "initial" and text.startswith("file:"):
        return None if Path(text[5:]).exists() else f"{key}: file {text[5:]!r} not found"
    if kind == "source" and text.startswith("files:"):
        return None if Path(text[6:]).is_dir() else f"{key}: directory {text[6:]!r} not found"
    return f"{key}: unrecognized id {text!r}"


def _nonlinearity_problems(cfg):
    kind = cfg["phi.kind"]
    if kind == "stefan":
        plateau, slope = cfg["phi.plateau"], cfg["phi.slope"]
        if not (_num_list(plateau) and len(plateau) == 2 and plateau[0] <= 0 <= plateau[1]):
            return [f"phi.plateau: need (a, b) with a <= 0 <= b, got {plateau!r}"]
        if not (_is_num(slope) and slope > 0):
            return [f"phi.slope: must be positive, got {slope!r}"]
        return []
    if kind == "linear":
        slope = cfg["phi.slope"]
        return [] if _is_num(slope) and slope > 0 else [f"phi.slope: must be positive, got {slope!r}"]
    if kind == "breakpoints":
        bp = cfg["phi.breakpoints"]
        if not isinstance(bp, (list, tuple)) or not all(isinstance(p, (list, tuple)) and len(p) == 2 for p in bp):
            return [f"phi.breakpoints: need a list of (s, phi(s)) pairs, got {bp!r}"]
        return [
            f"phi: {msg}"
            for msg in Nonlinearity.violations(bp, cfg["phi.lipschitz"], cfg["phi.z0"], cfg["phi.z1"])
        ]
    return [f"phi.kind: expected stefan, linear or breakpoints, got {kind!r}"]


def check(config):
    """Return ``(errors, warnings)``; a run starts only when ``errors`` is empty."""
    cfg = config
    errors, warnings = [], []
    for key in sorted(cfg.values):
        if key not in DEFAULTS:
            errors.append(f"{key}: unknown key")
    if cfg.mode not in MODES:
        errors.append(f"mode: expected one of {', '.join(MODES)}, got {cfg.mode!r}")
    if not (isinstance(cfg["seed"], int) and cfg["seed"] >= 0):
        errors.append(f"seed: must be a nonnegative integer, got {cfg['seed']!r}")
    dim, cells = cfg["grid.dim"], cfg["grid.cells"]
    if dim not in (1, 2):
        errors.append(f"grid.dim: must be 1 or 2, got {dim!r}")
        dim = 1
    if isinstance(cells, int) and not isinstance(cells, bool):
        cells = [cells] * dim
    if not (isinstance(cells, (list, tuple)) and len(cells) == dim and all(isinstance(c, int) and c >= 2 for c in cells)):
        errors.append(f"grid.cells: need integers >= 2 (one or one per axis), got {cfg['grid.cells']!r}")
    length = cfg["grid.length"]
    if not ((_is_num(length) and 0 < length < math.inf) or (_num_list(length) and len(length) == dim and min(length) > 0)):
        errors.append(f"grid.length: must be positive, got {length!r}")
    T, M = cfg["time.horizon"], cfg["time.steps"]
    if not (_is_num(T) and 0 < T < math.inf):
        errors.append(f"time.horizon: must be positive and finite, got {T!r}")
    if not (isinstance(M, int) and M >= 1):
        errors.append(f"time.steps: must be a positive integer, got {M!r}")
    errors += _nonlinearity_problems(cfg)
    for key, kind in (("initial", "initial"), ("source", "source")):
        msg = _field_id_problem(key, cfg[key], dim, kind)
        if msg:
            errors.append(msg)
    for key in ("initial.amplitude", "source.amplitude"):
        if not _is_num(cfg[key]):
            errors.append(f"{key}: must be a number, got {cfg[key]!r}")
    if not (_is_num(cfg["visc.n"]) and cfg["visc.n"] > 0):
        errors.append(f"visc.n: must be positive (inf disables viscosity), got {cfg['visc.n']!r}")
    tol, it, damp = cfg["newton.tol"], cfg["newton.max_iter"], cfg["newton.damping"]
    if not (_is_num(tol) and tol > 0):
        errors.append(f"newton.tol: must be positive, got {tol!r}")
    if not (isinstance(it, int) and it >= 1):
        errors.append(f"newton.max_iter: must be an integer >= 1, got {it!r}")
    if not (_is_num(damp) and 0 < damp < 1):
        errors.append(f"newton.damping: must lie in (0, 1), got {damp!r}")
    for key in ("exponents.r", "exponents.k", "exponents.p"):
        if not _num_list(cfg[key]):
            errors.append(f"{key}: must be a list of numbers, got {cfg[key]!r}")
    if _num_list(cfg["exponents.r"]):
        if any(r < 1 for r in cfg["exponents.r"]):
            errors.append("exponents.r: entries must be >= 1")
        threshold = math.inf if dim == 1 else dim / (dim - 1)
        for r in cfg["exponents.r"]:
            if r >= threshold:
                warnings.append(f"exponents.r: r={r} is above d/(d-1) threshold ({threshold:g}); reported, not bounded")
    if _num_list(cfg["exponents.k"]) and any(k <= 0 for k in cfg["exponents.k"]):
        errors.append("exponents.k: truncation levels must be positive")
    if cfg.mode == "visc_sweep":
        ns = cfg["sweep.n"]
        if not (_num_list(ns) and len(ns) >= 3 and min(ns) > 0 and all(b > a for a, b in zip(ns, ns[1:]))):
            errors.append(f"sweep.n: need >= 3 strictly increasing positive values, got {ns!r}")
    if cfg.mode == "l1_sweep":
        lv = cfg["sweep.levels"]
        if not (_num_list(lv) and len(lv) >= 2 and all(b > a for a, b in zip(lv, lv[1:]))):
            errors.append(f"sweep.levels: need >= 2 strictly increasing values, got {lv!r}")
        if cfg["sweep.role"] not in ("initial", "source"):
            errors.append(f"sweep.role: expected initial or source, got {cfg['sweep.role']!r}")
        if not (_is_num(cfg["sweep.width0"]) and cfg["sweep.width0"] > 0):
            errors.append("sweep.width0: must be positive")
        if not (_is_num(cfg["sweep.ratio"]) and cfg["sweep.ratio"] > 1):
            errors.append("sweep.ratio: must exceed 1")
        if not (_is_num(cfg["sweep.n_fixed"]) and cfg["sweep.n_fixed"] > 0):
            errors.append("sweep.n_fixed: must be positive")
    if cfg.mode == "trunclab":
        ns = cfg["trunclab.n"]
        if not (isinstance(ns, (list, tuple)) and ns and all(isinstance(n, int) and n >= 2 for n in ns)):
            errors.append(f"trunclab.n: need integers >= 2, got {ns!r}")
        if not _num_list(cfg["trunclab.k"]) or any(k <= 0 for k in cfg["trunclab.k"]):
            errors.append("trunclab.k: need positive truncation levels")
        if not _is_num(cfg["trunclab.amplitude_exp"]):
            errors.append("trunclab.amplitude_exp: must be a number")
    if cfg.mode == "verify":
        crit = cfg["verify.criteria"]
        if not (isinstance(crit, (list, tuple)) and all(c in range(1, 9) for c in crit)):
            errors.append(f"verify.criteria: entries must be in 1..8, got {crit!r}")
    return errors, warnings


def validate(config):
    """List of violations; empty iff the run would start."""
    return check(config)[0]


# -- building problems ----------------------------------------------------------


def build_grid(cfg):
    dim, cells, length = cfg["grid.dim"], cfg["grid.cells"], cfg["grid.length"]
    cells = (cells,) * dim if isinstance(cells, int) else tuple(cells)
    lengths = (float(length),) * dim if _is_num(length) else tuple(length)
    return Grid(lengths, cells)


def build_nonlinearity(cfg):
    kind = cfg["phi.kind"]
    if kind == "stefan":
        return Nonlinearity.stefan(tuple(cfg["phi.plateau"]), cfg["phi.slope"])
    if kind == "linear":
        return Nonlinearity.linear(cfg["phi.slope"])
    return Nonlinearity(tuple(map(tuple, cfg["phi.breakpoints"])), cfg["phi.z0"], cfg["phi.z1"], cfg["phi.lipschitz"])


def build_newton(cfg):
    return NewtonConfig(tol=cfg["newton.tol"], max_iter=cfg["newton.max_iter"], damping=cfg["newton.damping"])


def _field_from_id(text, grid, amplitude):
    if text == "zero":
        return np.zeros(grid.size)
    if text == "eigen":
        return amplitude * eigen_field(grid)
    if _DIRAC.match(text):
        return dirac_approx(grid, *_parse_dirac(text, grid.dim))
    if text.startswith("file:"):
        from .io import read_bin, read_csv

        path = text[5:]
        return (read_csv if path.endswith(".csv") else read_bin)(path, grid).values
    raise ValueError(f"unsupported field id {text!r}")


def build_problem(cfg, visc=None):
    """ProblemSpec from a validated config; ``visc`` only matters for manufactured sources."""
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    grid = build_grid(cfg)
    part = TimePartition(cfg["time.horizon"], cfg["time.steps"])
    nl = build_nonlinearity(cfg)
    visc = ViscosityParam(cfg["visc.n"]) if visc is None else visc
    init_id, src_id = cfg["initial"], cfg["source"]
    notes = ()
    manufactured = None
    if src_id.startswith("manufactured:"):
        manufactured = manufactured_source(MANUFACTURED[src_id.split(":", 1)[1]], nl, visc, grid, part)
        source, notes = manufactured.fields, manufactured.warnings
    elif src_id.startswith("files:"):
        from .io import read_sources

        source = read_sources(src_id[6:], grid, part)
    elif src_id == "zero":
        source = None
    else:
        row = _field_from_id(src_id, grid, cfg["source.amplitude"])
        source = np.tile(row, (part.steps + 1, 1))
    if init_id.startswith("manufactured:"):
        u_star = MANUFACTURED[init_id.split(":", 1)[1]]
        init = np.asarray(u_star.value(0.0, *grid.coordinates())) * np.ones(grid.size)
    else:
        init = _field_from_id(init_id, grid, cfg["initial.amplitude"])
    return ProblemSpec(grid, part, nl, GridFunction(grid, init), source, src_id, tuple(notes))


def dirac_family(cfg, grid):
    from .harness import DiracFamily

    center = cfg["sweep.center"]
    if center is None:
        center = tuple(0.5 * L for L in grid.lengths)
    return DiracFamily(tuple(np.broadcast_to(np.asarray(center, float), (grid.dim,))), cfg["sweep.mass"], cfg["sweep.width0"], cfg["sweep.ratio"], cfg["sweep.role"])


def l1_sweep_for(cfg, spec, seed=None, workers=None):
    """Run the configured Dirac-approximation sweep on ``spec``."""
    from .harness import l1_data_sweep

    base_f, base_u0 = dirac_family(cfg, spec.grid).sweep_data()
    return l1_data_sweep(
        base_f,
        base_u0,
        cfg["sweep.levels"],
        spec,
        cfg["sweep.n_fixed"],
        build_newton(cfg),
        cfg["exponents.r"],
        cfg["exponents.k"],
        seed=0 if seed is None else seed,
        workers=workers,
    )
