"""On-disk formats for grid functions, trajectories and per-step sources.

Binary files hold an 8-byte little-endian unsigned count followed by that
many little-endian float64 values.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .errors import StructuralError
from .mesh import Grid, GridFunction, TimePartition, Trajectory

__all__ = [
    "write_csv",
    "read_csv",
    "write_bin",
    "read_bin",
    "write_trajectory",
    "read_trajectory",
    "write_sources",
    "read_sources",
    "grid_to_dict",
    "grid_from_dict",
    "write_json",
]

_COUNT = np.dtype("<u8")
_VALUE = np.dtype("<f8")


def grid_to_dict(grid):
    return {"lengths": list(grid.lengths), "cells": list(grid.cells)}


def grid_from_dict(data):
    return Grid(tuple(data["lengths"]), tuple(data["cells"]))


def _plain(obj):
    # strict JSON: numpy scalars to Python, non-finite floats to strings
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, data):
    """Deterministic strict JSON: sorted keys, fixed indent, trailing newline."""
    Path(path).write_text(json.dumps(_plain(data), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _values(g):
    return g.values if isinstance(g, GridFunction) else np.asarray(g, dtype=float).reshape(-1)


def write_csv(path, g):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "value"])
        for i, v in enumerate(_values(g)):
            w.writerow([i, repr(float(v))])


def read_csv(path, grid=None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["index", "value"]:
        raise StructuralError(f"{path}: expected header 'index,value'")
    body = rows[1:]
    idx = np.array([int(r[0]) for r in body])
    if not np.array_equal(idx, np.arange(idx.size)):
        raise StructuralError(f"{path}: indices must run 0..N-1 in order")
    values = np.array([float(r[1]) for r in body])
    return values if grid is None else GridFunction(grid, values)


def write_bin(path, g):
    v = _values(g)
    with open(path, "wb") as fh:
        fh.write(np.array([v.size], dtype=_COUNT).tobytes())
        fh.write(v.astype(_VALUE).tobytes())


def read_bin(path, grid=None):
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise StructuralError(f"{path}: missing count prefix")
    count = int(np.frombuffer(raw[:8], dtype=_COUNT)[0])
    if len(raw) != 8 + 8 * count:
        raise StructuralError(f"{path}: count prefix says {count} values, file holds {(len(raw) - 8) / 8:g}")
    values = np.frombuffer(raw[8:], dtype=_VALUE).astype(float)
    return values if grid is None else GridFunction(grid, values)


def write_trajectory(directory, traj):
    """One ``state_{m:06}.bin`` per state plus ``manifest.json``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    files = []
    for m, state in enumerate(traj.states):
        name = f"state_{m:06}.bin"
        write_bin(d / name, state)
        files.append(name)
    write_json(
        d / "manifest.json",
        {
            "grid": grid_to_dict(traj.grid),
            "partition": {"horizon": traj.partition.horizon, "steps": traj.partition.steps},
            "format": "u64le count + f64le values",
            "states": files,
        },
    )
    return d


def read_trajectory(directory):
    d = Path(directory)
    meta = json.loads((d / "manifest.json").read_text())
    grid = grid_from_dict(meta["grid"])
    part = TimePartition(meta["partition"]["horizon"], meta["partition"]["steps"])
    states = np.stack([read_bin(d / name) for name in meta["states"]])
    return Trajectory(grid, part, states)


def write_sources(directory, fields, first=1):
    """Write rows of ``fields`` as ``f_{m:06}.bin`` starting at index ``first``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for m, f in enumerate(fields, start=first):
        write_bin(d / f"f_{m:06}.bin", f)
    return d


def read_sources(directory, grid, partition):
    """Source array of shape ``(M+1, N)``; row 0 and missing steps are zero."""
    d = Path(directory)
    out = np.zeros((partition.steps + 1, grid.size))
    found = 0
    for m in range(partition.steps + 1):
        p = d / f"f_{m:06}.bin"
        if p.exists():
            out[m] = GridFunction(grid, read_bin(p)).values
            found += 1
    if not found:
        raise FileNotFoundError(f"no f_XXXXXX.bin files in {d}")
    return out
