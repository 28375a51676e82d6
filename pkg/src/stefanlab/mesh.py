"""Uniform Dirichlet grids on boxes, grid functions, trajectories and norms.

Only interior nodes carry unknowns; the boundary value is implicitly zero.
Values of a grid function are stored flat in C order of the node index
tuple, so a 2D field reshapes to ``grid.cells`` with ``values.reshape``.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ._linalg import pcg, solve_tridiagonal
from .errors import NumericalError, StructuralError

__all__ = [
    "Grid",
    "GridFunction",
    "TimePartition",
    "Trajectory",
    "StepFields",
    "apply_laplacian",
    "norm_Lp",
    "seminorm_H10",
    "norm_Hminus1",
    "bochner_norm",
    "discrete_time_derivative",
    "laplacian_eigenvalue",
]

CG_RTOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid of ``prod(cells)`` interior nodes on ``[0, L_1] x ...``."""

    lengths: tuple
    cells: tuple

    def __post_init__(self):
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        cells = tuple(int(v) for v in np.atleast_1d(self.cells))
        if len(lengths) != len(cells) or len(cells) not in (1, 2):
            raise StructuralError(f"grid must be 1D or 2D, got lengths={lengths} cells={cells}")
        if any(c < 2 for c in cells):
            raise StructuralError(f"need at least 2 interior nodes per axis, got {cells}")
        if any(not (L > 0 and math.isfinite(L)) for L in lengths):
            raise StructuralError(f"axis lengths must be positive, got {lengths}")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def uniform(cls, dim, cells, length=1.0):
        return cls((length,) * dim, (cells,) * dim)

    @property
    def dim(self):
        return len(self.cells)

    @property
    def spacing(self):
        return tuple(L / (c + 1) for L, c in zip(self.lengths, self.cells))

    @property
    def size(self):
        return int(np.prod(self.cells))

    @property
    def cell_volume(self):
        """Quadrature weight ``h^d`` attached to every node."""
        return float(np.prod(self.spacing))

    @property
    def measure(self):
        return float(np.prod(self.lengths))

    def axes(self):
        return [h * np.arange(1, c + 1) for h, c in zip(self.spacing, self.cells)]

    def coordinates(self):
        """Node coordinates, one flat array per axis."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return [m.ravel() for m in mesh]

    def sample(self, func):
        """Evaluate ``func(*coords)`` at the interior nodes."""
        return np.asarray(func(*self.coordinates()), dtype=float) * np.ones(self.size)

    def check(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape[-1:] != (self.size,):
            raise StructuralError(
                f"expected trailing length {self.size} for grid {self.cells}, got shape {values.shape}"
            )
        return values

    # array-level operators; leading axes are batch axes

    def laplacian(self, values):
        """Second-difference approximation of ``-Laplace`` with zero extension."""
        values = self.check(values)
        batch = values.shape[:-1]
        u = values.reshape(batch + self.cells)
        out = np.zeros_like(u)
        for axis, h in enumerate(self.spacing):
            ax = len(batch) + axis
            padded = np.pad(u, [(0, 0)] * ax + [(1, 1)] + [(0, 0)] * (u.ndim - ax - 1))
            n = u.shape[ax]
            out += (
                2.0 * u
                - np.take(padded, range(0, n), axis=ax)
                - np.take(padded, range(2, n + 2), axis=ax)
            ) / h**2
        return out.reshape(values.shape)

    def gradient_energy(self, values):
        """Squared discrete H^1_0 seminorm along the last axis."""
        values = self.check(values)
        batch = values.shape[:-1]
        u = values.reshape(batch + self.cells)
        total = np.zeros(batch)
        vol = self.cell_volume
        sum_axes = tuple(range(len(batch), u.ndim))
        for axis, h in enumerate(self.spacing):
            ax = len(batch) + axis
            padded = np.pad(u, [(0, 0)] * ax + [(1, 1)] + [(0, 0)] * (u.ndim - ax - 1))
            diff = np.diff(padded, axis=ax)
            total = total + np.sum(diff**2, axis=sum_axes) * vol / h**2
        return total

    def inner(self, a, b):
        return np.sum(self.check(a) * self.check(b), axis=-1) * self.cell_volume

    def lp(self, values, p):
        values = self.check(values)
        if p == np.inf or p == "inf":
            return np.max(np.abs(values), axis=-1)
        p = float(p)
        if not p >= 1:
            raise ValueError(f"Lp exponent must be >= 1, got {p}")
        a = np.abs(values)
        if p == 1:
            return np.sum(a, axis=-1) * self.cell_volume
        if p == 2:
            return np.sqrt(np.sum(a * a, axis=-1) * self.cell_volume)
        return (np.sum(a**p, axis=-1) * self.cell_volume) ** (1.0 / p)

    def solve_laplacian(self, rhs, rtol=CG_RTOL):
        """Solve ``L w = rhs``: tridiagonal elimination in 1D, CG in 2D."""
        rhs = self.check(rhs)
        if self.dim == 1:
            (h,) = self.spacing
            n = self.size
            off = np.full(n - 1, -1.0 / h**2)
            return solve_tridiagonal(off, np.full(n, 2.0 / h**2), off, rhs)
        diag = sum(2.0 / h**2 for h in self.spacing)
        return pcg(self.laplacian, rhs, diag=np.full(self.size, diag), rtol=rtol)

    def hminus1(self, values, rtol=CG_RTOL):
        w = self.solve_laplacian(values, rtol=rtol)
        return np.sqrt(np.maximum(self.inner(values, w), 0.0))


def laplacian_eigenvalue(grid, modes):
    """Eigenvalue of the discrete operator for the sine mode with index tuple ``modes``."""
    modes = np.atleast_1d(modes)
    return float(
        sum(
            (2.0 / h**2) * (1.0 - math.cos(k * math.pi * h / L))
            for k, h, L in zip(modes, grid.spacing, grid.lengths)
        )
    )


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.shape != (self.grid.size,):
            raise StructuralError(
                f"grid {self.grid.cells} has {self.grid.size} nodes, got {values.size} values"
            )
        if not np.all(np.isfinite(values)):
            raise StructuralError("grid function values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.size))

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, grid.sample(func))

    def __add__(self, other):
        _same_grid(self, other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __len__(self):
        return self.values.size


def _same_grid(a, b):
    if a.grid != b.grid:
        raise StructuralError(f"grid mismatch: {a.grid} vs {b.grid}")


@dataclass(frozen=True)
class TimePartition:
    horizon: float
    steps: int

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self):
        return self.horizon / self.steps

    def times(self):
        return self.dt * np.arange(self.steps + 1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``u_0, ..., u_M`` on one grid; ``states`` has shape ``(M+1, N)``."""

    grid: Grid
    partition: TimePartition
    states: np.ndarray = field(repr=False)

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        expected = (self.partition.steps + 1, self.grid.size)
        if states.shape != expected:
            raise StructuralError(f"trajectory states must have shape {expected}, got {states.shape}")
        if not np.all(np.isfinite(states)):
            raise StructuralError("trajectory contains non-finite values")
        states.flags.writeable = False
        object.__setattr__(self, "states", states)

    @classmethod
    def from_states(cls, partition, states):
        states = list(states)
        grid = states[0].grid
        for s in states:
            _same_grid(states[0], s)
        return cls(grid, partition, np.stack([s.values for s in states]))

    def __len__(self):
        return self.states.shape[0]

    def state(self, m):
        return GridFunction(self.grid, self.states[m])

    def map(self, func):
        """Apply a nodewise function to every state."""
        return Trajectory(self.grid, self.partition, func(self.states))


@dataclass(frozen=True, eq=False)
class StepFields:
    """One field per time interval ``]t_m, t_{m+1}[``; ``values`` has shape ``(M, N)``."""

    grid: Grid
    partition: TimePartition
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        expected = (self.partition.steps, self.grid.size)
        if np.shape(self.values) != expected:
            raise StructuralError(f"step fields must have shape {expected}, got {np.shape(self.values)}")

    def __len__(self):
        return self.values.shape[0]

    def field(self, m):
        return GridFunction(self.grid, self.values[m])


def apply_laplacian(g):
    return GridFunction(g.grid, g.grid.laplacian(g.values))


def norm_Lp(g, p):
    """``(sum |g_i|^p h^d)^(1/p)``, or ``max |g_i|`` for ``p = inf``."""
    return float(g.grid.lp(g.values, p))


def seminorm_H10(g):
    return float(math.sqrt(g.grid.gradient_energy(g.values)))


def norm_Hminus1(g, rtol=CG_RTOL, return_witness=False):
    """Discrete dual norm of ``g`` against the discrete H^1_0 seminorm.

    With ``return_witness`` the solution ``w`` of ``L w = g`` is returned too.
    """
    w = g.grid.solve_laplacian(g.values, rtol=rtol)
    value = math.sqrt(max(float(g.grid.inner(g.values, w)), 0.0))
    if not math.isfinite(value):
        raise NumericalError("H^-1 norm is not finite", grid=g.grid.cells)
    if return_witness:
        return value, GridFunction(g.grid, w)
    return value


def spatial_norms(grid, values, selector):
    """Evaluate the spatial norm named by ``selector`` on a stack of fields.

    Selectors: ``"L<p>"`` (e.g. ``"L1"``, ``"L2.5"``, ``"Linf"``), ``"H10"``, ``"Hm1"``.
    """
    if not isinstance(selector, str):
        raise ValueError(f"norm selector must be a string, got {selector!r}")
    if selector == "H10":
        return np.sqrt(grid.gradient_energy(values))
    if selector == "Hm1":
        return grid.hminus1(values)
    if selector.startswith("L"):
        exponent = selector[1:]
        if exponent == "inf":
            return grid.lp(values, np.inf)
        try:
            p = float(exponent)
        except ValueError:
            raise ValueError(f"unknown norm selector {selector!r}") from None
        return grid.lp(values, p)
    raise ValueError(f"unknown norm selector {selector!r}")


def time_norm(per_step, dt, q):
    per_step = np.asarray(per_step, dtype=float)
    if q == np.inf or q == "inf":
        return float(np.max(per_step)) if per_step.size else 0.0
    q = float(q)
    if not q >= 1:
        raise ValueError(f"time exponent must be >= 1, got {q}")
    return float(np.sum(dt * per_step**q) ** (1.0 / q))


def bochner_norm(traj, spatial, q=2):
    """Space-time norm ``(sum_m dt |state_m|^q)^(1/q)``.

    For a Trajectory the left-endpoint rule uses states ``0..M-1``; ``q = inf``
    takes the max over all states. StepFields use every interval field.
    """
    if isinstance(traj, Trajectory):
        fields = traj.states if q in (np.inf, "inf") else traj.states[:-1]
    elif isinstance(traj, StepFields):
        fields = traj.values
    else:
        raise TypeError(f"expected Trajectory or StepFields, got {type(traj).__name__}")
    norms = spatial_norms(traj.grid, fields, spatial)
    return time_norm(norms, traj.partition.dt, q)


def discrete_time_derivative(traj):
    """Difference quotients ``(u_{m+1} - u_m) / dt`` for ``m = 0..M-1``."""
    values = np.diff(traj.states, axis=0) / traj.partition.dt
    return StepFields(traj.grid, traj.partition, values)
