"""Backward-Euler / Newton solver for the viscous enthalpy equation.

Each time step solves, for the unknown nodal vector ``u``,

    u + dt * L(phi(u) + u / n) = u_prev + dt * f_m

with ``L`` the discrete ``-Laplace`` of :mod:`stefanlab.mesh`. The map
``u -> u + dt L(phi(u) + u/n)`` is a monotone M-matrix perturbation of the
identity, so the step has exactly one solution.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from ._linalg import pcg, solve_tridiagonal
from .errors import ConvergenceError, NumericalError, StructuralError
from .mesh import GridFunction, Trajectory

__all__ = [
    "ViscosityParam",
    "NewtonConfig",
    "ProblemSpec",
    "ManufacturedSolution",
    "ManufacturedSource",
    "MANUFACTURED",
    "step",
    "solve",
    "step_residual",
    "manufactured_source",
    "dirac_approx",
    "eigen_field",
]

SLOPE_FLOOR = 1e-12


@dataclass(frozen=True)
class ViscosityParam:
    """Regularization strength; the added diffusion is ``1/n``. ``n = inf`` switches it off."""

    n: float

    def __post_init__(self):
        n = float(self.n)
        if not n > 0:
            raise ValueError(f"viscosity index n must be positive, got {self.n}")
        object.__setattr__(self, "n", n)

    @property
    def coefficient(self):
        return 0.0 if math.isinf(self.n) else 1.0 / self.n


@dataclass(frozen=True)
class NewtonConfig:
    tol: float = 1e-10
    max_iter: int = 50
    damping: float = 0.5
    max_backtracks: int = 30
    picard_sweeps: int = 5

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"Newton tolerance must be positive, got {self.tol}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 0 < self.damping < 1:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Grid, time partition, nonlinearity, source and initial datum.

    ``source`` is ``None`` (zero), an array of shape ``(M+1, N)`` whose row
    ``m`` is ``f_m``, or a callable ``m -> array``. ``source_id`` only feeds
    run metadata.
    """

    grid: object
    partition: object
    nl: object
    initial: GridFunction
    source: object = None
    source_id: str = "zero"
    warnings: tuple = field(default=())

    def __post_init__(self):
        if self.initial.grid != self.grid:
            raise StructuralError("initial datum lives on a different grid")
        if isinstance(self.source, np.ndarray):
            expected = (self.partition.steps + 1, self.grid.size)
            if self.source.shape != expected:
                raise StructuralError(f"source array must have shape {expected}, got {self.source.shape}")
            if not np.all(np.isfinite(self.source)):
                raise StructuralError("source contains non-finite values")

    def source_values(self, m):
        if self.source is None:
            return np.zeros(self.grid.size)
        if callable(self.source):
            values = np.asarray(self.source(m), dtype=float)
        else:
            values = self.source[m]
        return self.grid.check(values)

    def with_data(self, initial=None, source=None, source_id=None):
        return ProblemSpec(
            self.grid,
            self.partition,
            self.nl,
            self.initial if initial is None else initial,
            self.source if source is None else source,
            self.source_id if source_id is None else source_id,
            self.warnings,
        )


def _residual(grid, nl, dt, eps, u, rhs):
    return u + dt * grid.laplacian(nl(u) + eps * u) - rhs


def step_residual(u_new, u_prev, spec, visc, m):
    """Nodal residual of the step equation; zero for an exact step."""
    dt = spec.partition.dt
    rhs = u_prev.values + dt * spec.source_values(m)
    return GridFunction(spec.grid, _residual(spec.grid, spec.nl, dt, visc.coefficient, u_new.values, rhs))


def _newton_direction(grid, dt, slope, r):
    """Solve ``(I + dt L diag(slope)) d = -r``."""
    if grid.dim == 1:
        (h,) = grid.spacing
        c = dt / h**2
        return solve_tridiagonal(-c * slope[:-1], 1.0 + 2.0 * c * slope, -c * slope[1:], -r)
    # (diag(1/slope) + dt L) y = -r is symmetric positive definite; d = y / slope
    inv = 1.0 / slope
    diag = inv + dt * sum(2.0 / h**2 for h in grid.spacing)
    y = pcg(lambda v: inv * v + dt * grid.laplacian(v), -r, diag=diag, rtol=1e-12)
    return y / slope


def _picard_direction(grid, dt, c, r):
    """Constant-slope linearization: solve ``(I + dt c L) d = -r``."""
    if grid.dim == 1:
        (h,) = grid.spacing
        k = dt * c / h**2
        n = grid.size
        return solve_tridiagonal(np.full(n - 1, -k), np.full(n, 1.0 + 2.0 * k), np.full(n - 1, -k), -r)
    diag = 1.0 + dt * c * sum(2.0 / h**2 for h in grid.spacing)
    return pcg(lambda v: v + dt * c * grid.laplacian(v), -r, diag=np.full(grid.size, diag), rtol=1e-12)


def _solve_step(grid, nl, dt, eps, u_prev, f, cfg, m=None, guess=None):
    rhs = u_prev + dt * f
    u = np.array(u_prev if guess is None else guess, dtype=float)
    norm = lambda r: float(grid.lp(r, 2))
    r = _residual(grid, nl, dt, eps, u, rhs)
    res = norm(r)
    picard_used = False
    for _ in range(cfg.max_iter):
        if res <= cfg.tol:
            return u
        slope = nl.slope(u) + eps
        if eps == 0.0:
            slope = np.maximum(slope, SLOPE_FLOOR)
        try:
            d = _newton_direction(grid, dt, slope, r)
        except NumericalError:
            d = None
        accepted = False
        if d is not None:
            lam = 1.0
            for _ in range(cfg.max_backtracks + 1):
                trial = u + lam * d
                r_trial = _residual(grid, nl, dt, eps, trial, rhs)
                res_trial = norm(r_trial)
                if res_trial < (1.0 - 1e-4 * lam) * res:
                    accepted = True
                    break
                lam *= cfg.damping
        if accepted:
            u, r, res = trial, r_trial, res_trial
            continue
        if picard_used:
            break
        # fall back to a few constant-slope sweeps, then retry Newton
        picard_used = True
        c = nl.lipschitz + eps
        for _ in range(cfg.picard_sweeps):
            u = u + _picard_direction(grid, dt, c, r)
            r = _residual(grid, nl, dt, eps, u, rhs)
            res = norm(r)
    if res <= cfg.tol:
        return u
    raise ConvergenceError(
        f"Newton did not converge (residual {res:.3e} > tol {cfg.tol:.1e})", residual=res, step=m
    )


def step(u_prev, spec, visc, m, cfg=NewtonConfig(), guess=None):
    """Advance one backward-Euler step from ``u_prev`` to time ``t_m``."""
    if not 1 <= m <= spec.partition.steps:
        raise ValueError(f"step index must lie in [1, {spec.partition.steps}], got {m}")
    if u_prev.grid != spec.grid:
        raise StructuralError("u_prev lives on a different grid")
    values = _solve_step(
        spec.grid,
        spec.nl,
        spec.partition.dt,
        visc.coefficient,
        u_prev.values,
        spec.source_values(m),
        cfg,
        m=m,
        guess=None if guess is None else guess.values,
    )
    return GridFunction(spec.grid, values)


def solve(spec, visc, cfg=NewtonConfig()):
    """Run all ``M`` steps from ``spec.initial``; errors carry the failing step index."""
    grid, dt, eps = spec.grid, spec.partition.dt, visc.coefficient
    states = np.empty((spec.partition.steps + 1, grid.size))
    states[0] = spec.initial.values
    for m in range(1, spec.partition.steps + 1):
        states[m] = _solve_step(grid, spec.nl, dt, eps, states[m - 1], spec.source_values(m), cfg, m=m)
    return Trajectory(grid, spec.partition, states)


# -- sources ---------------------------------------------------------------


def eigen_field(grid, modes=None):
    """Product of sines, the discrete Laplacian eigenvector with the given mode indices."""
    modes = (1,) * grid.dim if modes is None else tuple(modes)
    coords = grid.coordinates()
    out = np.ones(grid.size)
    for k, x, L in zip(modes, coords, grid.lengths):
        out *= np.sin(k * np.pi * x / L)
    return out


def dirac_approx(grid, center, width, mass=1.0):
    """Gaussian bump normalized so that its discrete integral equals ``mass``."""
    coords = grid.coordinates()
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    r2 = sum((x - c) ** 2 for x, c in zip(coords, center))
    g = np.exp(-0.5 * r2 / width**2)
    total = g.sum() * grid.cell_volume
    if total == 0:
        raise ValueError(f"width {width} too small to place any mass on the grid")
    return mass * g / total


@dataclass(frozen=True)
class ManufacturedSolution:
    """Analytic field ``u*(t, *x)`` with its time derivative and Laplacian.

    All callables take ``(t, *coords)`` and broadcast over the coordinates.
    """

    name: str
    value: object
    time_derivative: object
    laplacian: object


def _sines(coords, lengths):
    out = 1.0
    for x, L in zip(coords, lengths):
        out = out * np.sin(np.pi * x / L)
    return out


def _sine_family(name, amp, shift=0.0, decay=None):
    # u* = shift + amp(t) * prod sin(pi x / L), on the unit box
    def value(t, *x):
        return shift + amp(t) * _sines(x, [1.0] * len(x))

    def dt_(t, *x):
        return decay(t) * _sines(x, [1.0] * len(x))

    def lap(t, *x):
        return -len(x) * np.pi**2 * amp(t) * _sines(x, [1.0] * len(x))

    return ManufacturedSolution(name, value, dt_, lap)


MANUFACTURED = {
    "zero": ManufacturedSolution(
        "zero",
        lambda t, *x: 0.0 * x[0],
        lambda t, *x: 0.0 * x[0],
        lambda t, *x: 0.0 * x[0],
    ),
    # e^{-t} sin(pi x)
    "decay": _sine_family("decay", lambda t: np.exp(-t), decay=lambda t: -np.exp(-t)),
    # (1 + t) sin(pi x): backward Euler is exact in time for it
    "ramp": _sine_family("ramp", lambda t: 1.0 + t, decay=lambda t: 1.0 + 0.0 * t),
    # 1 + (1 + t) sin(pi x): strictly above a [*, 1] plateau inside the box
    "above_plateau": _sine_family("above_plateau", lambda t: 1.0 + t, shift=1.0, decay=lambda t: 1.0 + 0.0 * t),
    # 1 + e^{t} sin(pi x), smooth in time so backward Euler is first order
    "above_plateau_exp": _sine_family(
        "above_plateau_exp", lambda t: np.exp(t), shift=1.0, decay=lambda t: np.exp(t)
    ),
}


@dataclass(frozen=True, eq=False)
class ManufacturedSource:
    fields: np.ndarray
    warnings: tuple
    exact: np.ndarray

    def exact_trajectory(self, grid, partition):
        return Trajectory(grid, partition, self.exact)


def _single_piece(nl, values):
    """Slope of the affine piece of phi containing every value, or None.

    Knots where the slope does not actually change are ignored.
    """
    lo, hi = float(np.min(values)), float(np.max(values))
    slope = nl.slope(lo)
    inner = nl.knots[(nl.knots > lo) & (nl.knots < hi)]
    return slope if np.all(nl.slope(inner) == slope) else None


def manufactured_source(u_star, nl, visc, grid, partition, fd_step=None):
    """Source ``f = d_t u* - Lap phi(u*) - (1/n) Lap u*`` sampled at every ``t_m``.

    When ``u*`` stays inside one affine piece of phi on the sampled nodes the
    Laplacian of ``phi(u*)`` is exact; otherwise a fourth-order difference with
    step ``fd_step`` (default ``h/50``) is used and a warning is recorded. The
    difference formula is only second-order accurate in ``fd_step`` across a
    kink of phi.
    """
    coords = grid.coordinates()
    times = partition.times()
    eps = visc.coefficient
    exact = np.stack([np.asarray(u_star.value(t, *coords)) * np.ones(grid.size) for t in times])
    notes = []
    slope = _single_piece(nl, exact)
    fields = np.empty_like(exact)
    if slope is None:
        notes.append(
            f"u* range [{exact.min():.4g}, {exact.max():.4g}] crosses a breakpoint of phi; "
            "Laplacian of phi(u*) taken by finite differences"
        )
        warnings.warn(notes[-1], RuntimeWarning, stacklevel=2)
        eta = min(grid.spacing) / 50.0 if fd_step is None else fd_step
    for m, t in enumerate(times):
        lap_u = np.asarray(u_star.laplacian(t, *coords)) * np.ones(grid.size)
        if slope is not None:
            lap_phi = slope * lap_u
        else:
            lap_phi = np.zeros(grid.size)
            for axis in range(grid.dim):
                def phi_at(shift):
                    shifted = [c + shift if a == axis else c for a, c in enumerate(coords)]
                    return nl(np.asarray(u_star.value(t, *shifted)) * np.ones(grid.size))

                lap_phi += (
                    -phi_at(2 * eta) + 16 * phi_at(eta) - 30 * phi_at(0.0) + 16 * phi_at(-eta) - phi_at(-2 * eta)
                ) / (12 * eta**2)
        dtu = np.asarray(u_star.time_derivative(t, *coords)) * np.ones(grid.size)
        fields[m] = dtu - lap_phi - eps * lap_u
    return ManufacturedSource(fields, tuple(notes), exact)
