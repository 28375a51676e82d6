import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stefanlab.errors import ConvergenceError, StructuralError
from stefanlab.mesh import Grid, GridFunction, TimePartition, bochner_norm, laplacian_eigenvalue
from stefanlab.nonlinear import Nonlinearity
from stefanlab.solver import (
    MANUFACTURED,
    NewtonConfig,
    ProblemSpec,
    ViscosityParam,
    dirac_approx,
    eigen_field,
    manufactured_source,
    solve,
    step,
    step_residual,
)

STEFAN = Nonlinearity.stefan()
LINEAR = Nonlinearity.linear()
INF = ViscosityParam(math.inf)


def make_spec(grid, nl, u0, horizon=0.1, steps=10, source=None):
    return ProblemSpec(grid, TimePartition(horizon, steps), nl, GridFunction(grid, u0), source)


def test_viscosity_param():
    assert ViscosityParam(4).coefficient == 0.25
    assert INF.coefficient == 0.0
    with pytest.raises(ValueError):
        ViscosityParam(0)


def test_zero_step_and_zero_solve():
    grid = Grid.uniform(1, 16)
    spec = make_spec(grid, STEFAN, np.zeros(16))
    assert np.all(step(spec.initial, spec, INF, 1).values == 0)
    assert np.all(solve(spec, ViscosityParam(10)).states == 0)


def test_linear_resolvent_on_eigenvector():
    grid = Grid.uniform(1, 31)
    u0 = eigen_field(grid)
    spec = make_spec(grid, LINEAR, u0, horizon=0.2, steps=8)
    lam = laplacian_eigenvalue(grid, (1,))
    dt = spec.partition.dt
    one = step(spec.initial, spec, INF, 1, NewtonConfig(tol=1e-13))
    assert np.allclose(one.values, u0 / (1 + dt * lam), atol=1e-12)
    traj = solve(spec, INF, NewtonConfig(tol=1e-13))
    for m in range(9):
        assert np.allclose(traj.states[m], (1 + dt * lam) ** (-m) * u0, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([Grid.uniform(1, 20), Grid.uniform(2, 8)]), st.sampled_from([1.0, 100.0, math.inf]))
def test_random_step_residual_below_tol(seed, grid, n):
    rng = np.random.default_rng(seed)
    spec = make_spec(grid, STEFAN, rng.uniform(-3, 4, grid.size), horizon=0.05, steps=2)
    cfg = NewtonConfig(tol=1e-10)
    visc = ViscosityParam(n)
    u1 = step(spec.initial, spec, visc, 1, cfg)
    r = step_residual(u1, spec.initial, spec, visc, 1)
    assert grid.lp(r.values, 2) <= cfg.tol


def test_step_is_unique_from_different_guesses():
    grid = Grid.uniform(1, 24)
    rng = np.random.default_rng(5)
    spec = make_spec(grid, STEFAN, rng.uniform(-2, 3, 24), horizon=0.05, steps=1)
    cfg = NewtonConfig(tol=1e-12)
    a = step(spec.initial, spec, INF, 1, cfg)
    b = step(spec.initial, spec, INF, 1, cfg, guess=GridFunction(grid, rng.uniform(-10, 10, 24)))
    assert np.allclose(a.values, b.values, atol=1e-9)


def test_comparison_principle():
    # the step map is order preserving
    grid = Grid.uniform(1, 30)
    rng = np.random.default_rng(11)
    lo = rng.uniform(-2, 2, 30)
    hi = lo + rng.uniform(0, 1, 30)
    cfg = NewtonConfig(tol=1e-12)
    spec = make_spec(grid, STEFAN, lo, horizon=0.02, steps=1)
    a = step(GridFunction(grid, lo), spec, INF, 1, cfg)
    b = step(GridFunction(grid, hi), spec, INF, 1, cfg)
    assert np.all(b.values >= a.values - 1e-9)


def test_weak_form_residual():
    # discrete weak form: <u_m - u_{m-1}, v> + dt <phi(u_m), L v> = dt <f_m, v> for any v
    grid = Grid.uniform(2, 10)
    rng = np.random.default_rng(2)
    spec = make_spec(grid, STEFAN, rng.uniform(-1, 3, grid.size), horizon=0.05, steps=3)
    traj = solve(spec, INF, NewtonConfig(tol=1e-12))
    dt = spec.partition.dt
    for m in range(1, 4):
        v = rng.standard_normal(grid.size)
        lhs = grid.inner(traj.states[m] - traj.states[m - 1], v) + dt * grid.inner(STEFAN(traj.states[m]), grid.laplacian(v))
        assert abs(lhs) <= 1e-9 * (1 + grid.lp(v, 2))


def test_step_validates_inputs():
    grid = Grid.uniform(1, 8)
    spec = make_spec(grid, STEFAN, np.zeros(8))
    with pytest.raises(ValueError):
        step(spec.initial, spec, INF, 0)
    with pytest.raises(StructuralError):
        step(GridFunction.zeros(Grid.uniform(1, 9)), spec, INF, 1)
    with pytest.raises(StructuralError):
        make_spec(grid, STEFAN, np.zeros(8), source=np.zeros((3, 8)))


def test_convergence_error_carries_step():
    grid = Grid.uniform(1, 8)
    spec = make_spec(grid, STEFAN, np.full(8, 5.0))
    with pytest.raises(ConvergenceError) as info:
        solve(spec, INF, NewtonConfig(tol=1e-300, max_iter=1))
    assert "residual" in str(info.value)


def test_viscosity_limit_first_order_for_linear_phi():
    # with phi(s) = s the viscous problem is the heat equation with diffusion 1 + 1/n
    grid = Grid.uniform(1, 63)
    spec = make_spec(grid, LINEAR, eigen_field(grid), horizon=0.1, steps=20)
    ref = solve(spec, INF, NewtonConfig(tol=1e-12))
    ns = [10.0, 20.0, 40.0, 80.0]
    errs = []
    for n in ns:
        t = solve(spec, ViscosityParam(n), NewtonConfig(tol=1e-12))
        errs.append(bochner_norm(ref.map(lambda s: t.states - s), "L2", 2))
    orders = [math.log(a / b, 2) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 0.9


def test_manufactured_zero_source():
    grid = Grid.uniform(1, 10)
    ms = manufactured_source(MANUFACTURED["zero"], STEFAN, INF, grid, TimePartition(1.0, 4))
    assert np.all(ms.fields == 0)
    assert ms.warnings == ()


def test_manufactured_decay_source_closed_form():
    grid = Grid.uniform(1, 20)
    part = TimePartition(1.0, 5)
    ms = manufactured_source(MANUFACTURED["decay"], LINEAR, INF, grid, part)
    (x,) = grid.coordinates()
    for m, t in enumerate(part.times()):
        assert np.allclose(ms.fields[m], (math.pi**2 - 1) * math.exp(-t) * np.sin(math.pi * x), atol=1e-12)


def test_manufactured_above_plateau_is_affine():
    grid = Grid.uniform(1, 20)
    part = TimePartition(1.0, 4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ms = manufactured_source(MANUFACTURED["above_plateau"], STEFAN, ViscosityParam(5), grid, part)
    u = MANUFACTURED["above_plateau"]
    (x,) = grid.coordinates()
    t = part.times()[2]
    expected = u.time_derivative(t, x) - 1.2 * u.laplacian(t, x)
    assert np.allclose(ms.fields[2], expected, atol=1e-10)


def test_manufactured_crossing_warns():
    grid = Grid.uniform(1, 20)
    with pytest.warns(RuntimeWarning, match="breakpoint"):
        ms = manufactured_source(MANUFACTURED["ramp"], STEFAN, INF, grid, TimePartition(1.0, 2))
    assert ms.warnings


def test_dirac_approx_has_requested_mass():
    grid = Grid.uniform(2, 40)
    g = dirac_approx(grid, (0.5, 0.5), 0.05, mass=3.0)
    assert grid.lp(g, 1) == pytest.approx(3.0)
