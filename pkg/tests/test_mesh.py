import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from stefanlab.errors import StructuralError
from stefanlab.mesh import (
    Grid,
    GridFunction,
    TimePartition,
    Trajectory,
    apply_laplacian,
    bochner_norm,
    discrete_time_derivative,
    laplacian_eigenvalue,
    norm_Hminus1,
    norm_Lp,
    seminorm_H10,
)
from stefanlab.solver import eigen_field

GRIDS = [Grid.uniform(1, 7), Grid.uniform(1, 40, 2.0), Grid((1.0, 2.0), (5, 8)), Grid.uniform(2, 12)]

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def dense_laplacian(grid):
    n = grid.size
    return np.stack([grid.laplacian(e) for e in np.eye(n)], axis=1)


@st.composite
def grid_and_pair(draw):
    grid = draw(st.sampled_from(GRIDS))
    a = draw(arrays(float, grid.size, elements=finite))
    b = draw(arrays(float, grid.size, elements=finite))
    return grid, a, b


def test_grid_rejects_bad_shapes():
    with pytest.raises(StructuralError):
        Grid((1.0,), (1,))
    with pytest.raises(StructuralError):
        Grid((1.0, 1.0, 1.0), (3, 3, 3))
    with pytest.raises(StructuralError):
        GridFunction(Grid.uniform(1, 4), np.zeros(5))
    with pytest.raises(StructuralError):
        GridFunction(Grid.uniform(1, 4), [0, 1, np.nan, 0])


def test_grid_function_arithmetic_checks_grid():
    a = GridFunction.zeros(Grid.uniform(1, 4))
    b = GridFunction.zeros(Grid.uniform(1, 5))
    with pytest.raises(StructuralError):
        a + b


def test_lp_of_constant_one():
    g = GridFunction(Grid.uniform(1, 9), np.ones(9))
    # nine nodes, weight 1/10 each
    assert norm_Lp(g, 1) == pytest.approx(0.9)
    assert norm_Lp(g, 2) == pytest.approx(math.sqrt(0.9))
    assert norm_Lp(g, np.inf) == 1.0


def test_single_node_bump_h10():
    grid = Grid.uniform(1, 3)
    g = GridFunction(grid, [0.0, 1.0, 0.0])
    # two unit jumps over h = 1/4, weighted by h
    assert seminorm_H10(g) ** 2 == pytest.approx(2 * 0.25 / 0.25**2)


@pytest.mark.parametrize("grid", GRIDS)
def test_laplacian_is_spd(grid):
    A = dense_laplacian(grid)
    assert np.allclose(A, A.T)
    assert np.linalg.eigvalsh(A).min() > 0


@pytest.mark.parametrize("grid", GRIDS)
def test_eigenvalues_match_closed_form(grid):
    modes = (2,) * grid.dim
    v = eigen_field(grid, modes)
    lam = laplacian_eigenvalue(grid, modes)
    assert np.allclose(grid.laplacian(v), lam * v, atol=1e-9 * lam)


@settings(max_examples=60, deadline=None)
@given(grid_and_pair())
def test_summation_by_parts(data):
    grid, a, b = data
    lhs = grid.inner(grid.laplacian(a), b)
    # polarization of the gradient energy
    rhs = 0.25 * (grid.gradient_energy(a + b) - grid.gradient_energy(a - b))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(grid_and_pair())
def test_hminus1_duality_and_holder(data):
    grid, a, b = data
    g, v = GridFunction(grid, a), GridFunction(grid, b)
    pairing = abs(grid.inner(a, b))
    assert pairing <= norm_Hminus1(g) * seminorm_H10(v) * (1 + 1e-8) + 1e-9
    for p, q in ((2, 2), (1, np.inf), (3, 1.5)):
        assert pairing <= norm_Lp(g, p) * norm_Lp(v, q) * (1 + 1e-12) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(GRIDS), st.data())
def test_hminus1_witness_attains_the_norm(grid, data):
    a = data.draw(arrays(float, grid.size, elements=finite))
    g = GridFunction(grid, a)
    value, w = norm_Hminus1(g, return_witness=True)
    assert np.allclose(grid.laplacian(w.values), a, atol=1e-6 * (1 + np.abs(a).max()))
    if value > 0:
        assert grid.inner(a, w.values) / seminorm_H10(w) == pytest.approx(value, rel=1e-6)


def test_hminus1_of_eigenvector():
    grid = Grid.uniform(1, 31)
    v = GridFunction(grid, eigen_field(grid, (3,)))
    lam = laplacian_eigenvalue(grid, (3,))
    assert norm_Hminus1(v) == pytest.approx(norm_Lp(v, 2) / math.sqrt(lam), rel=1e-10)
    assert norm_Lp(apply_laplacian(v), 2) == pytest.approx(lam * norm_Lp(v, 2), rel=1e-10)


def test_bochner_two_state_oracle():
    grid = Grid.uniform(1, 4)
    part = TimePartition(2.0, 2)
    s0, s1, s2 = np.full(4, 1.0), np.full(4, 2.0), np.full(4, 5.0)
    traj = Trajectory(grid, part, np.stack([s0, s1, s2]))
    l2 = lambda s: math.sqrt(np.sum(s**2) * 0.2)
    # left-endpoint rule uses states 0 and 1 only
    assert bochner_norm(traj, "L2", 2) == pytest.approx(math.sqrt(1.0 * l2(s0) ** 2 + 1.0 * l2(s1) ** 2))
    assert bochner_norm(traj, "L2", 1) == pytest.approx(l2(s0) + l2(s1))
    assert bochner_norm(traj, "L2", np.inf) == pytest.approx(l2(s2))


def test_bochner_rejects_unknown_selector():
    traj = Trajectory(Grid.uniform(1, 3), TimePartition(1.0, 1), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        bochner_norm(traj, "W11")


def test_discrete_time_derivative():
    grid = Grid.uniform(1, 3)
    part = TimePartition(0.5, 2)
    traj = Trajectory(grid, part, np.array([[0, 0, 0], [1, 2, 3], [1, 1, 1]], float))
    d = discrete_time_derivative(traj)
    assert d.values.shape == (2, 3)
    assert np.allclose(d.values, [[4, 8, 12], [0, -4, -8]])


def test_trajectory_shape_is_checked():
    with pytest.raises(StructuralError):
        Trajectory(Grid.uniform(1, 3), TimePartition(1.0, 2), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        TimePartition(1.0, 0)
