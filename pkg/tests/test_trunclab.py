import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stefanlab.errors import ResolutionError
from stefanlab.mesh import Grid, GridFunction
from stefanlab.trunclab import (
    PROBES,
    check_strong_truncation_lemma,
    counterexample_report,
    counterexample_sequence,
    l1_trunc_trend,
    tail_bound,
    tail_integral,
    weak_pairing_trend,
)

GRID = Grid.uniform(1, 999)
V = GridFunction(GRID, np.sin(np.pi * GRID.coordinates()[0]))


def test_coarse_grid_raises_resolution_error():
    with pytest.raises(ResolutionError, match="cells"):
        counterexample_sequence(10, 1.0, Grid.uniform(1, 100))


@pytest.mark.parametrize("n", [10, 100, 1000])
@pytest.mark.parametrize("k", [0.5, 1.0, 7.0])
def test_exact_masses(n, k):
    c = counterexample_sequence(n, 1.0)
    assert c.mass == 1.0
    assert c.truncated_l1(k) == min(k, n) / n
    assert counterexample_sequence(n, 3.0).mass == n**2
    assert c.lp_power(2) == n


def test_grid_sample_matches_closed_form():
    grid = Grid.uniform(1, 4000)
    c = counterexample_sequence(10, 1.0, grid)
    assert grid.lp(c.field.values, 1) == pytest.approx(c.mass, rel=0.05)
    assert set(np.unique(c.field.values)) == {0.0, 10.0}


def test_pairing_of_constant_is_mass():
    for n in (10, 100):
        c = counterexample_sequence(n, 1.0)
        assert c.pairing(PROBES["one"][0]) == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.0, 4.0), st.floats(0.01, 50))
def test_tail_inequality(seed, p, k):
    rng = np.random.default_rng(seed)
    w = GridFunction(GRID, rng.standard_cauchy(GRID.size))
    assert tail_integral(w, k) <= tail_bound(w, k, p) * (1 + 1e-12)


def test_constant_family_has_zero_gaps():
    v = check_strong_truncation_lemma([V, V, V], V, 2.0, (0.5, 1.0))
    assert v.l1_gaps == [0.0, 0.0, 0.0]
    assert v.l1_trend == "zero" and v.chain_holds


def test_noisy_family_chain_has_strict_slack():
    rng = np.random.default_rng(0)
    noise = rng.uniform(-1, 1, GRID.size)
    family = [GridFunction(GRID, V.values + noise / j) for j in (1, 2, 4, 8, 16)]
    v = check_strong_truncation_lemma(family, V, 2.0, (0.25, 0.5, 1.0, 4.0), (1.5,))
    assert v.lemma_applies and v.chain_holds and v.interpolation_holds
    assert all(c["slack"] > 0 for c in v.chain)
    assert v.l1_trend == "decreasing"


def test_p_one_counterexample_family():
    # truncations vanish in L^1 but the family itself keeps unit L^1 distance from 0
    grid = Grid.uniform(1, 40000)
    family = [counterexample_sequence(n, 1.0, grid).field for n in (5, 10, 20)]
    zero = GridFunction.zeros(grid)
    v = check_strong_truncation_lemma(family, zero, 1.0, (0.5,), bound=2.0)
    assert not v.lemma_applies
    assert all(g == pytest.approx(1.0, rel=0.1) for g in v.l1_gaps)
    assert v.l1_trend == "flat"


def test_unbounded_family_is_rejected():
    family = [V * float(j) for j in (1, 3, 9)]
    with pytest.raises(ValueError, match="not bounded"):
        check_strong_truncation_lemma(family, V, 2.0, (1.0,))
    with pytest.raises(ValueError):
        check_strong_truncation_lemma([V], V, 0.5, (1.0,))


def test_trend_helpers():
    assert weak_pairing_trend([0.8, 0.95, 0.99], 1.0) == "converging"
    assert weak_pairing_trend([1.0, 10.0, 100.0], 1.0) == "diverging"
    assert weak_pairing_trend([0.5, 0.6, 0.7], 1.0) == "inconclusive"
    assert l1_trunc_trend([0.1, 0.01, 0.001]) == "vanishing"
    assert l1_trunc_trend([1.0, 1.0, 1.0]) == "persistent"


def test_counterexample_verdicts():
    rep1 = counterexample_report()
    assert rep1.weak_pairing_trend == "converging"
    assert rep1.l1_trunc_trend == "vanishing"
    assert rep1.weak_convergence_to_indicator == "holds"
    assert rep1.notes == []
    for name, (_, exact) in PROBES.items():
        assert abs(rep1.pairings[name][-1] - exact) <= 0.1 * abs(exact)

    rep3 = counterexample_report(amplitude_exp=3.0)
    assert rep3.masses == [100.0, 10000.0, 1000000.0]
    assert rep3.weak_convergence_to_indicator == "fails"
    assert rep3.notes and "not constant" in rep3.notes[0]
    assert math.isclose(rep3.truncated_l1[1.0][-1], 1 / 1000)
