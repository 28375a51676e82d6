"""Acceptance criteria 1-8, each printed as one pass/fail line.

Tolerances live in :mod:`stefanlab.verify`; every check there records its
measured value next to the pinned threshold. Run with ``pytest -s`` to see
the lines, or ``stefanlab verify`` for the same run with a JSON report.
"""

import pytest

from stefanlab import verify
from stefanlab.config import build_problem

from conftest import SUMMARY_LINES


@pytest.fixture(scope="module")
def visc_sweep():
    # criteria 4 and 5 read the same five-point viscosity sweep
    cfg, sweep = verify.visc_sweep_from_config()
    return sweep, build_problem(cfg).nl


def _report(res):
    SUMMARY_LINES.append(res.summary())
    print()
    print(res.summary())
    for name, (measured, threshold, ok) in res.checks.items():
        print(f"    {'ok  ' if ok else 'FAIL'} {name}: measured={measured} threshold={threshold}")
    for note in res.notes:
        print(f"    note: {note}")
    assert res.passed, f"criterion {res.number} failed: {res.failed_checks()}"


def test_criterion_1_nonlinearity_identities():
    _report(verify.criterion_1())


def test_criterion_2_discrete_operators():
    _report(verify.criterion_2())


def test_criterion_3_manufactured_convergence():
    _report(verify.criterion_3())


def test_criterion_4_uniform_viscosity_bounds(visc_sweep):
    _report(verify.criterion_4(visc_sweep[0]))


def test_criterion_5_compactness_diagnostics(visc_sweep):
    _report(verify.criterion_5(*visc_sweep))


def test_criterion_6_l1_data_thresholds():
    _report(verify.criterion_6())


def test_criterion_7_exponent_bookkeeping():
    _report(verify.criterion_7())


def test_criterion_8_truncation_and_counterexample():
    _report(verify.criterion_8())
