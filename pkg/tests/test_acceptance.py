"""The acceptance gates at their stated sizes and tolerances.

Each test runs one criterion from `rapwalk.acceptance` and prints its
pass/fail line outside pytest's capture, so every run shows the ten
verdicts.  The Monte Carlo criteria (4, 6, 7, 8) are minutes-scale; run
`pytest tests/test_acceptance.py -m "not slow"` for the fast subset, or
`rapwalk selftest --quick` for a smoke version of everything.
"""

import pytest

from rapwalk import acceptance


def _check(result, capsys):
    with capsys.disabled():
        print()
        print(result.line())
    assert result.passed, result.detail


def test_criterion_1_beta_triangle(capsys):
    _check(acceptance.criterion_1(), capsys)


def test_criterion_2_green_asymptotics(capsys):
    _check(acceptance.criterion_2(), capsys)


def test_criterion_3_exact_variance_identities(capsys):
    _check(acceptance.criterion_3(), capsys)


@pytest.mark.slow
def test_criterion_4_quenched_mean_scaling(capsys):
    _check(acceptance.criterion_4(), capsys)


def test_criterion_5_gamma_kernel_numerics(capsys):
    _check(acceptance.criterion_5(), capsys)


@pytest.mark.slow
def test_criterion_6_rwre_covariance(capsys):
    _check(acceptance.criterion_6(), capsys)


@pytest.mark.slow
def test_criterion_7_rap_covariance(capsys):
    _check(acceptance.criterion_7(), capsys)


@pytest.mark.slow
def test_criterion_8_fbm_marginal(capsys):
    _check(acceptance.criterion_8(), capsys)


def test_criterion_9_invariant_distribution(capsys):
    _check(acceptance.criterion_9(), capsys)


def test_criterion_10_determinism(capsys):
    _check(acceptance.criterion_10(), capsys)
