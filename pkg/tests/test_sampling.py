from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from samplogit.sampling import (
    SampleSizeError,
    covariance,
    empirical_moments,
    enumerate_outcomes,
    multinomial_mass,
    outcome_masses,
)
from conftest import simplex_points


def test_small_enumerations():
    assert enumerate_outcomes(2, 1).tolist() == [[1, 0], [0, 1]]
    assert enumerate_outcomes(2, 2).tolist() == [[2, 0], [1, 1], [0, 2]]
    assert len(enumerate_outcomes(3, 5)) == comb(7, 2) == 21


@pytest.mark.parametrize("n,k", [(2, 7), (3, 6), (4, 5), (5, 3)])
def test_enumeration_complete_unique_ordered(n, k):
    z = enumerate_outcomes(n, k)
    assert len(z) == comb(k + n - 1, n - 1)
    assert np.all(z.sum(axis=1) == k) and np.all(z >= 0)
    assert len({tuple(r) for r in z.tolist()}) == len(z)
    rows = [tuple(r) for r in z.tolist()]
    assert rows == sorted(rows, reverse=True)


def test_enumeration_caps():
    enumerate_outcomes(2, 512)
    with pytest.raises(SampleSizeError):
        enumerate_outcomes(2, 513)
    with pytest.raises(SampleSizeError):
        enumerate_outcomes(3, 65)
    with pytest.raises(SampleSizeError):
        enumerate_outcomes(4, 25)
    with pytest.raises(SampleSizeError):
        enumerate_outcomes(2, 0)
    assert len(enumerate_outcomes(3, 70, cap=80)) == comb(72, 2)


def test_mass_examples():
    assert multinomial_mass([1, 0], [0.3, 0.7]) == pytest.approx(0.3, abs=1e-15)
    assert multinomial_mass([1, 1], [0.5, 0.5]) == pytest.approx(0.5, abs=1e-15)
    assert multinomial_mass([2, 1, 2], [0.2, 0.3, 0.5]) == pytest.approx(0.09, abs=1e-14)


def test_mass_monte_carlo():
    rng = np.random.default_rng(11)
    draws = rng.multinomial(5, [0.2, 0.3, 0.5], size=10**6)
    freq = np.mean(np.all(draws == [2, 1, 2], axis=1))
    # 3 sigma of a Bernoulli(0.09) mean over 1e6 draws is about 8.6e-4
    assert abs(freq - multinomial_mass([2, 1, 2], [0.2, 0.3, 0.5])) < 9e-4


def test_boundary_masses():
    m = outcome_masses(np.array([1.0, 0.0, 0.0]), 4)
    assert m[0] == 1.0 and m[1:].sum() == 0.0
    assert multinomial_mass([0, 3], [0.0, 1.0]) == 1.0
    assert multinomial_mass([1, 2], [0.0, 1.0]) == 0.0


def test_covariance_examples():
    assert not np.any(covariance(np.array([1.0, 0.0])))
    np.testing.assert_allclose(covariance(np.array([0.5, 0.5])), [[0.25, -0.25], [-0.25, 0.25]])
    x = np.array([0.2, 0.3, 0.5])
    mean, cov = empirical_moments(x, 4)
    np.testing.assert_allclose(mean, x, atol=1e-12)
    np.testing.assert_allclose(cov, covariance(x) / 4, atol=1e-12)


@given(simplex_points(3), st.integers(1, 30))
def test_moment_identities_n3(x, k):
    m = outcome_masses(x, k)
    assert m.sum() == pytest.approx(1.0, abs=1e-12)
    mean, cov = empirical_moments(x, k)
    np.testing.assert_allclose(mean, x, atol=1e-12)
    np.testing.assert_allclose(cov, covariance(x) / k, atol=1e-12)


@given(simplex_points(2), st.integers(1, 512))
def test_normalization_n2(x, k):
    assert outcome_masses(x, k).sum() == pytest.approx(1.0, abs=1e-12)


@given(simplex_points(4))
def test_covariance_properties(x):
    S = covariance(x)
    np.testing.assert_allclose(S, S.T)
    assert np.max(np.abs(S.sum(axis=1))) < 1e-12
    assert np.linalg.eigvalsh(S).min() >= -1e-10


def test_batched_masses_match_single():
    X = np.array([[0.2, 0.8], [0.5, 0.5], [1.0, 0.0]])
    M = outcome_masses(X, 6)
    for row, x in zip(M, X):
        np.testing.assert_allclose(row, outcome_masses(x, 6))


def test_multinomial_mass_rejects_bad_outcomes():
    with pytest.raises(ValueError):
        multinomial_mass([1, 0, 0], [0.5, 0.5])
    with pytest.raises(ValueError):
        multinomial_mass([-1, 2], [0.5, 0.5])
