"""Multinomial samples of size k drawn from a population state.

Outcomes are integer compositions z of k into n parts, listed in
reverse-lexicographic order, e.g. ``(2,0), (1,1), (0,2)``.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np
from scipy.special import gammaln, xlogy

DEFAULT_CAPS = {2: 512, 3: 64}
DEFAULT_CAP_LARGE_N = 24


class SampleSizeError(ValueError):
    """Sample size outside the enumeration cap."""


def default_cap(n: int) -> int:
    return DEFAULT_CAPS.get(n, DEFAULT_CAP_LARGE_N)


def check_sample_size(n: int, k: int, cap: int | None = None) -> None:
    if n < 2:
        raise ValueError(f"need n >= 2 actions, got {n}")
    cap = default_cap(n) if cap is None else cap
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise SampleSizeError(f"sample size must be a positive integer, got {k!r}")
    if k > cap:
        raise SampleSizeError(
            f"k={k} exceeds the enumeration cap {cap} for n={n} "
            f"({comb(k + n - 1, n - 1)} outcomes)"
        )


def _compositions(n: int, k: int):
    if n == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in _compositions(n - 1, k - first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _outcomes(n: int, k: int) -> np.ndarray:
    z = np.array(list(_compositions(n, k)), dtype=np.int64)
    z.setflags(write=False)
    return z


def enumerate_outcomes(n: int, k: int, cap: int | None = None) -> np.ndarray:
    """All z in Z^k as a read-only ``(m, n)`` integer array."""
    check_sample_size(n, k, cap)
    return _outcomes(n, k)


def simplex_lattice(n: int, m: int) -> np.ndarray:
    """Barycentric lattice {z/m : z in Z^m}, no cap applied."""
    if m < 1:
        raise ValueError(f"lattice resolution must be >= 1, got {m}")
    return _outcomes(n, m) / m


@lru_cache(maxsize=None)
def _log_coefficients(n: int, k: int) -> np.ndarray:
    z = _outcomes(n, k)
    lc = gammaln(k + 1.0) - gammaln(z + 1.0).sum(axis=1)
    lc.setflags(write=False)
    return lc


def outcome_masses(x, k: int, cap: int | None = None) -> np.ndarray:
    """Masses M^k(z|x) for every outcome, shape ``(..., m)``.

    Evaluated in log space; ``0**0 = 1`` at boundary states.  ``x`` is used as
    given (callers keep it on the simplex), so the polynomial extension of the
    multinomial law is what gets evaluated off the simplex.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    z = enumerate_outcomes(n, k, cap)
    logm = _log_coefficients(n, k) + xlogy(z, x[..., None, :]).sum(axis=-1)
    return np.exp(logm)


def multinomial_mass(z, x) -> float:
    """Probability of drawing the composition ``z`` at state ``x``."""
    z = np.asarray(z, dtype=np.int64)
    x = np.asarray(x, dtype=float)
    if z.shape != x.shape:
        raise ValueError(f"outcome and state dimensions differ: {z.shape} vs {x.shape}")
    if np.any(z < 0):
        raise ValueError("outcome counts must be nonnegative")
    k = int(z.sum())
    logm = gammaln(k + 1.0) - gammaln(z + 1.0).sum() + xlogy(z, x).sum()
    return float(np.exp(logm))


def covariance(x) -> np.ndarray:
    """Sigma(x) = diag(x) - x x^T; the multinomial covariance of w is Sigma/k."""
    x = np.asarray(x, dtype=float)
    return x[..., :, None] * np.eye(x.shape[-1]) - x[..., :, None] * x[..., None, :]


def empirical_moments(x, k: int):
    """Exact mean and covariance of w = z/k by full enumeration."""
    z = enumerate_outcomes(len(x), k)
    m = outcome_masses(x, k)
    w = z / k
    mean = m @ w
    d = w - np.asarray(x, dtype=float)
    cov = np.einsum("s,si,sj->ij", m, d, d)
    return mean, cov
