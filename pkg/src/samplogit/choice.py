"""Choice rules: best response, sampling best response, logit, sampling logit.

Each rule is a small callable object mapping states ``(..., n)`` to mixed
strategies ``(..., n)``; the module-level functions are single-state
conveniences built on them.  Rules that depend on the sample outcomes
precompute the per-outcome response once, so repeated evaluation along a
trajectory only recomputes the multinomial masses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import softmax

from .games import PopulationGame
from .sampling import _outcomes, enumerate_outcomes, outcome_masses

BR_TOL = 1e-9

Selection = Union[str, Callable[[np.ndarray, np.ndarray], np.ndarray]]


def check_eta(eta: float) -> float:
    eta = float(eta)
    if not (eta > 0 and np.isfinite(eta)):
        raise ValueError(f"noise level eta must be positive and finite, got {eta}")
    return eta


def logit(payoffs, eta: float) -> np.ndarray:
    """exp(F/eta) normalized over the last axis (max-shifted)."""
    return softmax(np.asarray(payoffs, dtype=float) / check_eta(eta), axis=-1)


@dataclass(frozen=True)
class BestResponseSet:
    actions: tuple
    tolerance: float

    def __contains__(self, i):
        return i in self.actions


def _br_mask(payoffs: np.ndarray, tol: float) -> np.ndarray:
    return payoffs >= payoffs.max(axis=-1, keepdims=True) - tol


def select_best_response(payoffs, tol: float = BR_TOL, selection: Selection = "uniform"):
    """Mixed best response picked from the argmax set.

    ``"uniform"`` mixes evenly over ties, ``"lowest"`` takes the lowest index;
    a callable receives ``(mask, payoffs)`` and returns the mixture.
    """
    payoffs = np.asarray(payoffs, dtype=float)
    mask = _br_mask(payoffs, tol)
    if callable(selection):
        return np.asarray(selection(mask, payoffs), dtype=float)
    if selection == "uniform":
        return mask / mask.sum(axis=-1, keepdims=True)
    if selection == "lowest":
        first = np.argmax(mask, axis=-1)
        return np.eye(payoffs.shape[-1])[first]
    raise ValueError(f"unknown tie selection {selection!r}")


def choice_gap(p, w) -> np.ndarray:
    """p - w for two points of the simplex, without cancellation near vertices.

    Where ``w_i > 1/2`` the difference is formed from the complements
    ``(1 - w_i) - (1 - p_i)``, each summed from the other coordinates, so tiny
    gaps next to a pure state keep their relative accuracy.
    """
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    others = 1.0 - np.eye(p.shape[-1])
    return np.where(w > 0.5, w @ others - p @ others, p - w)


class ChoiceRule:
    """Common interface: ``rule(x)`` plus a short ``tag`` for reports."""

    game: PopulationGame
    tag: str

    @property
    def n(self) -> int:
        return self.game.n

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def drift(self, x) -> np.ndarray:
        """rule(x) - x, the mean-dynamic velocity and fixed-point residual."""
        x = np.asarray(x, dtype=float)
        return choice_gap(self(x), x)

    @property
    def smooth(self) -> bool:
        return False


class BestResponseRule(ChoiceRule):
    def __init__(self, game, tol: float = BR_TOL, selection: Selection = "uniform"):
        self.game, self.tol, self.selection = game, tol, selection
        self.tag = "BR"

    def __call__(self, x):
        return select_best_response(self.game.payoff(x), self.tol, self.selection)


class LogitRule(ChoiceRule):
    def __init__(self, game, eta: float):
        self.game, self.eta = game, check_eta(eta)
        self.tag = f"logit(eta={self.eta:g})"

    smooth = True

    def __call__(self, x):
        return logit(self.game.payoff(x), self.eta)

    def jacobian(self, x) -> np.ndarray:
        """Rows are gradients of P_i: (1/eta) P_i (F_i' - sum_l P_l F_l')."""
        x = np.asarray(x, dtype=float)
        p = self(x)
        grad = self.game.gradient(x)
        centered = grad - np.einsum("...l,...lj->...j", p, grad)[..., None, :]
        return p[..., :, None] * centered / self.eta


class _SampledRule(ChoiceRule):
    """Expectation of a per-sample response over Z^k.

    Since the empirical state averages to x, the drift is also an
    expectation: rule(x) - x = sum_z M^k(z|x) (response(z) - z/k).
    """

    def __init__(self, game, k: int, response: np.ndarray):
        self.game, self.k = game, int(k)
        self.outcomes = enumerate_outcomes(game.n, self.k)
        self.response = response
        self.response.setflags(write=False)
        self.sample_drift = choice_gap(response, self.outcomes / self.k)
        self.sample_drift.setflags(write=False)

    def __call__(self, x):
        return outcome_masses(x, self.k) @ self.response

    def drift(self, x):
        return outcome_masses(x, self.k) @ self.sample_drift


class SamplingBestResponseRule(_SampledRule):
    def __init__(self, game, k: int, tol: float = BR_TOL, selection: Selection = "uniform"):
        w = enumerate_outcomes(game.n, k) / k
        super().__init__(game, k, select_best_response(game.payoff(w), tol, selection))
        self.tol, self.selection = tol, selection
        self.tag = f"sampling-BR(k={self.k})"


class SamplingLogitRule(_SampledRule):
    def __init__(self, game, k: int, eta: float):
        eta = check_eta(eta)
        w = enumerate_outcomes(game.n, k) / k
        super().__init__(game, k, logit(game.payoff(w), eta))
        self.eta = eta
        self.tag = f"SLE(k={self.k},eta={self.eta:g})"
        self._shift_index = None

    smooth = True

    def _expectation_derivative(self, x, values):
        # d M^k(z|x)/dx_j = k M^{k-1}(z - e_j|x): no division by x_j
        x = np.asarray(x, dtype=float)
        n, k = self.n, self.k
        if self._shift_index is None:
            lookup = {tuple(z): s for s, z in enumerate(self.outcomes.tolist())}
            lower = _outcomes(n, k - 1)
            eye = np.eye(n, dtype=np.int64)
            self._shift_index = [
                np.array([lookup[tuple(z + eye[j])] for z in lower]) for j in range(n)
            ]
        lower_masses = _lower_masses(x, k - 1)
        cols = [k * (lower_masses @ values[idx]) for idx in self._shift_index]
        return np.stack(cols, axis=-1)

    def jacobian(self, x) -> np.ndarray:
        """Exact Jacobian of the polynomial map x -> sum_z M^k(z|x) P(z/k)."""
        return self._expectation_derivative(x, self.response)

    def drift_jacobian(self, x) -> np.ndarray:
        """Derivative of sum_z M^k(z|x) (P(z/k) - z/k).

        Along the simplex it equals ``jacobian(x) - I`` up to a term
        ``(k-1) x 1^T`` that annihilates tangent directions; it is formed
        without subtracting the identity.
        """
        return self._expectation_derivative(x, self.sample_drift)


def _lower_masses(x, k):
    if k == 0:
        return np.ones(1)
    return outcome_masses(x, k, cap=np.inf)


def make_rule(kind: str, game, k: int | None = None, eta: float | None = None, **kw) -> ChoiceRule:
    """Build a rule from a dynamics tag: BRD, SBRD, LD or SLD."""
    kind = kind.upper()
    if kind in ("BR", "BRD"):
        return BestResponseRule(game, **kw)
    if kind in ("SBR", "SBRD"):
        return SamplingBestResponseRule(game, k, **kw)
    if kind in ("LOGIT", "LD"):
        return LogitRule(game, eta)
    if kind in ("SL", "SLD"):
        return SamplingLogitRule(game, k, eta)
    raise ValueError(f"unknown rule {kind!r}")


# --- single-state conveniences -----------------------------------------------


def best_response_set(game, x, tol: float = BR_TOL) -> BestResponseSet:
    if tol < 0:
        raise ValueError("tolerance must be nonnegative")
    f = game.payoff(np.asarray(x, dtype=float))
    return BestResponseSet(tuple(int(i) for i in np.flatnonzero(_br_mask(f, tol))), tol)


def logit_choice(game, x, eta: float) -> np.ndarray:
    return LogitRule(game, eta)(x)


def sampling_best_response(game, x, k: int, selection: Selection = "uniform",
                           tol: float = BR_TOL) -> np.ndarray:
    return SamplingBestResponseRule(game, k, tol, selection)(x)


def sampling_logit(game, x, k: int, eta: float) -> np.ndarray:
    return SamplingLogitRule(game, k, eta)(x)


def logit_center(values, p):
    """Logit-weighted mean and centered values.

    ``p`` has shape ``(..., n)``; ``values`` has shape ``(..., n, *rest)`` with
    one entry per action.  Returns ``(mean, centered)`` where the centered
    values have zero ``p``-weighted sum.
    """
    values = np.asarray(values, dtype=float)
    p = np.asarray(p, dtype=float)
    axis = p.ndim - 1
    if values.shape[: p.ndim] != p.shape:
        raise ValueError(f"values {values.shape} do not match weights {p.shape}")
    weights = p.reshape(p.shape + (1,) * (values.ndim - p.ndim))
    mean = (weights * values).sum(axis=axis)
    return mean, values - np.expand_dims(mean, axis)
