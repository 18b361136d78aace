"""Second-order delta-method approximation of the sampling logit rule.

The sampling logit rule L is approximated by the logit rule with
multiplicative corrections,

    TL_i(x) = (1 + vhat_i(x) + qhat_i(x)) P_i(x),

where ``v`` (variance premium) is a Sigma-weighted quadratic form in the
logit-centered marginal payoffs and ``q`` (curvature premium) pairs the payoff
Hessians with Sigma.  Hats denote logit-weighted centering.

Two different inverse scales appear below and are kept apart by name:
``1/eta`` (inverse noise) inside logit derivatives, and ``premium_scale =
1/(2 k eta^2)`` in the two-action shift formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .choice import ChoiceRule, LogitRule, SamplingLogitRule, check_eta, logit, logit_center
from .equilibrium import DegenerateGameError, two_action_beta
from .games import LinearGame, PopulationGame, SeparableGame
from .sampling import covariance, simplex_lattice


class ApproximationValidityError(ValueError):
    """Some multiplier 1 + vhat_i + qhat_i is not positive."""


# --- derivatives of the logit rule -------------------------------------------


def logit_gradient(game, x, eta: float) -> np.ndarray:
    """Matrix whose row i is the gradient of P_i at x."""
    return LogitRule(game, eta).jacobian(x)


def _centered_marginals(game, x, p):
    grad = game.gradient(x)
    _, R = logit_center(grad, p)
    return R


def logit_hessians(game, x, eta: float) -> np.ndarray:
    """Stack of Hessians P_i''(x), shape ``(..., n, n, n)``."""
    eta = check_eta(eta)
    x = np.asarray(x, dtype=float)
    p = logit(game.payoff(x), eta)
    R = _centered_marginals(game, x, p)
    outer = R[..., :, :, None] * R[..., :, None, :]
    _, outer_hat = logit_center(outer, p)
    _, curv_hat = logit_center(game.hessians(x), p)
    pw = p[..., :, None, None]
    return pw * outer_hat / eta**2 + pw * curv_hat / eta


def logit_hessian(game, x, eta: float, i: int) -> np.ndarray:
    return logit_hessians(game, x, eta)[..., i, :, :]


# --- premiums ------------------------------------------------------------------


@dataclass
class PremiumReport:
    probabilities: np.ndarray
    v: np.ndarray
    q: np.ndarray
    v_hat: np.ndarray
    q_hat: np.ndarray

    @property
    def multiplier(self) -> np.ndarray:
        return 1.0 + self.v_hat + self.q_hat

    @property
    def valid(self) -> bool:
        return bool(np.all(self.multiplier > 0))

    def distortion(self, eta: float) -> np.ndarray:
        """Virtual payoff distortion G = eta log(1 + vhat + qhat)."""
        if not self.valid:
            raise ApproximationValidityError(f"nonpositive multiplier {self.multiplier}")
        return eta * np.log(self.multiplier)

    def rows(self, eta: float):
        """Per-action table rows: i, P, v, q, vhat, qhat, multiplier, G."""
        G = eta * np.log(np.where(self.multiplier > 0, self.multiplier, np.nan))
        return [
            (i, self.probabilities[i], self.v[i], self.q[i], self.v_hat[i],
             self.q_hat[i], self.multiplier[i], G[i])
            for i in range(len(self.v))
        ]


def _premium_arrays(game, x, k, eta):
    eta = check_eta(eta)
    if k < 1:
        raise ValueError(f"sample size must be >= 1, got {k}")
    x = np.asarray(x, dtype=float)
    p = logit(game.payoff(x), eta)
    S = covariance(x)
    R = _centered_marginals(game, x, p)
    v = np.einsum("...ij,...jk,...ik->...i", R, S, R) / (2 * k * eta**2)
    q = np.einsum("...ijk,...jk->...i", game.hessians(x), S) / (2 * k * eta)
    _, v_hat = logit_center(v, p)
    _, q_hat = logit_center(q, p)
    return p, v, q, v_hat, q_hat


def premiums(game, x, k: int, eta: float) -> PremiumReport:
    return PremiumReport(*_premium_arrays(game, x, k, eta))


def corrected_rule(game, x, k: int, eta: float) -> np.ndarray:
    """The approximated sampling logit rule TL at x."""
    p, _, _, v_hat, q_hat = _premium_arrays(game, x, k, eta)
    mult = 1.0 + v_hat + q_hat
    if np.any(mult <= 0):
        raise ApproximationValidityError(
            f"approximation invalid at x={np.asarray(x)}: multipliers {mult}"
        )
    return mult * p


def delta_expansion(game, x, k: int, eta: float) -> np.ndarray:
    """P(x) + (1/2k) <P_i''(x), Sigma(x)>, built from the logit Hessians."""
    x = np.asarray(x, dtype=float)
    H = logit_hessians(game, x, eta)
    return logit(game.payoff(x), eta) + np.einsum("...ijk,...jk->...i", H, covariance(x)) / (2 * k)


class CorrectedRule(ChoiceRule):
    """TL as a choice rule, usable by the solvers and integrators."""

    smooth = True

    def __init__(self, game, k: int, eta: float):
        self.game, self.k, self.eta = game, int(k), check_eta(eta)
        self.tag = f"approx-SLE(k={self.k},eta={self.eta:g})"

    def __call__(self, x):
        return corrected_rule(self.game, x, self.k, self.eta)


# --- virtual game ----------------------------------------------------------------


class VirtualGame(PopulationGame):
    """F + G with G = eta log(1 + vhat + qhat); logit of it equals TL.

    Derivatives of G are not available in closed form and are taken by
    central differences of the payoff.
    """

    def __init__(self, game, k: int, eta: float, fd_step: float = 1e-6):
        self.base, self.k, self.eta = game, int(k), check_eta(eta)
        self.fd_step = fd_step

    @property
    def n(self):
        return self.base.n

    def distortion(self, x):
        _, _, _, v_hat, q_hat = _premium_arrays(self.base, x, self.k, self.eta)
        mult = 1.0 + v_hat + q_hat
        if np.any(mult <= 0):
            raise ApproximationValidityError(f"virtual payoff undefined at x={np.asarray(x)}")
        return self.eta * np.log(mult)

    def payoff(self, x):
        return self.base.payoff(x) + self.distortion(x)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        h = self.fd_step
        cols = []
        for j in range(self.n):
            e = np.zeros(self.n)
            e[j] = h
            cols.append((self.payoff(x + e) - self.payoff(x - e)) / (2 * h))
        return np.stack(cols, axis=-1)

    def hessians(self, x):
        x = np.asarray(x, dtype=float)
        h = 1e-4
        n = self.n
        out = np.empty(x.shape[:-1] + (n, n, n))
        for a in range(n):
            for b in range(n):
                ea, eb = np.zeros(n), np.zeros(n)
                ea[a] += h
                eb[b] += h
                out[..., :, a, b] = (
                    self.payoff(x + ea + eb) - self.payoff(x + ea - eb)
                    - self.payoff(x - ea + eb) + self.payoff(x - ea - eb)
                ) / (4 * h * h)
        return out


def virtual_game(game, k: int, eta: float) -> VirtualGame:
    return VirtualGame(game, k, eta)


# --- two-action closed forms ---------------------------------------------------


@dataclass
class VarianceTerms:
    """Variance decomposition for a 2x2 linear game at one state."""

    sigma_A: float
    sigma: np.ndarray
    sigma_hat: np.ndarray


def two_action_variance_terms(A, x, eta: float) -> VarianceTerms:
    """sigma_A = beta^2 x1 x2, sigma_i = P_j^2 sigma_A, sigma_hat_i = P_j (1 - 2 P_i) sigma_A."""
    A = np.asarray(A.matrix if isinstance(A, LinearGame) else A, dtype=float)
    x = np.asarray(x, dtype=float)
    p = logit(A @ x, eta)
    sigma_A = two_action_beta(A) ** 2 * x[0] * x[1]
    other = p[::-1]
    return VarianceTerms(sigma_A, other**2 * sigma_A, other * (1 - 2 * p) * sigma_A)


def separable_premiums(game: SeparableGame, x, k: int, eta: float) -> PremiumReport:
    """Closed-form premiums of a separable two-action game."""
    if not isinstance(game, SeparableGame) or game.n != 2:
        raise ValueError("separable_premiums needs a two-action SeparableGame")
    eta = check_eta(eta)
    x = np.asarray(x, dtype=float)
    p = logit(game.payoff(x), eta)
    d1, d2 = game.marginal(x)
    c1, c2 = game.curvature(x)
    x1x2 = x[0] * x[1]
    sigma = (d1 + d2) ** 2 * x1x2
    vs = 1.0 / (2 * k * eta**2)
    qs = 1.0 / (2 * k * eta)
    other = p[::-1]
    v = vs * other**2 * sigma
    v_hat = vs * other * (1 - 2 * p) * sigma
    q = qs * np.array([c1, c2]) * np.array([x[0] * (1 - x[0]), x[1] * (1 - x[1])])
    q_hat = qs * other * np.array([c1 - c2, c2 - c1]) * x1x2
    return PremiumReport(p, v, q, v_hat, q_hat)


@dataclass
class InteriorShift:
    x_star: float
    x_tilde: float
    beta: float
    premium_scale: float
    v_star: float
    logit_term: float
    sampling_term: float

    @property
    def direction(self) -> int:
        """Predicted sign of x_tilde - x_star."""
        return int(np.sign(self.x_tilde - self.x_star))


def interior_shift_two_action(A, k: int, eta: float, margin: float = 0.05) -> InteriorShift:
    """First-order location of the interior approximate SLE of a 2x2 game.

    For x* below 1/2 the shift is -(eta/beta)[log((1-x*)/x*) + log(1+v*)];
    above 1/2 the sampling term flips sign.  States within ``margin`` of 1/2
    are refused because the two candidate branches are not separated there.
    """
    eta = check_eta(eta)
    A = np.asarray(A.matrix if isinstance(A, LinearGame) else A, dtype=float)
    beta = two_action_beta(A)
    if beta == 0:
        raise DegenerateGameError("beta = 0: no isolated interior equilibrium")
    (_, b), (_, d) = A
    x_star = (d - b) / beta
    if not (0 < x_star < 1):
        raise ValueError(f"no interior Nash equilibrium (x* = {x_star:g})")
    if abs(x_star - 0.5) < margin:
        raise ValueError(f"x* = {x_star:g} is within {margin} of 1/2; the shift formula is not valid")
    premium_scale = 1.0 / (2 * k * eta**2)
    v_star = premium_scale * beta**2 * x_star * (1 - x_star)
    logit_term = -(eta / beta) * np.log((1 - x_star) / x_star)
    side = -1.0 if x_star < 0.5 else 1.0
    sampling_term = side * (eta / beta) * np.log1p(v_star)
    return InteriorShift(x_star, x_star + logit_term + sampling_term, beta,
                         premium_scale, v_star, logit_term, sampling_term)


# --- error audit --------------------------------------------------------------------


def interior_grid(n: int, resolution: int, epsilon: float) -> np.ndarray:
    pts = simplex_lattice(n, resolution)
    return pts[np.all(pts >= epsilon - 1e-12, axis=1)]


DEFAULT_AUDIT_RESOLUTION = {2: 60, 3: 25}


@dataclass
class ErrorScalingReport:
    ks: np.ndarray
    sup_errors: np.ndarray
    slope: float
    fit_ks: np.ndarray
    eta: float
    epsilon: float

    @property
    def regime(self) -> str:
        return "eta<=1" if self.eta <= 1 else "eta>=1"

    @property
    def decreasing(self) -> bool:
        return bool(np.all(np.diff(self.sup_errors) <= 0))

    def rows(self):
        return [(int(k), float(e), self.slope) for k, e in zip(self.ks, self.sup_errors)]


def sup_error(game, k: int, eta: float, grid) -> float:
    exact = SamplingLogitRule(game, k, eta)(grid)
    approx = corrected_rule(game, grid, k, eta)
    return float(np.max(np.abs(exact - approx)))


def error_scaling_audit(game, eta: float, k_ladder, epsilon: float = 0.1,
                        resolution: int | None = None) -> ErrorScalingReport:
    """Sup-norm gap between L and TL over X_eps along a ladder of k.

    The log-log slope is fitted on the upper half of the ladder.
    """
    ks = np.asarray(k_ladder, dtype=int)
    if ks.ndim != 1 or len(ks) < 3:
        raise ValueError("error audit needs a ladder of at least three sample sizes")
    if np.any(np.diff(ks) <= 0):
        raise ValueError("sample-size ladder must be increasing")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    n = game.n
    resolution = resolution or DEFAULT_AUDIT_RESOLUTION.get(n, 12)
    grid = interior_grid(n, resolution, epsilon)
    if len(grid) == 0:
        raise ValueError("X_eps grid is empty; lower epsilon or raise the resolution")
    errs = np.array([sup_error(game, int(k), eta, grid) for k in ks])
    m = max(2, (len(ks) + 1) // 2)
    fit_ks = ks[-m:]
    slope = float(np.polyfit(np.log(fit_ks), np.log(errs[-m:]), 1)[0])
    return ErrorScalingReport(ks, errs, slope, fit_ks, float(eta), float(epsilon))
