"""Perturbed potentials of two-action games along y(t) = (t, 1 - t).

    f(x)   = int_0^{x1} (F1 - F2)(y(t)) dt          potential of the game
    h(x)   = -eta sum_i x_i log x_i                  entropy perturbation
    g(x)   = int_0^{x1} (G1 - G2)(y(t)) dt          sampling perturbation
    f^eta  = f + h,   f^{k,eta} = f + g + h

Integrals are composite Simpson sums anchored at f(0) = g(0) = 0.  Stationary
points use the analytic slope, not differences of the tabulated values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.optimize import brentq
from scipy.special import entr, roots_legendre

from .approximation import ApproximationValidityError, _premium_arrays, corrected_rule
from .choice import check_eta, logit
from .equilibrium import DegenerateGameError, nash_two_action_linear, two_action_beta
from .games import LinearGame

DEFAULT_NODES = 2001
STATIONARY_TOL = 1e-8


def _path(t):
    t = np.asarray(t, dtype=float)
    return np.stack([t, 1.0 - t], axis=-1)


def _require_two_actions(game):
    if game.n != 2:
        raise ValueError(f"potential functions are defined for two actions only, got n={game.n}")


def payoff_gap(game, t) -> np.ndarray:
    F = game.payoff(_path(t))
    return F[..., 0] - F[..., 1]


def distortion_gap(game, k: int, eta: float, t) -> np.ndarray:
    """G1 - G2 along the path; refuses where the correction is undefined."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    _, _, _, v_hat, q_hat = _premium_arrays(game, _path(t), k, eta)
    mult = 1.0 + v_hat + q_hat
    bad = np.any(mult <= 0, axis=-1)
    if bad.any():
        raise ApproximationValidityError(
            f"virtual payoff undefined on the path at t = {t[bad][0]:.6g}"
        )
    G = eta * np.log(mult)
    return G[..., 0] - G[..., 1]


def entropy_slope(eta: float, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        return -eta * (np.log(t) - np.log1p(-t))


def slope(game, k: int, eta: float, t, which: str = "f_k_eta") -> np.ndarray:
    """d/dx1 of f, f_eta or f_k_eta along the path."""
    s = payoff_gap(game, t)
    if which == "f":
        return s
    s = s + entropy_slope(eta, t)
    if which == "f_eta":
        return s
    if which == "f_k_eta":
        return s + distortion_gap(game, k, eta, t)
    raise ValueError(f"unknown potential {which!r}")


@dataclass
class PotentialProfile:
    x1: np.ndarray
    f: np.ndarray
    h: np.ndarray
    g: np.ndarray
    game: object = field(repr=False)
    k: int = 1
    eta: float = 1.0

    @property
    def f_eta(self) -> np.ndarray:
        return self.f + self.h

    @property
    def f_k_eta(self) -> np.ndarray:
        return self.f + self.g + self.h

    def rows(self):
        return np.column_stack([self.x1, self.f, self.h, self.g, self.f_eta, self.f_k_eta])


def potential_profile(game, k: int, eta: float, nodes: int = DEFAULT_NODES) -> PotentialProfile:
    _require_two_actions(game)
    eta = check_eta(eta)
    if nodes < 100:
        raise ValueError("potential grid needs at least 100 nodes")
    x1 = np.linspace(0.0, 1.0, nodes)
    f = cumulative_simpson(payoff_gap(game, x1), x=x1, initial=0.0)
    g = cumulative_simpson(distortion_gap(game, k, eta, x1), x=x1, initial=0.0)
    h = eta * (entr(x1) + entr(1.0 - x1))
    return PotentialProfile(x1, f, h, g, game, int(k), eta)


def _verify(profile, which, x1):
    game, k, eta = profile.game, profile.k, profile.eta
    x = np.array([x1, 1.0 - x1])
    if which == "f":
        return abs(payoff_gap(game, x1)) <= STATIONARY_TOL
    if which == "f_eta":
        rule = logit(game.payoff(x), eta)
    else:
        rule = corrected_rule(game, x, k, eta)
    return np.max(np.abs(rule - x)) <= STATIONARY_TOL


def stationary_points(profile: PotentialProfile, which: str = "f_k_eta") -> list:
    """Interior zeros of the slope, bracketed on the profile grid and refined."""
    game, k, eta = profile.game, profile.k, profile.eta
    fn = lambda t: float(slope(game, k, eta, np.array([t]), which)[0])
    # the boundary cells are bracketed too: roots can sit closer to a vertex
    # than one grid step, and the entropy barrier gives the slope a sign there
    edge = [] if which == "f" else [np.finfo(float).tiny]
    t = np.concatenate([edge, profile.x1[1:-1], [np.nextafter(1.0, 0.0)] if edge else []])
    s = slope(game, k, eta, t, which)
    roots = []
    for i in range(len(t)):
        if s[i] == 0.0:
            roots.append(float(t[i]))
        elif i + 1 < len(t) and s[i] * s[i + 1] < 0:
            roots.append(brentq(fn, t[i], t[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
    verified = [r for r in roots if _verify(profile, which, r)]
    return verified


# --- shape of the sampling perturbation -----------------------------------------


class ShapeInconclusiveError(RuntimeError):
    def __init__(self, message, witnesses):
        super().__init__(f"{message}; witness x1 values: {witnesses}")
        self.witnesses = witnesses


@dataclass
class GShape:
    tag: str
    extremum: float | None
    x_star: float | None
    boundary_slopes: tuple


QUASICONCAVE, ZERO, QUASICONVEX = "quasiconcave-max-at-x*", "zero", "quasiconvex-min-at-x*"


def classify_g_shape(game, k: int, eta: float, nodes: int = DEFAULT_NODES) -> GShape:
    """Certify the shape of g from the sign pattern of G1 - G2 on the grid."""
    if not isinstance(game, LinearGame) or game.n != 2:
        raise ValueError("shape classification needs a 2x2 linear game")
    eta = check_eta(eta)
    profile = potential_profile(game, k, eta, nodes)
    x1 = profile.x1
    gap = distortion_gap(game, k, eta, x1)
    bounds = (float(gap[0]), float(gap[-1]))
    if max(abs(b) for b in bounds) > 1e-8:
        raise ShapeInconclusiveError("boundary slope of g does not vanish", [0.0, 1.0])
    beta = two_action_beta(game.matrix)
    if beta == 0:
        if np.max(np.abs(gap)) > 1e-12:
            raise ShapeInconclusiveError("beta = 0 but g is not flat", list(x1[np.abs(gap) > 1e-12][:5]))
        return GShape(ZERO, None, None, bounds)
    try:
        roots = nash_two_action_linear(game.matrix)
    except DegenerateGameError:
        roots = ()
    interior = [r for r in roots if 0 < r < 1]
    if len(interior) != 1:
        raise ShapeInconclusiveError("no unique interior Nash equilibrium", list(interior))
    x_star = interior[0]
    cell = x1[1] - x1[0]
    sign = 1.0 if beta > 0 else -1.0
    inner = (x1 > 0) & (x1 < 1) & (np.abs(x1 - x_star) > cell)
    expected = np.where(x1 < x_star, sign, -sign)
    wrong = inner & (np.sign(gap) != expected)
    if wrong.any():
        raise ShapeInconclusiveError("sign pattern of G1 - G2 broken", list(x1[wrong][:5]))
    ext = float(x1[np.argmax(sign * profile.g)])
    if abs(ext - x_star) > cell:
        raise ShapeInconclusiveError("extremum of g away from x*", [ext, x_star])
    return GShape(QUASICONCAVE if beta > 0 else QUASICONVEX, ext, x_star, bounds)


# --- Lyapunov check ---------------------------------------------------------------------


def potential_increment(game, k: int, eta: float, a: float, b: float, order: int = 16) -> float:
    """f^{k,eta}(b) - f^{k,eta}(a) by Gauss-Legendre quadrature of the slope.

    Meant for short steps such as consecutive trajectory states; over wide
    intervals use the tabulated profile instead.
    """
    nodes, weights = roots_legendre(order)
    half = 0.5 * (b - a)
    t = 0.5 * (a + b) + half * nodes
    return float(half * np.dot(weights, slope(game, k, eta, t)))


def lyapunov_increments(game, k: int, eta: float, x1_path) -> np.ndarray:
    """Potential increments between consecutive states of a trajectory."""
    x1_path = np.asarray(x1_path, dtype=float)
    return np.array([
        potential_increment(game, k, eta, a, b) for a, b in zip(x1_path[:-1], x1_path[1:])
    ])
