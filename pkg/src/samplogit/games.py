"""Population games with payoffs, payoff gradients and payoff Hessians.

Every game here evaluates on batches: a state array of shape ``(..., n)``
yields payoffs ``(..., n)``, gradients ``(..., n, n)`` (row ``i`` is the
gradient of ``F_i``) and Hessian stacks ``(..., n, n, n)``.  Derivatives are
the algebraic ones on all of R^n; nothing is projected onto the simplex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

STATE_SUM_TOL = 1e-9


def as_state(x, tol: float = STATE_SUM_TOL) -> np.ndarray:
    """Validate a population state and renormalize small rounding drift.

    Raises ``ValueError`` for fewer than two actions, negative shares, or a
    total that misses 1 by more than ``tol``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError(f"a population state needs n >= 2 shares, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("population state has non-finite entries")
    if np.any(x < 0.0):
        raise ValueError(f"population state has negative shares: {x}")
    total = x.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"population shares sum to {total!r}, not 1")
    return x / total


def vertex(n: int, i: int) -> np.ndarray:
    """Pure population state e_i (0-based index)."""
    e = np.zeros(n)
    e[i] = 1.0
    return e


def barycenter(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


class PopulationGame:
    """Base class: a payoff map F with first and second derivatives.

    Subclasses implement :meth:`payoff`, :meth:`gradient` and
    :meth:`hessians`.  Instances are immutable.
    """

    n: int

    def payoff(self, x) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessians(self, x) -> np.ndarray:
        raise NotImplementedError

    def hessian(self, i: int, x) -> np.ndarray:
        """Hessian of the payoff of action ``i`` (0-based)."""
        return self.hessians(x)[..., i, :, :]

    def negated(self) -> "PopulationGame":
        return _NegatedGame(self)


@dataclass(frozen=True, eq=False)
class LinearGame(PopulationGame):
    """Random matching in a symmetric normal form game: F(x) = A x."""

    matrix: np.ndarray
    name: str = "linear"

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
            raise ValueError(f"payoff matrix must be square with n >= 2, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("payoff matrix has non-finite entries")
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def payoff(self, x):
        return np.asarray(x, dtype=float) @ self.matrix.T

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.matrix, x.shape[:-1] + self.matrix.shape)

    def hessians(self, x):
        x = np.asarray(x, dtype=float)
        n = self.n
        return np.zeros(x.shape[:-1] + (n, n, n))

    def negated(self) -> "LinearGame":
        return LinearGame(-self.matrix, name=f"neg-{self.name}")


@dataclass(frozen=True)
class Component:
    """A univariate payoff with its first two derivatives."""

    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    d2f: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def polynomial(cls, coefs: Sequence[float]) -> "Component":
        """Polynomial in increasing-degree coefficient order."""
        p = np.polynomial.Polynomial(np.asarray(coefs, dtype=float))
        dp, d2p = p.deriv(1), p.deriv(2)
        return cls(p, dp, d2p)


@dataclass(frozen=True, eq=False)
class SeparableGame(PopulationGame):
    """Each payoff F_i depends on the own share x_i only."""

    components: tuple
    name: str = "separable"

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 2:
            raise ValueError("a separable game needs at least two components")
        object.__setattr__(self, "components", comps)

    @property
    def n(self) -> int:
        return len(self.components)

    def _apply(self, attr, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for i, c in enumerate(self.components):
            out[..., i] = getattr(c, attr)(x[..., i])
        return out

    def payoff(self, x):
        return self._apply("f", x)

    def marginal(self, x):
        """Own-share derivatives F_i'(x_i), shape ``(..., n)``."""
        return self._apply("df", x)

    def curvature(self, x):
        """Own-share second derivatives F_i''(x_i), shape ``(..., n)``."""
        return self._apply("d2f", x)

    def gradient(self, x):
        d = self.marginal(x)
        return d[..., :, None] * np.eye(self.n)

    def hessians(self, x):
        c = self.curvature(x)
        n = self.n
        out = np.zeros(c.shape[:-1] + (n, n, n))
        idx = np.arange(n)
        out[..., idx, idx, idx] = c
        return out


@dataclass(frozen=True, eq=False)
class _NegatedGame(PopulationGame):
    base: PopulationGame

    @property
    def n(self):
        return self.base.n

    def payoff(self, x):
        return -self.base.payoff(x)

    def gradient(self, x):
        return -self.base.gradient(x)

    def hessians(self, x):
        return -self.base.hessians(x)


# --- catalog -----------------------------------------------------------------


def make_coordination_2x2(s: float, t: float) -> LinearGame:
    """Pure coordination game diag(s, t) with s > t > 0; e_1 is risk dominant."""
    if not (t > 0 and s > t):
        raise ValueError(f"coordination game needs s > t > 0, got s={s}, t={t}")
    return LinearGame(np.array([[s, 0.0], [0.0, t]]), name=f"coordination({s:g},{t:g})")


def coordination_interior_nash(s: float, t: float) -> float:
    return t / (s + t)


def make_young_game() -> LinearGame:
    """Young's 3x3 game with three strict equilibria."""
    A = np.array([[6.0, 0.0, 0.0], [5.0, 7.0, 5.0], [0.0, 5.0, 8.0]])
    return LinearGame(A, name="young")


def make_bilingual_game(g: float, c: float) -> LinearGame:
    """Two technologies plus a costly compatible (bilingual) option."""
    if not (0 < g < 1):
        raise ValueError(f"bilingual game needs 0 < g < 1, got g={g}")
    if not (0 < c < g / (1 + g)):
        raise ValueError(f"bilingual game needs 0 < c < g/(1+g) = {g / (1 + g):.6g}, got c={c}")
    A = np.array(
        [
            [1 + g, 0.0, 1 + g],
            [1.0, 1.0, 1.0],
            [1 + g - c, 1 - c, 1 + g - c],
        ]
    )
    return LinearGame(A, name=f"bilingual({g:g},{c:g})")


def make_congestion_game() -> SeparableGame:
    """F(x) = (-x_1, -2 x_2^2); unique Nash equilibrium at x_1 = 1/2."""
    return SeparableGame(
        (Component.polynomial([0.0, -1.0]), Component.polynomial([0.0, 0.0, -2.0])),
        name="congestion",
    )


CATALOG = {
    "coordination": make_coordination_2x2,
    "young": make_young_game,
    "bilingual": make_bilingual_game,
    "congestion": make_congestion_game,
}


def game_from_config(record: dict) -> PopulationGame:
    """Build a game from a plain config record.

    ``{"kind": "linear", "matrix": [[...], ...]}``,
    ``{"kind": "separable", "components": [[c0, c1, ...], ...]}`` (polynomial
    coefficients in increasing degree), or
    ``{"kind": "catalog", "name": "coordination", "s": 2, "t": 1}``.
    An optional ``negate = true`` flips all payoffs.
    """
    record = dict(record)
    kind = record.pop("kind", "catalog")
    negate = bool(record.pop("negate", False))
    if kind == "linear":
        game = LinearGame(np.asarray(record["matrix"], dtype=float))
    elif kind == "separable":
        game = SeparableGame(tuple(Component.polynomial(c) for c in record["components"]))
    elif kind == "catalog":
        name = record.pop("name")
        if name not in CATALOG:
            raise ValueError(f"unknown catalog game {name!r}; choose from {sorted(CATALOG)}")
        game = CATALOG[name](**record)
    else:
        raise ValueError(f"unknown game kind {kind!r}")
    return game.negated() if negate else game

