"""Fixed points of choice rules: sampling logit, logit, and Nash for 2x2 games.

The generic solver runs damped iteration ``x <- (1-a) x + a rule(x)`` and then
polishes with Newton's method in log coordinates ``u = log x``.  Working in
``u`` keeps relative accuracy in shares that are many orders of magnitude
below 1, which matters for small noise levels where an equilibrium sits
within ``exp(-s/eta)`` of a vertex.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import qmc

from .choice import LogitRule, SamplingLogitRule, check_eta, logit
from .games import LinearGame, PopulationGame, as_state, barycenter

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12


class DegenerateGameError(ValueError):
    pass


@dataclass
class EquilibriumResult:
    state: np.ndarray
    residual: float
    rule: str
    solver: str
    converged: bool = True
    iterations: int = 0

    @property
    def x1(self) -> float:
        return float(self.state[0])


def residual(rule, x) -> float:
    """||rule(x) - x||_inf, from the rule's cancellation-free drift."""
    return float(np.max(np.abs(rule.drift(np.asarray(x, dtype=float)))))


def _fd_jacobian(rule, x, h=1e-7):
    n = len(x)
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (rule(x + e) - rule(x - e)) / (2 * h)
    return J


def _drift_jacobian(rule, jacobian):
    """Derivative of the drift; only its action on tangent vectors matters."""
    if jacobian is None:
        exact = getattr(rule, "drift_jacobian", None)
        if exact is not None:
            return exact
        jacobian = getattr(rule, "jacobian", None) or (lambda y: _fd_jacobian(rule, y))
    return lambda y: jacobian(y) - np.eye(len(y))


def _border_scale(block):
    # the normalization row is scaled to the Jacobian block, otherwise a drift
    # that is tiny everywhere (small noise) falls below the lstsq cutoff
    scale = np.max(np.abs(block))
    return scale if scale > 0 else 1.0


def _newton_linear(rule, x, djac, max_steps=60):
    """Bordered Newton in x: [-D; 1^T] dx = [g; 0] with g the drift, kept positive."""
    n = len(x)
    res = residual(rule, x)
    steps = 0
    for steps in range(1, max_steps + 1):
        g = rule.drift(x)
        D = djac(x)
        system = np.vstack([-D, _border_scale(D) * np.ones(n)])
        dx = np.linalg.lstsq(system, np.append(g, 0.0), rcond=None)[0]
        neg = dx < 0
        lam = min(1.0, 0.99 * np.min(x[neg] / -dx[neg])) if neg.any() else 1.0
        for _ in range(40):
            x_new = x + lam * dx
            x_new = x_new / x_new.sum()
            res_new = residual(rule, x_new) if np.all(x_new > 0) else np.inf
            if res_new < res:
                break
            lam *= 0.5
        else:
            break
        x, res = x_new, res_new
        if res == 0.0:
            break
    return x, steps


def _log_residual(rule, x):
    g = rule.drift(x)
    return g, -np.log1p(g / x)


def _newton_log(rule, x, djac, max_steps=30):
    """Newton on log x - log rule(x) = 0 for relative accuracy in small shares."""
    u = np.log(x)
    steps = 0
    g, r = _log_residual(rule, x)
    for steps in range(1, max_steps + 1):
        rnorm = np.max(np.abs(r))
        if rnorm == 0.0:
            break
        L = x + g
        # d r / d u = diag(g/L) - diag(1/L) D diag(x), no identity subtracted
        Ju = np.diag(g / L) - djac(x) * x[None, :] / L[:, None]
        # border row x.du = 0 pins the normalization direction
        system = np.vstack([Ju, _border_scale(Ju) * x])
        du = np.linalg.lstsq(system, np.append(r, 0.0), rcond=None)[0]
        u_new = u - du
        u_new -= logsumexp(u_new)
        x_new = np.exp(u_new)
        with np.errstate(all="ignore"):
            g_new, r_new = _log_residual(rule, x_new)
        if not (np.all(np.isfinite(r_new)) and np.max(np.abs(r_new)) < rnorm):
            break
        u, x, g, r = u_new, x_new, g_new, r_new
    return x, steps


def _polish(rule, x, djac, tol):
    """Newton polish; returns (x, converged, steps)."""
    x, s1 = _newton_linear(rule, x, djac)
    if not np.all(x > 0):
        return x, False, s1
    res = residual(rule, x)
    y, s2 = _newton_log(rule, x, djac)
    if residual(rule, y) <= max(res, tol):
        x, res = y, residual(rule, y)
    return x, res <= tol, s1 + s2


def solve_fixed_point(
    rule,
    x0,
    *,
    jacobian=None,
    damping: float = 0.5,
    tol: float = DEFAULT_TOL,
    max_iter: int = 20_000,
    newton: bool = True,
    newton_switch: float = 1e-6,
    damped_steps: int | None = None,
    solver_tag: str = "iteration",
) -> EquilibriumResult:
    """Fixed point of a strictly positive choice rule on the simplex.

    Damped iteration is run until the residual falls below ``newton_switch``
    (or ``damped_steps`` iterations pass), then Newton polishing takes over;
    if Newton stalls, damped iteration resumes.  ``damped_steps=0`` gives a
    pure Newton solve, which also reaches unstable fixed points.  A
    ``jacobian`` of the rule may be supplied; by default the rule's own
    (exact) derivative is used, with finite differences as the fallback.
    """
    if not (0 < damping <= 1):
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    x = as_state(x0)
    djac = _drift_jacobian(rule, jacobian)
    tag = getattr(rule, "tag", "rule")
    budget = 200 if damped_steps is None else damped_steps
    it = 0
    res = residual(rule, x)
    while it < max_iter:
        burst = 0
        while res > max(tol, newton_switch if newton else tol) and burst < budget and it < max_iter:
            x = x + damping * rule.drift(x)
            x /= x.sum()
            res = residual(rule, x)
            it += 1
            burst += 1
        if not newton:
            if res <= tol or it >= max_iter:
                break
            continue
        if np.all(x > 0):
            xn, ok, steps = _polish(rule, x, djac, tol)
            it += steps
            if ok:
                x = xn
                res = residual(rule, x)
                return EquilibriumResult(x, res, tag, solver_tag + "+newton", True, it)
        if damped_steps == 0:
            break
        budget = max(budget, 1000)
        if res <= tol:
            break
    return EquilibriumResult(x, res, tag, solver_tag, res <= tol, it)


# --- sampling logit equilibria ------------------------------------------------


def solve_sle_fixed_point(game, k: int, eta: float, x0=None, damping: float = 0.5,
                          tol: float = DEFAULT_TOL, max_iter: int = 20_000) -> EquilibriumResult:
    rule = SamplingLogitRule(game, k, eta)
    x0 = barycenter(game.n) if x0 is None else x0
    out = solve_fixed_point(rule, x0, damping=damping, tol=tol, max_iter=max_iter)
    if not out.converged:
        log.warning("SLE solve did not converge: residual %.3e after %d iterations",
                    out.residual, out.iterations)
    return out


def stationary_distribution(T) -> np.ndarray:
    """Stationary vector of a column-stochastic matrix (T x = x) by GTH elimination.

    The Grassmann-Taksar-Heyman scheme never subtracts, so tiny stationary
    masses keep full relative precision even for nearly decomposable chains.
    """
    P = np.array(T, dtype=float).T.copy()  # row-stochastic
    n = P.shape[0]
    for m in range(n - 1, 0, -1):
        s = P[m, :m].sum()
        P[:m, m] /= s
        P[:m, :m] += np.outer(P[:m, m], P[m, :m])
    pi = np.zeros(n)
    pi[0] = 1.0
    for m in range(1, n):
        pi[m] = pi[:m] @ P[:m, m]
    return pi / pi.sum()


def power_iteration(T, tol: float = 1e-14, max_squarings: int = 200) -> np.ndarray:
    """Perron vector of a positive column-stochastic matrix by powers of T.

    T is squared repeatedly (each squaring doubles the number of power steps)
    until all columns of T^(2^m) agree to ``tol``; with only positive entries
    there is no cancellation, so slowly mixing chains are handled too.
    """
    S = np.array(T, dtype=float)
    for _ in range(max_squarings):
        S = S @ S
        S /= S.sum(axis=0, keepdims=True)
        if np.max(S.max(axis=1) - S.min(axis=1)) <= tol:
            x = S.mean(axis=1)
            return x / x.sum()
    raise RuntimeError("power iteration did not converge")


def single_sample_matrix(game, eta: float) -> np.ndarray:
    """Pi[i, j] = P_i(e_j), so that L^{1,eta}(x) = Pi x."""
    return logit(game.payoff(np.eye(game.n)), eta).T


def solve_sle_k1(game, eta: float, method: str = "gth") -> EquilibriumResult:
    """Unique SLE for single-observation sampling: the Perron vector of Pi."""
    Pi = single_sample_matrix(game, eta)
    if method == "gth":
        x = stationary_distribution(Pi)
    elif method == "power":
        x = power_iteration(Pi)
    else:
        raise ValueError(f"unknown method {method!r}")
    rule = SamplingLogitRule(game, 1, eta)
    return EquilibriumResult(x, residual(rule, x), rule.tag, "eigenvector")


def _quadratic_unit_root(a, b, c):
    """Root in (0, 1) of a y^2 + b y + c with c > 0 > a + b + c."""
    if abs(a) < 1e-14:
        return -c / b
    disc = b * b - 4 * a * c
    q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
    lo, hi = sorted((q / a, c / q))
    # f(0) > 0 > f(1): an upward parabola crosses first, a downward one last
    root = lo if a > 0 else hi
    if not (0.0 < root <= 1.0 + 1e-12):
        raise ArithmeticError(f"no root in (0,1) for coefficients {(a, b, c)}")
    return min(root, 1.0)


def k2_quadratic(game, eta: float, action: int = 0):
    """Coefficients (a, b, c) of f(y) = L_i(y) - y for k = 2, n = 2, y = x_i.

    With q_j the choice probability of action i after seeing j copies of it
    and qbar_j = 1 - q_j taken from the other action's probability,
    a = (qbar_1 - qbar_2) - (q_1 - q_0), b = (q_1 - qbar_1) - 2 q_0, c = q_0;
    these groupings avoid the cancellation in 2 (q_1 - q_0) - 1.
    """
    if game.n != 2:
        raise ValueError("the k=2 quadratic construction needs a two-action game")
    other = 1 - action
    states = np.array([np.eye(2)[other], [0.5, 0.5], np.eye(2)[action]])
    P = logit(game.payoff(states), eta)
    q0, q1, _ = P[:, action]
    _, qbar1, qbar2 = P[:, other]
    return (qbar1 - qbar2) - (q1 - q0), (q1 - qbar1) - 2 * q0, q0


def solve_sle_k2_two_action(game, eta: float) -> EquilibriumResult:
    """Unique SLE of a two-action game with two observations.

    The quadratic is solved once for each action's share and the smaller
    share is taken from its own equation, so both coordinates are accurate.
    """
    check_eta(eta)
    y = _quadratic_unit_root(*k2_quadratic(game, eta, 0))
    u = _quadratic_unit_root(*k2_quadratic(game, eta, 1))
    x = np.array([y, 1 - y]) if y <= u else np.array([1 - u, u])
    rule = SamplingLogitRule(game, 2, eta)
    return EquilibriumResult(x, residual(rule, x), rule.tag, "quadratic")


def coordination_k1_sle(s: float, t: float, eta: float) -> np.ndarray:
    """Closed-form k=1 SLE of the coordination game diag(s, t)."""
    a, b = np.exp(-(s - t) / eta), np.exp(-s / eta)
    den = 1 + a + 2 * b
    return np.array([(1 + b) / den, (a + b) / den])


# --- multistart ---------------------------------------------------------------


def multistart_seeds(n: int, count: int = 20, pull: float = 0.1) -> np.ndarray:
    """Barycenter, vertices pulled inward, then Halton points mapped to the simplex."""
    seeds = [barycenter(n)]
    for i in range(n):
        seeds.append((1 - pull) * np.eye(n)[i] + pull * barycenter(n))
    extra = max(count - len(seeds), 0)
    if extra:
        u = qmc.Halton(d=n, scramble=False).random(extra + 1)[1:]
        y = -np.log(u)
        seeds.extend(y / y.sum(axis=1, keepdims=True))
    return np.array(seeds)


def interior_lattice(n: int, m: int) -> np.ndarray:
    """Lattice points z/m with every z_i >= 1."""
    from .sampling import simplex_lattice

    pts = simplex_lattice(n, m)
    return pts[np.all(pts > 0, axis=1)]


def cluster_states(states, radius: float = 1e-6):
    """Greedy clustering after lexicographic sort; returns list of index lists."""
    states = np.asarray(states)
    order = np.lexsort(states.T[::-1])
    clusters: list[list[int]] = []
    for i in order:
        for c in clusters:
            if np.max(np.abs(states[c[0]] - states[i])) < radius:
                c.append(int(i))
                break
        else:
            clusters.append([int(i)])
    return clusters


def diameter(states) -> float:
    states = np.asarray(states)
    if len(states) < 2:
        return 0.0
    d = np.abs(states[:, None, :] - states[None, :, :]).max(axis=-1)
    return float(d.max())


@dataclass
class MultistartReport:
    seeds: np.ndarray
    results: list
    clusters: list = field(default_factory=list)

    @property
    def representatives(self) -> np.ndarray:
        return np.array([self.results[c[0]].state for c in self.clusters])

    @property
    def diameters(self) -> list:
        return [diameter([self.results[i].state for i in c]) for c in self.clusters]

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.results)

    @property
    def unique(self) -> bool:
        return len(self.clusters) == 1


def multistart(solve, seeds, radius: float = 1e-6) -> MultistartReport:
    """Run ``solve(seed)`` from every seed and cluster the converged states."""
    seeds = np.asarray(seeds, dtype=float)
    results = [solve(s) for s in seeds]
    good = [i for i, r in enumerate(results) if r.converged]
    groups = cluster_states([results[i].state for i in good], radius) if good else []
    return MultistartReport(seeds, results, [[good[j] for j in g] for g in groups])


def sle_multistart(game, k: int, eta: float, seeds=None, tol: float = DEFAULT_TOL) -> MultistartReport:
    seeds = multistart_seeds(game.n) if seeds is None else seeds
    rule = SamplingLogitRule(game, k, eta)
    return multistart(lambda s: solve_fixed_point(rule, s, tol=tol), seeds)


# --- logit equilibrium continuation ------------------------------------------


@dataclass
class EquilibriumCurve:
    etas: np.ndarray
    states: np.ndarray
    residuals: np.ndarray
    branch: int
    truncated: bool = False

    def endpoint(self) -> np.ndarray:
        return self.states[-1]


def _corrector(game, eta, guess, tol):
    rule = LogitRule(game, eta)
    return solve_fixed_point(rule, guess, tol=tol, damped_steps=0, solver_tag="continuation")


def solve_logit_continuation(
    game,
    eta_grid,
    seeds,
    tol: float = 1e-12,
    max_jump: float = 0.05,
    min_step: float = 1e-4,
    dedup: float = 1e-8,
) -> list:
    """Trace branches of x = P^eta(x) along a decreasing eta grid.

    Each seed is solved at the first grid value, then continued with the
    previous solution (secant-extrapolated) as the predictor and a Newton
    corrector.  A failed or too-distant correction halves the eta step down
    to ``min_step``; below that the branch is truncated and flagged.
    """
    etas = np.asarray(eta_grid, dtype=float)
    if etas.ndim != 1 or len(etas) < 1 or np.any(etas <= 0) or np.any(np.diff(etas) >= 0):
        raise ValueError("eta grid must be positive and strictly decreasing")
    curves = []
    for seed in np.asarray(seeds, dtype=float):
        first = _corrector(game, etas[0], seed, tol)
        if not first.converged:
            log.info("continuation seed %s failed at eta=%g", seed, etas[0])
            continue
        states, res = [first.state], [first.residual]
        prev_eta, prev_x, slope = etas[0], first.state, np.zeros(game.n)
        truncated = False
        for target in etas[1:]:
            cur_eta, cur_x = prev_eta, prev_x
            step = target - cur_eta
            while cur_eta > target:
                nxt = max(cur_eta + step, target)
                guess = np.clip(cur_x + slope * (nxt - cur_eta), 1e-300, None)
                sol = _corrector(game, nxt, guess / guess.sum(), tol)
                if sol.converged and np.max(np.abs(sol.state - cur_x)) < max_jump:
                    slope = (sol.state - cur_x) / (nxt - cur_eta)
                    cur_eta, cur_x = nxt, sol.state
                    step = target - cur_eta if cur_eta > target else step
                elif abs(step) / 2 >= min_step:
                    step /= 2
                else:
                    truncated = True
                    break
            if truncated:
                break
            states.append(cur_x)
            res.append(residual(LogitRule(game, target), cur_x))
            prev_eta, prev_x = target, cur_x
        curves.append(
            EquilibriumCurve(etas[: len(states)], np.array(states), np.array(res), 0, truncated)
        )
    return _dedup_curves(curves, dedup)


def _dedup_curves(curves, tol):
    curves = sorted(curves, key=lambda c: tuple(c.states[0]))
    kept = []
    for c in curves:
        dup = False
        for other in kept:
            m = min(len(c.states), len(other.states))
            if np.max(np.abs(c.states[:m] - other.states[:m])) < tol:
                dup = True
                break
        if not dup:
            kept.append(c)
    for b, c in enumerate(kept):
        c.branch = b
    return kept


# --- Nash equilibria of 2x2 linear games --------------------------------------


def two_action_beta(A) -> float:
    (a, b), (c, d) = np.asarray(A, dtype=float)
    return (a - c) - (b - d)


def nash_two_action_linear(A) -> tuple:
    """Nash equilibria of F(x) = A x with two actions, as sorted x_1 values."""
    A = np.asarray(A.matrix if isinstance(A, LinearGame) else A, dtype=float)
    if A.shape != (2, 2):
        raise ValueError("need a 2x2 payoff matrix")
    (a, b), (c, d) = A
    beta = two_action_beta(A)
    if beta == 0:
        raise DegenerateGameError("beta = (a-c)-(b-d) is zero: payoff difference is constant")
    eq = set()
    if d >= b:
        eq.add(0.0)
    if a >= c:
        eq.add(1.0)
    x_star = (d - b) / beta
    if 0 < x_star < 1:
        eq.add(x_star)
    return tuple(sorted(eq))


__all__ = [
    "EquilibriumResult",
    "EquilibriumCurve",
    "MultistartReport",
    "DegenerateGameError",
    "solve_fixed_point",
    "solve_sle_fixed_point",
    "solve_sle_k1",
    "solve_sle_k2_two_action",
    "solve_logit_continuation",
    "nash_two_action_linear",
    "coordination_k1_sle",
    "stationary_distribution",
    "power_iteration",
    "multistart",
    "multistart_seeds",
    "sle_multistart",
    "interior_lattice",
    "cluster_states",
    "diameter",
]
