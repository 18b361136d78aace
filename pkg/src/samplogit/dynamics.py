"""Mean dynamics x' = rule(x) - x for the four choice rules.

Smooth rules (logit, sampling logit, the corrected rule) are integrated with
fixed-step RK4; the best-response rules with forward Euler.  For the pure
best response the differential inclusion is replaced by one selection
(uniform over ties), which reproduces generic trajectories but not sliding
motion along indifference sets.

All integrators work on batches of starts at once; every start stops on its
own when ``||rule(x) - x||_inf <= conv_tol``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import cluster_states, diameter, interior_lattice
from .games import as_state
from .sampling import simplex_lattice

log = logging.getLogger(__name__)

DT_SMOOTH = 0.01
DT_NONSMOOTH = 0.005
T_MAX = 200.0
CONV_TOL = 1e-9
ATTRACTOR_RADIUS = 1e-4

CONVERGED, MAX_TIME, STEP_FAILURE = "converged", "max-time", "step-failure"


def velocity(rule, x) -> np.ndarray:
    return rule.drift(np.asarray(x, dtype=float))


def _eval(rule, x):
    # stage points of RK4 may dip below zero by rounding; evaluate on the simplex
    y = np.clip(x, 0.0, None)
    y = y / y.sum(axis=-1, keepdims=True)
    return rule.drift(y) + (y - x)


def _step(rule, x, dt, method):
    if method == "euler":
        return x + dt * _eval(rule, x)
    k1 = _eval(rule, x)
    k2 = _eval(rule, x + 0.5 * dt * k1)
    k3 = _eval(rule, x + 0.5 * dt * k2)
    k4 = _eval(rule, x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def default_method(rule) -> tuple:
    """(method, dt) used for a rule when none is given."""
    return ("rk4", DT_SMOOTH) if rule.smooth else ("euler", DT_NONSMOOTH)


@dataclass
class BatchResult:
    starts: np.ndarray
    terminal: np.ndarray
    status: list
    times: np.ndarray
    min_raw: np.ndarray

    @property
    def converged(self) -> np.ndarray:
        return np.array([s == CONVERGED for s in self.status])


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    status: str
    rule: str
    min_raw: float = field(default=0.0)

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


def _run(rule, X, dt, t_max, conv_tol, method, record=False):
    X = np.array(X, dtype=float)
    m = len(X)
    status = [MAX_TIME] * m
    times = np.zeros(m)
    min_raw = X.min(axis=1)
    active = np.ones(m, dtype=bool)
    path = [X[0].copy()] if record else None
    t = 0.0
    n_steps = int(np.ceil(t_max / dt))
    for step in range(n_steps + 1):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        with np.errstate(all="ignore"):
            v = _eval(rule, X[idx])
        bad = ~np.all(np.isfinite(v), axis=1)
        done = np.max(np.abs(v), axis=1) <= conv_tol
        for j in idx[done & ~bad]:
            status[j], times[j] = CONVERGED, t
        for j in idx[bad]:
            status[j], times[j] = STEP_FAILURE, t
        active[idx[done | bad]] = False
        if step == n_steps:
            break
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            break
        with np.errstate(all="ignore"):
            Y = _step(rule, X[idx], dt, method)
        bad = ~np.all(np.isfinite(Y), axis=1)
        min_raw[idx] = np.minimum(min_raw[idx], np.where(bad, 0.0, Y.min(axis=1)))
        Y = np.clip(Y, 0.0, None)
        Y /= Y.sum(axis=1, keepdims=True)
        X[idx[~bad]] = Y[~bad]
        for j in idx[bad]:
            status[j], times[j] = STEP_FAILURE, t
            active[j] = False
        t = (step + 1) * dt
        times[active] = t
        if record:
            path.append(X[0].copy())
    return X, status, times, min_raw, path


def integrate(rule, x0, dt: float | None = None, t_max: float = T_MAX,
              conv_tol: float = CONV_TOL, method: str | None = None) -> Trajectory:
    """Integrate one trajectory, recording every step."""
    x0 = as_state(x0)
    dm, ddt = default_method(rule)
    method, dt = method or dm, dt or ddt
    if dt <= 0:
        raise ValueError("time step must be positive")
    X, status, times, min_raw, path = _run(rule, x0[None], dt, t_max, conv_tol, method, record=True)
    states = np.array(path)
    ts = dt * np.arange(len(states))
    return Trajectory(ts, states, status[0], rule.tag, float(min_raw[0]))


def integrate_many(rule, starts, dt: float | None = None, t_max: float = T_MAX,
                   conv_tol: float = CONV_TOL, method: str | None = None) -> BatchResult:
    """Integrate many starts jointly; only terminal states are kept."""
    starts = np.array([as_state(s) for s in np.atleast_2d(starts)])
    dm, ddt = default_method(rule)
    method, dt = method or dm, dt or ddt
    if dt <= 0:
        raise ValueError("time step must be positive")
    X, status, times, min_raw, _ = _run(rule, starts, dt, t_max, conv_tol, method)
    return BatchResult(starts, X, status, times, min_raw)


# --- vector fields -----------------------------------------------------------------


@dataclass
class VectorFieldGrid:
    points: np.ndarray
    velocities: np.ndarray
    rule: str
    resolution: int

    @property
    def speeds(self) -> np.ndarray:
        return np.linalg.norm(self.velocities, axis=1)


def vector_field(rule, resolution: int) -> VectorFieldGrid:
    """rule(x) - x on the barycentric lattice {z/m}."""
    if resolution < 2:
        raise ValueError("vector-field resolution must be at least 2")
    pts = simplex_lattice(rule.n, resolution)
    return VectorFieldGrid(pts, velocity(rule, pts), rule.tag, resolution)


# --- basins ----------------------------------------------------------------------


def nearest_vertex(x) -> int:
    """0-based index of the closest pure state."""
    x = np.asarray(x, dtype=float)
    d = np.linalg.norm(np.eye(len(x)) - x, axis=1)
    return int(np.argmin(d))


@dataclass
class BasinReport:
    starts: np.ndarray
    labels: np.ndarray  # attractor id per start, -1 if not converged
    attractors: np.ndarray
    diameters: list
    rule: str

    @property
    def fractions(self) -> np.ndarray:
        conv = self.labels >= 0
        total = max(int(conv.sum()), 1)
        return np.array([(self.labels == a).sum() / total for a in range(len(self.attractors))])

    @property
    def nonconverged(self) -> np.ndarray:
        return np.flatnonzero(self.labels < 0)

    def nearest_vertices(self) -> list:
        return [nearest_vertex(a) for a in self.attractors]


def basin_report(rule, starts=None, resolution: int = 15, dt: float | None = None,
                 t_max: float = T_MAX, conv_tol: float = CONV_TOL,
                 radius: float = ATTRACTOR_RADIUS) -> BasinReport:
    """Integrate from every interior lattice start and group terminal states."""
    if starts is None:
        starts = interior_lattice(rule.n, resolution)
    batch = integrate_many(rule, starts, dt=dt, t_max=t_max, conv_tol=conv_tol)
    conv = batch.converged
    labels = np.full(len(batch.starts), -1)
    attractors, diams = [], []
    if conv.any():
        clusters = cluster_states(batch.terminal[conv], radius=radius)
        where = np.flatnonzero(conv)
        for a, members in enumerate(clusters):
            labels[where[members]] = a
            pts = batch.terminal[conv][members]
            attractors.append(pts.mean(axis=0))
            diams.append(diameter(pts))
    if (~conv).any():
        log.info("%d of %d starts did not converge", int((~conv).sum()), len(conv))
    return BasinReport(batch.starts, labels, np.array(attractors), diams, rule.tag)
