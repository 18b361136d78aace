"""Named experiment jobs, each writing tables into a directory.

A config is a TOML document with a ``[game]`` table (see
:func:`samplogit.games.game_from_config`) and a ``[params]`` table whose keys
are checked against the job's defaults.  Everything is validated before the
first computation.
"""

from __future__ import annotations

import hashlib
import json
import platform
import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy

from . import __version__
from .approximation import (
    CorrectedRule,
    error_scaling_audit,
    interior_shift_two_action,
    premiums,
    two_action_variance_terms,
)
from .choice import (
    BestResponseRule,
    LogitRule,
    SamplingBestResponseRule,
    SamplingLogitRule,
    check_eta,
    make_rule,
)
from .dynamics import basin_report, integrate, vector_field
from .equilibrium import (
    interior_lattice,
    solve_fixed_point,
    solve_logit_continuation,
    solve_sle_k1,
    solve_sle_k2_two_action,
)
from .games import LinearGame, game_from_config, vertex
from .potential import classify_g_shape, potential_profile, stationary_points
from .sampling import check_sample_size, simplex_lattice
from .tables import write_table


class ConfigError(ValueError):
    """Invalid experiment configuration."""


COORDINATION = {"kind": "catalog", "name": "coordination", "s": 2.0, "t": 1.0}
YOUNG = {"kind": "catalog", "name": "young"}


@dataclass
class Job:
    name: str
    run: Callable
    defaults: dict
    game: dict
    two_action: bool = False
    linear_2x2: bool = False


JOBS: dict = {}


def job(name, defaults, game=COORDINATION, two_action=False, linear_2x2=False):
    def register(fn):
        JOBS[name] = Job(name, fn, defaults, game, two_action, linear_2x2)
        return fn

    return register


# --- validation helpers -----------------------------------------------------------


def _ks(values, n):
    out = []
    for k in values:
        if isinstance(k, bool) or int(k) != k:
            raise ConfigError(f"sample sizes must be integers, got {k!r}")
        check_sample_size(n, int(k))
        out.append(int(k))
    return out


def _etas(values):
    try:
        return [check_eta(e) for e in values]
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _positive_int(value, name, minimum=1):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def _meta(game, **extra):
    meta = {"game": getattr(game, "name", type(game).__name__)}
    if isinstance(game, LinearGame):
        meta["matrix"] = json.dumps(game.matrix.tolist())
    meta.update(extra)
    return meta


def _state_cols(n, prefix="x"):
    return [f"{prefix}{i + 1}" for i in range(n)]


# --- jobs ----------------------------------------------------------------------------


@job("choice-curves", {"ks": [1, 2, 5, 20], "etas": [0.25], "resolution": 200})
def choice_curves(game, p, seed, out):
    """Choice probabilities of BR, BR^k, logit and L^{k,eta} across states."""
    n = game.n
    ks, etas = _ks(p["ks"], n), _etas(p["etas"])
    m = _positive_int(p["resolution"], "resolution", 2)
    pts = simplex_lattice(n, m)
    rules = [("BR", 0, 0.0, BestResponseRule(game))]
    rules += [("SBR", k, 0.0, SamplingBestResponseRule(game, k)) for k in ks]
    for eta in etas:
        rules.append(("logit", 0, eta, LogitRule(game, eta)))
        rules += [("SL", k, eta, SamplingLogitRule(game, k, eta)) for k in ks]
    rows = []
    for tag, k, eta, rule in rules:
        probs = rule(pts)
        rows += [(tag, k, eta, *x, *q) for x, q in zip(pts, probs)]
    cols = ["rule", "k", "eta"] + _state_cols(n) + _state_cols(n, "p")
    return [write_table(out / "choice_curves.csv", cols, rows, _meta(game, resolution=m))]


def _sle_path(game, k, etas):
    """SLE along a decreasing eta grid, warm-started from the previous point."""
    rows, x = [], None
    for eta in etas:
        if k == 1:
            res = solve_sle_k1(game, eta)
        elif k == 2 and game.n == 2:
            res = solve_sle_k2_two_action(game, eta)
        else:
            rule = SamplingLogitRule(game, k, eta)
            res = solve_fixed_point(rule, x if x is not None else np.full(game.n, 1 / game.n))
        x = res.state
        rows.append((k, eta, *res.state, res.residual, res.solver, res.converged))
    return rows


@job("sle-vs-eta", {
    "ks": [1, 2, 3, 5, 20],
    "eta_max": 2.0,
    "eta_min": 0.02,
    "points": 60,
    "logit_seeds": [[0.9, 0.1], [0.1, 0.9], [0.3333333333333333, 0.6666666666666667]],
})
def sle_vs_eta(game, p, seed, out):
    """Equilibrium curves against the noise level, per sample size and for logit."""
    n = game.n
    ks = _ks(p["ks"], n)
    lo, hi = _etas([p["eta_min"], p["eta_max"]])
    if not lo < hi:
        raise ConfigError("eta_min must be below eta_max")
    npts = _positive_int(p["points"], "points", 2)
    seeds = np.asarray(p["logit_seeds"], dtype=float)
    if seeds.ndim != 2 or seeds.shape[1] != n:
        raise ConfigError(f"logit_seeds must be states with {n} shares")
    etas = np.geomspace(hi, lo, npts)
    rows = [r for k in ks for r in _sle_path(game, k, etas)]
    cols = ["k", "eta"] + _state_cols(n) + ["residual", "solver", "converged"]
    files = [write_table(out / "sle_vs_eta.csv", cols, rows, _meta(game))]
    curves = solve_logit_continuation(game, etas, seeds)
    lrows = [
        (c.branch, eta, *x, r, c.truncated)
        for c in curves for eta, x, r in zip(c.etas, c.states, c.residuals)
    ]
    lcols = ["branch", "eta"] + _state_cols(n) + ["residual", "truncated"]
    files.append(write_table(out / "logit_branches.csv", lcols, lrows, _meta(game)))
    return files


@job("phase-portrait", {
    "rules": ["BRD", "SBRD", "LD", "SLD"],
    "k": 2,
    "eta": 0.3,
    "field_resolution": 40,
    "basin_resolution": 15,
    "trajectory_stride": 10,
    "t_max": 200.0,
}, game=YOUNG)
def phase_portrait(game, p, seed, out):
    """Vector fields, sample trajectories and basins for each dynamic."""
    n = game.n
    k = _ks([p["k"]], n)[0]
    eta = _etas([p["eta"]])[0]
    m = _positive_int(p["field_resolution"], "field_resolution", 2)
    mb = _positive_int(p["basin_resolution"], "basin_resolution", n + 1)
    stride = _positive_int(p["trajectory_stride"], "trajectory_stride")
    t_max = float(p["t_max"])
    rules = [str(r).upper() for r in p["rules"]]
    for r in rules:
        if r not in ("BRD", "SBRD", "LD", "SLD"):
            raise ConfigError(f"unknown dynamic {r!r}")
    starts = [0.8 * vertex(n, i) + 0.2 / n for i in range(n)] + [np.full(n, 1 / n)]
    files = []
    for name in rules:
        rule = make_rule(name, game, k=k, eta=eta)
        meta = _meta(game, rule=rule.tag)
        vf = vector_field(rule, m)
        rows = [(*x, *v, s) for x, v, s in zip(vf.points, vf.velocities, vf.speeds)]
        cols = _state_cols(n) + _state_cols(n, "v") + ["speed"]
        files.append(write_table(out / f"field_{name.lower()}.csv", cols, rows, meta))
        trows = []
        for j, x0 in enumerate(starts):
            tr = integrate(rule, x0, t_max=t_max)
            keep = list(range(0, len(tr.times), stride))
            if keep[-1] != len(tr.times) - 1:
                keep.append(len(tr.times) - 1)
            trows += [(j, tr.times[i], *tr.states[i], tr.status) for i in keep]
        files.append(write_table(out / f"trajectories_{name.lower()}.csv",
                                 ["start", "t"] + _state_cols(n) + ["status"], trows, meta))
        rep = basin_report(rule, interior_lattice(n, mb), t_max=t_max)
        brows = [(*s, int(lab)) for s, lab in zip(rep.starts, rep.labels)]
        files.append(write_table(out / f"basins_{name.lower()}.csv",
                                 _state_cols(n) + ["attractor"], brows, meta))
        arows = [(a, *x, f, d, v) for a, (x, f, d, v) in enumerate(
            zip(rep.attractors, rep.fractions, rep.diameters, rep.nearest_vertices()))]
        files.append(write_table(out / f"attractors_{name.lower()}.csv",
                                 ["attractor"] + _state_cols(n) + ["fraction", "diameter", "nearest_vertex"],
                                 arows, dict(meta, nonconverged=len(rep.nonconverged))))
    return files


@job("premium-profiles", {"ks": [10, 40], "etas": [0.2, 0.1, 0.05, 0.02], "resolution": 100,
                          "mc_draws": 0})
def premium_profiles(game, p, seed, out):
    """Variance and curvature premiums across states; variance terms for 2x2 games."""
    n = game.n
    ks, etas = _ks(p["ks"], n), _etas(p["etas"])
    m = _positive_int(p["resolution"], "resolution", 2)
    draws = int(p["mc_draws"])
    rng = np.random.default_rng(seed)
    pts = simplex_lattice(n, m)
    rows = []
    for k in ks:
        for eta in etas:
            for x in pts:
                rep = premiums(game, x, k, eta)
                v_mc = _mc_variance_premium(game, x, k, eta, draws, rng) if draws else None
                for i, P, v, q, vh, qh, mult, G in rep.rows(eta):
                    extra = [v_mc[i]] if draws else []
                    rows.append((k, eta, *x, i + 1, P, v, q, vh, qh, mult, G, *extra))
    cols = (["k", "eta"] + _state_cols(n)
            + ["action", "P", "v", "q", "v_hat", "q_hat", "multiplier", "G"]
            + (["v_monte_carlo"] if draws else []))
    files = [write_table(out / "premiums.csv", cols, rows, _meta(game, seed=seed))]
    if isinstance(game, LinearGame) and n == 2:
        srows = []
        for eta in etas:
            for x in pts:
                vt = two_action_variance_terms(game, x, eta)
                srows.append((eta, *x, vt.sigma_A, *vt.sigma, *vt.sigma_hat))
        scols = ["eta", "x1", "x2", "sigma_A", "sigma_1", "sigma_2", "sigma_hat_1", "sigma_hat_2"]
        files.append(write_table(out / "variance_terms.csv", scols, srows, _meta(game)))
    return files


def _mc_variance_premium(game, x, k, eta, draws, rng):
    """Monte-Carlo estimate of v from multinomial draws of w = z/k."""
    from .choice import logit, logit_center

    pr = logit(game.payoff(x), eta)
    _, R = logit_center(game.gradient(x), pr)
    w = rng.multinomial(k, x, size=draws) / k
    proj = (w - x) @ R.T
    return proj.var(axis=0) / (2 * eta**2)


@job("error-audit", {"etas": [0.5, 0.15], "ks": [16, 32, 64, 128, 256], "epsilon": 0.1,
                     "resolution": 0})
def error_audit(game, p, seed, out):
    """Sup-norm error of the approximated rule along a ladder of sample sizes."""
    ks, etas = _ks(p["ks"], game.n), _etas(p["etas"])
    if len(ks) < 3:
        raise ConfigError("error audit needs at least three sample sizes")
    eps = float(p["epsilon"])
    if not eps > 0:
        raise ConfigError("epsilon must be positive")
    res = int(p["resolution"]) or None
    rows = []
    for eta in etas:
        rep = error_scaling_audit(game, eta, ks, eps, res)
        rows += [(eta, k, e, rep.slope, rep.regime) for k, e, _ in rep.rows()]
    return [write_table(out / "error_audit.csv", ["eta", "k", "sup_error", "slope", "regime"],
                        rows, _meta(game, epsilon=eps))]


@job("interior-shift", {"ks": [100, 200, 400], "etas": [0.1, 0.05], "margin": 0.05},
     linear_2x2=True)
def interior_shift(game, p, seed, out):
    """Predicted interior SLE shift against the fixed point of the approximated rule."""
    ks, etas = _ks(p["ks"], 2), _etas(p["etas"])
    margin = float(p["margin"])
    rows = []
    for k in ks:
        for eta in etas:
            s = interior_shift_two_action(game.matrix, k, eta, margin)
            fp = solve_fixed_point(CorrectedRule(game, k, eta), [s.x_tilde, 1 - s.x_tilde],
                                   damped_steps=0)
            x_fp = fp.state[0]
            rows.append((k, eta, s.x_star, s.x_tilde, x_fp, s.x_tilde - x_fp,
                         s.logit_term, s.sampling_term, s.direction, fp.converged))
    cols = ["k", "eta", "x_star", "x_tilde", "x_fixed_point", "difference",
            "logit_term", "sampling_term", "direction", "converged"]
    return [write_table(out / "interior_shift.csv", cols, rows, _meta(game, margin=margin))]


@job("potential-profiles", {"pairs": [[40, 0.2], [100, 0.3]], "nodes": 2001}, two_action=True)
def potential_profiles(game, p, seed, out):
    """Tabulated perturbed potentials, their stationary points and the shape of g."""
    pairs = []
    for pair in p["pairs"]:
        if len(pair) != 2:
            raise ConfigError(f"pairs entries are [k, eta], got {pair!r}")
        pairs.append((_ks([pair[0]], 2)[0], _etas([pair[1]])[0]))
    nodes = _positive_int(p["nodes"], "nodes", 100)
    files, srows = [], []
    for k, eta in pairs:
        prof = potential_profile(game, k, eta, nodes)
        files.append(write_table(out / f"potential_k{k}_eta{eta:g}.csv",
                                 ["x1", "f", "h", "g", "f_eta", "f_k_eta"], prof.rows(),
                                 _meta(game, k=k, eta=eta, nodes=nodes)))
        for which in ("f", "f_eta", "f_k_eta"):
            srows += [(k, eta, which, x) for x in stationary_points(prof, which)]
        if isinstance(game, LinearGame):
            shape = classify_g_shape(game, k, eta, nodes)
            srows.append((k, eta, "g_shape:" + shape.tag,
                          shape.extremum if shape.extremum is not None else float("nan")))
    files.append(write_table(out / "stationary_points.csv", ["k", "eta", "potential", "x1"],
                             srows, _meta(game, nodes=nodes)))
    return files


# --- runner ---------------------------------------------------------------------------


def load_config(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def resolve(job_name: str, config: dict):
    """Validate a config for a job; returns (job, game, params)."""
    if job_name not in JOBS:
        raise ConfigError(f"unknown job {job_name!r}; choose from {sorted(JOBS)}")
    j = JOBS[job_name]
    unknown = set(config) - {"game", "params"}
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    params = dict(j.defaults)
    extra = set(config.get("params", {})) - set(params)
    if extra:
        raise ConfigError(f"unknown parameters for {job_name}: {sorted(extra)}")
    params.update(config.get("params", {}))
    try:
        game = game_from_config(config.get("game", j.game))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid game: {exc}") from exc
    if (j.two_action or j.linear_2x2) and game.n != 2:
        raise ConfigError(f"{job_name} needs a two-action game")
    if j.linear_2x2 and not isinstance(game, LinearGame):
        raise ConfigError(f"{job_name} needs a linear 2x2 game")
    return j, game, params


def versions() -> dict:
    return {
        "artifact": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_job(job_name: str, config: dict, out_dir, seed: int = 0, config_bytes: bytes | None = None):
    """Run a job; outputs appear in ``out_dir`` only if the job succeeds."""
    j, game, params = resolve(job_name, config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{job_name}-", dir=out_dir))
    try:
        files = j.run(game, params, seed, staging)
        canonical = json.dumps(config, sort_keys=True).encode()
        manifest = {
            "job": job_name,
            "config_sha256": hashlib.sha256(config_bytes or canonical).hexdigest(),
            "config": config,
            "parameters": params,
            "seed": seed,
            "versions": versions(),
            "files": {f.name: _sha256(f) for f in files},
        }
        (staging / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        final = []
        for f in sorted(staging.iterdir()):
            target = out_dir / f.name
            shutil.move(str(f), target)
            final.append(target)
        return final
    finally:
        shutil.rmtree(staging, ignore_errors=True)
