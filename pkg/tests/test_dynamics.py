import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import brentq

from samplogit.choice import ChoiceRule, LogitRule, SamplingLogitRule, make_rule
from samplogit.dynamics import (
    CONVERGED,
    STEP_FAILURE,
    basin_report,
    integrate,
    integrate_many,
    nearest_vertex,
    vector_field,
)
from samplogit.equilibrium import (
    interior_lattice,
    single_sample_matrix,
    solve_fixed_point,
    solve_sle_fixed_point,
    solve_sle_k1,
    solve_sle_k2_two_action,
)
from samplogit.games import (
    barycenter,
    make_bilingual_game,
    make_coordination_2x2,
    make_young_game,
    vertex,
)

COORD = make_coordination_2x2(2, 1)
YOUNG = make_young_game()


def test_k1_sld_matches_matrix_exponential():
    eta = 0.3
    Pi = single_sample_matrix(YOUNG, eta)
    rule = SamplingLogitRule(YOUNG, 1, eta)
    for i in range(3):
        x0 = 0.9 * vertex(3, i) + 0.1 * barycenter(3)
        tr = integrate(rule, x0, t_max=40.0)
        for j in (100, 500, 2000):
            exact = expm((Pi - np.eye(3)) * tr.times[j]) @ x0
            np.testing.assert_allclose(tr.states[j], exact, atol=1e-9)


@pytest.mark.parametrize("game,eta", [(COORD, 0.5), (YOUNG, 1.0)])
def test_k1_sld_converges_to_perron_state(game, eta):
    # at eta = 0.3 Young's chain mixes on a time scale near 1e3, beyond t_max
    rule = SamplingLogitRule(game, 1, eta)
    perron = solve_sle_k1(game, eta).state
    for i in range(game.n):
        x0 = 0.9 * vertex(game.n, i) + 0.1 * barycenter(game.n)
        full = integrate(rule, x0)
        assert full.converged
        np.testing.assert_allclose(full.terminal, perron, atol=1e-8)


def test_ld_at_equilibrium_stays_put():
    rule = LogitRule(COORD, 0.25)
    eq = solve_fixed_point(rule, [0.9, 0.1]).state
    tr = integrate(rule, eq, t_max=5.0)
    assert tr.converged and tr.times[-1] == 0.0
    assert np.max(np.abs(tr.states - eq)) < 1e-8


def test_young_sld_from_barycenter_reaches_sle():
    rule = SamplingLogitRule(YOUNG, 2, 0.3)
    tr = integrate(rule, barycenter(3))
    sle = solve_sle_fixed_point(YOUNG, 2, 0.3).state
    assert tr.converged
    np.testing.assert_allclose(tr.terminal, sle, atol=1e-6)


def test_vector_field_tangent_and_zero_at_fixed_point():
    for kind in ("BRD", "SBRD", "LD", "SLD"):
        vf = vector_field(make_rule(kind, YOUNG, k=2, eta=0.3), 40)
        assert len(vf.points) == 861
        assert np.max(np.abs(vf.velocities.sum(axis=1))) < 1e-10
        np.testing.assert_allclose(vf.speeds, np.linalg.norm(vf.velocities, axis=1))
    rule = SamplingLogitRule(YOUNG, 2, 0.3)
    sle = solve_sle_fixed_point(YOUNG, 2, 0.3).state
    assert np.max(np.abs(rule.drift(sle))) < 1e-12
    with pytest.raises(ValueError):
        vector_field(rule, 1)


def test_ld_velocity_sign_flips_bracket_logit_equilibria():
    rule = LogitRule(COORD, 0.25)
    vf = vector_field(rule, 50)
    v1 = vf.velocities[:, 0]
    x1 = vf.points[:, 0]
    order = np.argsort(x1)
    x1, v1 = x1[order], v1[order]
    flips = [(x1[i], x1[i + 1]) for i in range(len(x1) - 1) if v1[i] * v1[i + 1] < 0]
    f = lambda t: rule.drift(np.array([t, 1 - t]))[0]
    roots = [brentq(f, a, b, xtol=1e-14) for a, b in flips]
    assert len(roots) == 3
    for r in roots:
        assert abs(f(r)) < 1e-12
        res = solve_fixed_point(rule, [r, 1 - r], damped_steps=0)
        assert abs(res.x1 - r) < 1e-10


def test_sbrd_young_single_attractor_near_e3():
    rep = basin_report(make_rule("SBRD", YOUNG, k=2), resolution=15)
    assert len(rep.nonconverged) == 0
    assert len(rep.attractors) == 1 and rep.nearest_vertices() == [2]
    assert rep.fractions[0] == 1.0


def test_brd_young_three_corner_attractors():
    rep = basin_report(make_rule("BRD", YOUNG), resolution=15)
    assert sorted(rep.nearest_vertices()) == [0, 1, 2]
    for a in rep.attractors:
        assert np.max(a) > 1 - 1e-6
    assert rep.fractions.sum() == pytest.approx(1.0)


def test_bilingual_sld_single_interior_attractor_near_e3():
    rep = basin_report(SamplingLogitRule(make_bilingual_game(0.5, 0.05), 2, 0.3), resolution=15)
    assert len(rep.nonconverged) == 0
    assert len(rep.attractors) == 1 and rep.diameters[0] < 1e-4
    assert rep.nearest_vertices() == [2]
    assert np.all(rep.attractors[0] > 0.01)


def test_simplex_invariance_and_terminal_residuals():
    for kind in ("LD", "SLD", "SBRD", "BRD"):
        rule = make_rule(kind, YOUNG, k=3, eta=0.2)
        batch = integrate_many(rule, interior_lattice(3, 8))
        assert np.all(batch.min_raw >= -1e-12)
        np.testing.assert_allclose(batch.terminal.sum(axis=1), 1, atol=1e-12)
        if kind == "SLD":
            assert np.all(batch.converged)
            for x in batch.terminal:
                assert np.max(np.abs(rule(x) - x)) <= 1e-8


def test_step_halving_changes_terminal_little():
    for rule in (SamplingLogitRule(YOUNG, 3, 0.3), LogitRule(YOUNG, 0.5)):
        starts = interior_lattice(3, 6)
        a = integrate_many(rule, starts, dt=0.01)
        b = integrate_many(rule, starts, dt=0.005)
        both = a.converged & b.converged
        assert both.all()
        assert np.max(np.abs(a.terminal - b.terminal)) < 1e-6


def test_k2_two_action_global_stability_sign():
    for eta in (0.5, 0.2, 0.1):
        y_star = solve_sle_k2_two_action(COORD, eta).x1
        rule = SamplingLogitRule(COORD, 2, eta)
        y = np.linspace(0, 1, 1000)
        f = rule.drift(np.stack([y, 1 - y], axis=1))[:, 0]
        far = np.abs(y - y_star) > 1e-9
        assert np.all(np.sign(f[far]) == np.sign(y_star - y[far]))


class _Exploding(ChoiceRule):
    smooth = True
    tag = "exploding"

    def __init__(self):
        self.game = COORD

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x[..., :1] < 0.6, np.nan, 1.0) * np.array([1.0, 0.0])


def test_step_failure_flag():
    tr = integrate(_Exploding(), [0.55, 0.45])
    assert tr.status == STEP_FAILURE
    with pytest.raises(ValueError):
        integrate(LogitRule(COORD, 0.3), [0.5, 0.5], dt=-0.1)


def test_max_time_flag_and_nearest_vertex():
    tr = integrate(LogitRule(COORD, 0.3), [0.5, 0.5], t_max=0.05)
    assert tr.status == "max-time"
    assert nearest_vertex([0.2, 0.1, 0.7]) == 2
    tr = integrate(LogitRule(COORD, 0.3), [0.5, 0.5])
    assert tr.status == CONVERGED
    assert np.all(np.diff(tr.times) > 0)
