import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from samplogit.games import (
    Component,
    LinearGame,
    SeparableGame,
    as_state,
    coordination_interior_nash,
    game_from_config,
    make_bilingual_game,
    make_congestion_game,
    make_coordination_2x2,
    make_young_game,
    vertex,
)
from conftest import catalog_games, interior_states


def fd_gradient(game, x, h=1e-5):
    n = len(x)
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        cols.append((game.payoff(x + e) - game.payoff(x - e)) / (2 * h))
    return np.stack(cols, axis=1)


def fd_hessians(game, x, h=1e-4):
    n = len(x)
    H = np.zeros((n, n, n))
    for a in range(n):
        for b in range(n):
            ea, eb = np.zeros(n), np.zeros(n)
            ea[a], eb[b] = h, h
            H[:, a, b] = (game.payoff(x + ea + eb) - game.payoff(x + ea - eb)
                          - game.payoff(x - ea + eb) + game.payoff(x - ea - eb)) / (4 * h * h)
    return H


def rel_close(a, b, rtol):
    scale = max(1.0, np.max(np.abs(b)))
    return np.max(np.abs(a - b)) <= rtol * scale


def test_coordination_matrix_and_nash():
    g = make_coordination_2x2(2, 1)
    np.testing.assert_array_equal(g.matrix, [[2, 0], [0, 1]])
    assert coordination_interior_nash(2, 1) == pytest.approx(1 / 3)


def test_coordination_3_2_nash_by_root_finding():
    from scipy.optimize import brentq

    g = make_coordination_2x2(3, 2)
    root = brentq(lambda t: np.subtract(*g.payoff(np.array([t, 1 - t]))), 0, 1, xtol=1e-14)
    assert coordination_interior_nash(3, 2) == pytest.approx(0.4)
    assert root == pytest.approx(0.4, abs=1e-12)


@pytest.mark.parametrize("s,t", [(1, 1), (1, 2), (2, 0), (2, -1)])
def test_coordination_rejects(s, t):
    with pytest.raises(ValueError):
        make_coordination_2x2(s, t)


def test_young_payoffs_and_strict_equilibria():
    g = make_young_game()
    np.testing.assert_array_equal(g.payoff(vertex(3, 0)), [6, 5, 0])
    np.testing.assert_array_equal(g.payoff(vertex(3, 2)), [0, 5, 8])
    for i in range(3):
        f = g.payoff(vertex(3, i))
        assert all(f[i] > f[j] for j in range(3) if j != i)


def test_bilingual_validation_and_constant_row():
    g = make_bilingual_game(0.5, 0.05)
    rng = np.random.default_rng(1)
    for x in interior_states(rng, 3, 20):
        assert g.payoff(x)[1] == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        make_bilingual_game(0.5, 0.4)
    with pytest.raises(ValueError):
        make_bilingual_game(1.2, 0.1)


def test_congestion_payoffs_and_curvature():
    g = make_congestion_game()
    np.testing.assert_allclose(g.payoff([0.5, 0.5]), [-0.5, -0.5])
    assert g.hessian(1, [0.3, 0.7])[1, 1] == pytest.approx(-4.0)
    assert g.hessian(0, [0.3, 0.7])[0, 0] == 0.0
    x = np.array([0.3, 0.7])
    assert rel_close(g.gradient(x), fd_gradient(g, x), 1e-6)


@pytest.mark.parametrize("name", sorted(catalog_games()))
def test_derivatives_match_finite_differences(name):
    game = catalog_games()[name]
    rng = np.random.default_rng(7)
    for x in interior_states(rng, game.n, 25):
        assert rel_close(game.gradient(x), fd_gradient(game, x), 1e-6)
        H = game.hessians(x)
        assert rel_close(H, fd_hessians(game, x), 1e-5)
        assert np.max(np.abs(H - np.swapaxes(H, -1, -2))) < 1e-10


def test_linear_game_structure():
    A = np.array([[1.0, 2.0, -1.0], [0.5, 0.0, 3.0], [2.0, 1.0, 1.0]])
    g = LinearGame(A)
    x = np.array([0.2, 0.3, 0.5])
    np.testing.assert_array_equal(g.payoff(x), A @ x)
    np.testing.assert_array_equal(g.gradient(x), A)
    assert not np.any(g.hessians(x))
    with pytest.raises(ValueError):
        g.matrix[0, 0] = 5.0


def test_separable_hessian_single_entry():
    g = SeparableGame((Component.polynomial([0, 1, 3]), Component.polynomial([1, 0, 0, -2]),
                       Component.polynomial([0, -1])))
    H = g.hessians(np.array([0.2, 0.3, 0.5]))
    for i in range(3):
        mask = np.zeros((3, 3), bool)
        mask[i, i] = True
        assert not np.any(H[i][~mask])
    assert H[0, 0, 0] == pytest.approx(6.0)
    assert H[1, 1, 1] == pytest.approx(-12 * 0.3)


def test_batched_evaluation_matches_single():
    g = make_young_game()
    X = interior_states(np.random.default_rng(3), 3, 5)
    np.testing.assert_allclose(g.payoff(X), np.array([g.payoff(x) for x in X]))
    c = make_congestion_game()
    Y = interior_states(np.random.default_rng(4), 2, 5)
    np.testing.assert_allclose(c.hessians(Y), np.array([c.hessians(y) for y in Y]))


def test_as_state_renormalizes_small_drift_only():
    x = as_state([0.5, 0.5 + 5e-10])
    assert x.sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        as_state([0.5, 0.5 + 1e-8])
    with pytest.raises(ValueError):
        as_state([1.1, -0.1])
    with pytest.raises(ValueError):
        as_state([1.0])


@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0))
def test_coordination_nash_equalizes_payoffs(t, gap):
    s = t + gap
    g = make_coordination_2x2(s, t)
    x1 = coordination_interior_nash(s, t)
    f = g.payoff(np.array([x1, 1 - x1]))
    assert f[0] == pytest.approx(f[1], abs=1e-12)


def test_negated_game_flips_everything():
    c = make_congestion_game().negated()
    x = np.array([0.4, 0.6])
    np.testing.assert_allclose(c.payoff(x), -make_congestion_game().payoff(x))
    assert c.hessian(1, x)[1, 1] == pytest.approx(4.0)
    A = make_coordination_2x2(2, 1).negated()
    np.testing.assert_array_equal(A.matrix, [[-2, 0], [0, -1]])


def test_game_from_config_records():
    g = game_from_config({"kind": "catalog", "name": "coordination", "s": 3, "t": 2})
    np.testing.assert_array_equal(g.matrix, [[3, 0], [0, 2]])
    lin = game_from_config({"kind": "linear", "matrix": [[1, 0], [0, 1]], "negate": True})
    np.testing.assert_array_equal(lin.matrix, [[-1, 0], [0, -1]])
    sep = game_from_config({"kind": "separable", "components": [[0, -1], [0, 0, -2]]})
    np.testing.assert_allclose(sep.payoff([0.5, 0.5]), [-0.5, -0.5])
    with pytest.raises(ValueError):
        game_from_config({"kind": "catalog", "name": "nope"})
    with pytest.raises(ValueError):
        game_from_config({"kind": "weird"})
