import numpy as np
import pytest

from samplogit.approximation import ApproximationValidityError, CorrectedRule
from samplogit.dynamics import integrate
from samplogit.equilibrium import solve_fixed_point
from samplogit.games import LinearGame, make_congestion_game, make_coordination_2x2, make_young_game
from samplogit.potential import (
    QUASICONCAVE,
    QUASICONVEX,
    ZERO,
    ShapeInconclusiveError,
    classify_g_shape,
    distortion_gap,
    lyapunov_increments,
    potential_increment,
    potential_profile,
    slope,
    stationary_points,
)

COORD = make_coordination_2x2(2, 1)
ANTI = LinearGame(-COORD.matrix)


def corrected_fixed_points(game, k, eta):
    rule = CorrectedRule(game, k, eta)
    found = []
    for t in np.linspace(0.001, 0.999, 41):
        r = solve_fixed_point(rule, [t, 1 - t], damped_steps=0)
        if r.converged and all(abs(r.x1 - f) > 1e-7 for f in found):
            found.append(r.x1)
    return sorted(found)


def test_payoff_potential_is_quadratic_with_curvature_beta():
    prof = potential_profile(COORD, 40, 0.2, nodes=1001)
    h = prof.x1[1] - prof.x1[0]
    second = np.diff(prof.f, 2) / h**2
    np.testing.assert_allclose(second, 3.0, rtol=1e-8)
    assert prof.f[0] == 0.0 and prof.g[0] == 0.0


def test_entropy_term_peaks_at_half():
    prof = potential_profile(COORD, 40, 0.2, nodes=1001)
    assert prof.h[500] == pytest.approx(0.2 * np.log(2), rel=1e-14)
    assert prof.h[0] == 0.0 and prof.h[-1] == 0.0


def test_sampling_term_vanishes_without_beta():
    flat = LinearGame(np.array([[1.0, 1.0], [0.0, 0.0]]))
    prof = potential_profile(flat, 10, 0.5)
    assert np.max(np.abs(prof.g)) < 1e-12
    assert classify_g_shape(flat, 10, 0.5).tag == ZERO


def test_integrated_profile_matches_slope_quadrature():
    prof = potential_profile(COORD, 40, 0.2)
    i, j = 900, 1000
    inc = potential_increment(COORD, 40, 0.2, prof.x1[i], prof.x1[j])
    assert inc == pytest.approx(prof.f_k_eta[j] - prof.f_k_eta[i], abs=1e-8)


@pytest.mark.parametrize("game", [COORD, ANTI], ids=["coord", "anti"])
@pytest.mark.parametrize("k,eta", [(40, 0.2), (100, 0.3)])
def test_stationary_points_are_corrected_fixed_points(game, k, eta):
    pts = stationary_points(potential_profile(game, k, eta))
    fps = corrected_fixed_points(game, k, eta)
    assert len(pts) == len(fps)
    np.testing.assert_allclose(pts, fps, atol=1e-8)


def test_known_fixed_point_count():
    assert len(stationary_points(potential_profile(COORD, 40, 0.2))) == 3
    assert len(stationary_points(potential_profile(ANTI, 40, 0.2))) == 1


def test_large_noise_single_point_near_half():
    pts = stationary_points(potential_profile(COORD, 40, 10.0))
    assert len(pts) == 1 and abs(pts[0] - 0.5) < 0.05


def test_payoff_potential_stationary_point_is_nash():
    pts = stationary_points(potential_profile(COORD, 40, 0.2), which="f")
    np.testing.assert_allclose(pts, [1 / 3], atol=1e-12)


def test_logit_potential_matches_logit_fixed_points():
    from samplogit.choice import LogitRule
    pts = stationary_points(potential_profile(COORD, 40, 0.2), which="f_eta")
    for p in pts:
        r = solve_fixed_point(LogitRule(COORD, 0.2), [p, 1 - p])
        assert abs(r.x1 - p) < 1e-8


def test_shape_classification():
    s = classify_g_shape(COORD, 40, 0.2)
    assert s.tag == QUASICONCAVE and abs(s.extremum - 1 / 3) <= 1 / 2000
    a = classify_g_shape(ANTI, 40, 0.2)
    assert a.tag == QUASICONVEX and abs(a.extremum - 1 / 3) <= 1 / 2000
    assert max(abs(b) for b in s.boundary_slopes) <= 1e-8


def test_shape_refuses_without_interior_nash():
    with pytest.raises(ShapeInconclusiveError):
        classify_g_shape(LinearGame(np.array([[3.0, 2.0], [0.0, 1.0]])), 40, 0.2)
    with pytest.raises(ValueError):
        classify_g_shape(make_congestion_game(), 40, 0.2)


def test_distortion_refusal_names_location():
    with pytest.raises(ApproximationValidityError, match="t ="):
        distortion_gap(COORD, 1, 0.05, np.linspace(0.01, 0.99, 99))


def test_two_action_only():
    with pytest.raises(ValueError):
        potential_profile(make_young_game(), 4, 0.3)
    with pytest.raises(ValueError):
        potential_profile(COORD, 4, 0.3, nodes=50)
    with pytest.raises(ValueError):
        slope(COORD, 4, 0.3, 0.5, which="other")


@pytest.mark.parametrize("game", [COORD, ANTI, make_congestion_game()], ids=["coord", "anti", "cong"])
def test_potential_increases_along_trajectories(game):
    k, eta = 40, 0.2
    rule = CorrectedRule(game, k, eta)
    for t0 in (0.05, 0.3, 0.36, 0.7, 0.97):
        traj = integrate(rule, [t0, 1 - t0], t_max=50)
        inc = lyapunov_increments(game, k, eta, traj.states[:, 0])
        assert np.all(inc >= -1e-9)
