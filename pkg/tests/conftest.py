import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from samplogit.games import (
    make_bilingual_game,
    make_congestion_game,
    make_coordination_2x2,
    make_young_game,
)

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def catalog_games():
    return {
        "coordination": make_coordination_2x2(2.0, 1.0),
        "young": make_young_game(),
        "bilingual": make_bilingual_game(0.5, 0.05),
        "congestion": make_congestion_game(),
    }


@pytest.fixture(params=sorted(catalog_games()))
def catalog_game(request):
    return catalog_games()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def interior_states(rng, n, count, floor=0.02):
    """Dirichlet draws kept away from the boundary."""
    x = rng.dirichlet(np.ones(n), size=count)
    x = floor + (1 - n * floor) * x
    return x / x.sum(axis=1, keepdims=True)


def simplex_points(n, min_share=0.0):
    """Hypothesis strategy for states on the n-simplex."""
    raw = arrays(np.float64, n, elements=st.floats(0.001, 1.0))
    return raw.map(lambda v: min_share + (1 - n * min_share) * v / v.sum())


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
