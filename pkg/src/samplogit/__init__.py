"""Sampling logit choice: equilibria, dynamics and their delta-method approximation."""

__version__ = "0.1.0"

from .games import (  # noqa: E402
    LinearGame,
    PopulationGame,
    SeparableGame,
    game_from_config,
    make_bilingual_game,
    make_congestion_game,
    make_coordination_2x2,
    make_young_game,
)
from .choice import (  # noqa: E402
    BestResponseRule,
    LogitRule,
    SamplingBestResponseRule,
    SamplingLogitRule,
    logit,
    make_rule,
)
from .approximation import CorrectedRule, corrected_rule, premiums  # noqa: E402

__all__ = [
    "LinearGame",
    "PopulationGame",
    "SeparableGame",
    "game_from_config",
    "make_bilingual_game",
    "make_congestion_game",
    "make_coordination_2x2",
    "make_young_game",
    "BestResponseRule",
    "LogitRule",
    "SamplingBestResponseRule",
    "SamplingLogitRule",
    "logit",
    "make_rule",
    "CorrectedRule",
    "corrected_rule",
    "premiums",
]
