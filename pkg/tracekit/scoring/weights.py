from __future__ import annotations

from tracekit.errors import ScoreOutOfRange
from tracekit.models.schemas import DEFAULT_EPS_BASE

MIN_SCORE = 1
MAX_SCORE = 5

# eps_base range over which downstream accuracy is flat (< 0.3%)
CALIBRATED_EPS_RANGE = (3.0, 7.0)


def weight_of(score: int) -> float:
    """Normalized phrase weight w = score / 5."""
    if isinstance(score, bool) or int(score) != score or not MIN_SCORE <= score <= MAX_SCORE:
        raise ScoreOutOfRange(f"importance score {score!r} outside {MIN_SCORE}..{MAX_SCORE}")
    return int(score) / MAX_SCORE


def tolerance_of(weight: float, eps_base: float = DEFAULT_EPS_BASE) -> float:
    """Local DP tolerance eps_i = eps_base / w_i, in pixels."""
    return eps_base / weight


def clamp_score(score: int) -> int:
    return max(MIN_SCORE, min(MAX_SCORE, int(score)))
