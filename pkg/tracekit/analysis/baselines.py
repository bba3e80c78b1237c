"""Comparison simplifiers and the compression trade-off study."""

from __future__ import annotations

import logging
from typing import List, Sequence, Tuple

import numpy as np

from tracekit.analysis.lbm import lbm
from tracekit.analysis.simplify import compression_of, coords, dp_indices, simplify_semantic
from tracekit.data.alignment import merge_to_phrases
from tracekit.errors import EmptyTrace, TargetTooLarge, TargetTooSmall
from tracekit.models.schemas import (
    AlignedSegment,
    LbmConfig,
    MethodResult,
    PhraseSpan,
    SweepPoint,
)
from tracekit.scoring.weights import CALIBRATED_EPS_RANGE

logger = logging.getLogger(__name__)

STANDARD_DP_EPS = 8.0
SWEEP_EPS_GRID = tuple(float(e) for e in np.arange(CALIBRATED_EPS_RANGE[0], CALIBRATED_EPS_RANGE[1] + 0.5))
CALIBRATION_STEPS = 60


def uniform_sample(points: Sequence, target_count: int) -> list:
    """Every round(j * (n - 1) / (m - 1))-th point, j = 0..m-1, halves rounding up."""
    n, m = len(points), target_count
    if m < 2:
        raise TargetTooSmall(f"target_count {m} < 2")
    if m > n:
        raise TargetTooLarge(f"target_count {m} exceeds {n} input points")
    return [points[(2 * j * (n - 1) + (m - 1)) // (2 * (m - 1))] for j in range(m)]


def simplify_fixed(points: Sequence, eps: float = STANDARD_DP_EPS) -> list:
    """Standard DP: one tolerance for the whole trace."""
    if len(points) <= 2:
        return list(points)
    return [points[i] for i in dp_indices(coords(points), eps)]


def calibrate_tolerance(points: Sequence, target_count: int) -> Tuple[float, int]:
    """Smallest tolerance (to bisection precision) whose DP output has at most
    target_count points. Returns (eps, retained count)."""
    n = len(points)
    if n <= 2:
        return STANDARD_DP_EPS, n
    if target_count < 2:
        raise TargetTooSmall(f"target_count {target_count} < 2")

    xy = coords(points)
    span = float(np.ptp(xy, axis=0).max())
    lo, hi = 0.0, max(span, 1.0) * 2.0
    hi_count = len(dp_indices(xy, hi))
    for _ in range(CALIBRATION_STEPS):
        mid = (lo + hi) / 2.0
        count = len(dp_indices(xy, mid))
        if count <= target_count:
            hi, hi_count = mid, count
        else:
            lo = mid
    return hi, hi_count


def compare_methods(
    segments: Sequence[AlignedSegment],
    image_width: float,
    image_height: float,
    window_length: int = 5,
) -> List[MethodResult]:
    """Semantic DP against standard DP and uniform sampling at the same keypoint budget.

    Each method's LBM (k=0, fixed windows) is scored against the full trace.
    """
    full = [p for seg in segments for p in seg.points]
    if not full:
        raise EmptyTrace("no points to compare methods on")
    config = LbmConfig(k=0, fixed_L=window_length)

    def score(kept) -> float:
        return lbm(kept, full, config, image_width, image_height)

    semantic, report = simplify_semantic(segments, image_width, image_height)
    budget = max(2, report.output_points) if len(full) >= 2 else len(full)
    results = [
        MethodResult(
            method="semantic_dp",
            keypoints=report.output_points,
            compression=report.compression,
            lbm_k0=score(semantic.points),
        )
    ]

    eps, _ = calibrate_tolerance(full, budget)
    standard = simplify_fixed(full, eps)
    results.append(
        MethodResult(
            method="standard_dp",
            tolerance=eps,
            keypoints=len(standard),
            compression=compression_of(len(full), len(standard)),
            lbm_k0=score(standard),
        )
    )

    if len(full) >= 2:
        uniform = uniform_sample(full, min(budget, len(full)))
        results.append(
            MethodResult(
                method="uniform",
                keypoints=len(uniform),
                compression=compression_of(len(full), len(uniform)),
                lbm_k0=score(uniform),
            )
        )
    return results


def compression_sweep(
    word_segments: Sequence[AlignedSegment],
    spans: Sequence[PhraseSpan],
    image_width: float,
    image_height: float,
    eps_grid: Sequence[float] = SWEEP_EPS_GRID,
) -> List[SweepPoint]:
    sweep = []
    for eps_base in eps_grid:
        phrases = merge_to_phrases(word_segments, spans, eps_base)
        _, report = simplify_semantic(phrases, image_width, image_height)
        sweep.append(
            SweepPoint(eps_base=eps_base, keypoints=report.output_points, compression=report.compression)
        )
        logger.debug(f"eps_base={eps_base}: {report.output_points} keypoints")
    return sweep

