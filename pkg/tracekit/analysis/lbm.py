"""LBM (local bipartite matching) trace metric.

Definition ``lbm-v1``:

1. Split the predicted and the ground-truth trace into windows, either one
   per timed word (points assigned by timestamp) or fixed runs of L points
   (M = ceil(n / L) per trace), and pair windows by index.
2. Predicted window i may match the union of GT windows i-k .. i+k.
3. Within each window, solve a minimum-cost bipartite matching of
   min(|pred|, |candidates|) pairs on Euclidean distance divided by the
   image diagonal.
4. A predicted point whose window has no GT candidates costs 1.0.
5. Score = (sum of pair costs + penalties) / (pairs + penalized points).

Lower is better; identical traces score 0.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from tracekit.analysis.matching import min_cost_matching
from tracekit.analysis.simplify import coords
from tracekit.data.alignment import word_owner
from tracekit.errors import DimensionMismatch, EmptyTrace
from tracekit.models.schemas import LbmConfig, LbmReport, TimedTrace, TimedWord, TracePoint, WindowMode

logger = logging.getLogger(__name__)

LBM_DEFINITION = "lbm-v1"
UNMATCHED_PENALTY = 1.0


class LbmTerms(BaseModel):
    """Additive pieces of an LBM score, so batches aggregate exactly."""

    cost: float = 0.0
    n_pairs: int = 0
    n_penalized: int = 0

    def __add__(self, other: "LbmTerms") -> "LbmTerms":
        return LbmTerms(
            cost=self.cost + other.cost,
            n_pairs=self.n_pairs + other.n_pairs,
            n_penalized=self.n_penalized + other.n_penalized,
        )

    @property
    def score(self) -> float:
        total = self.n_pairs + self.n_penalized
        return (self.cost + UNMATCHED_PENALTY * self.n_penalized) / total if total else 0.0


def fixed_windows(n: int, length: int) -> List[List[int]]:
    return [list(range(i, min(i + length, n))) for i in range(0, n, length)]


def word_windows(points: Sequence[TracePoint], words: Sequence[TimedWord]) -> List[List[int]]:
    windows: List[List[int]] = [[] for _ in words]
    for j, p in enumerate(points):
        windows[word_owner(p.t, words)].append(j)
    return windows


def _unwrap(trace, width: float, height: float) -> list:
    if isinstance(trace, TimedTrace):
        if (trace.image_width, trace.image_height) != (width, height):
            raise DimensionMismatch(
                f"trace is {trace.image_width}x{trace.image_height}, metric asked for {width}x{height}"
            )
        return list(trace.points)
    return list(trace)


def _use_word_windows(pred_pts, gt_pts, config: LbmConfig, words) -> bool:
    if config.window_mode != WindowMode.BY_WORD:
        return False
    if not words:
        logger.warning("Word windows requested without timed words; using fixed windows")
        return False
    if not all(isinstance(p, TracePoint) for p in (*pred_pts, *gt_pts)):
        logger.warning("Word windows need timestamps on both traces; using fixed windows")
        return False
    return True


def lbm_terms(
    pred,
    gt,
    config: LbmConfig,
    width: float,
    height: float,
    words: Optional[Sequence[TimedWord]] = None,
) -> LbmTerms:
    if not (width > 0 and height > 0):
        raise DimensionMismatch(f"image size {width}x{height} must be positive")
    pred_pts, gt_pts = _unwrap(pred, width, height), _unwrap(gt, width, height)
    if not pred_pts or not gt_pts:
        raise EmptyTrace("LBM needs non-empty predicted and ground-truth traces")

    diagonal = math.hypot(width, height)
    pred_xy, gt_xy = coords(pred_pts), coords(gt_pts)
    if _use_word_windows(pred_pts, gt_pts, config, words):
        pred_win, gt_win = word_windows(pred_pts, words), word_windows(gt_pts, words)
    else:
        pred_win, gt_win = fixed_windows(len(pred_pts), config.fixed_L), fixed_windows(len(gt_pts), config.fixed_L)

    terms = LbmTerms()
    for i, a in enumerate(pred_win):
        if not a:
            continue
        lo, hi = max(0, i - config.k), min(len(gt_win) - 1, i + config.k)
        cand = [j for w in gt_win[lo:hi + 1] for j in w] if lo <= hi else []
        if not cand:
            terms += LbmTerms(n_penalized=len(a))
            continue
        diff = pred_xy[a][:, None, :] - gt_xy[cand][None, :, :]
        cost = np.hypot(diff[..., 0], diff[..., 1]) / diagonal
        matching = min_cost_matching(cost)
        terms += LbmTerms(cost=matching.cost, n_pairs=len(matching.pairs))
    return terms


def lbm(
    pred,
    gt,
    config: LbmConfig,
    width: float,
    height: float,
    words: Optional[Sequence[TimedWord]] = None,
) -> float:
    return lbm_terms(pred, gt, config, width, height, words).score


def config_fingerprint(config: LbmConfig, ks: Iterable[int]) -> str:
    payload = {
        "definition": LBM_DEFINITION,
        "window_mode": config.window_mode.value,
        "fixed_L": config.fixed_L,
        "normalization": config.normalization,
        "ks": sorted(set(ks)),
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def report_from_terms(terms_by_k: dict, config: LbmConfig) -> LbmReport:
    ks = sorted(terms_by_k)
    first = terms_by_k[ks[0]]
    return LbmReport(
        scores={f"lbm_k{k}": terms_by_k[k].score for k in ks},
        n_pairs=first.n_pairs,
        n_penalized=first.n_penalized,
        config_fingerprint=config_fingerprint(config, ks),
        definition=LBM_DEFINITION,
    )


def lbm_report(
    pred,
    gt,
    width: float,
    height: float,
    ks: Tuple[int, ...] = (0, 1),
    config: Optional[LbmConfig] = None,
    words: Optional[Sequence[TimedWord]] = None,
) -> LbmReport:
    config = config or LbmConfig()
    terms = {
        k: lbm_terms(pred, gt, config.model_copy(update={"k": k}), width, height, words)
        for k in ks
    }
    return report_from_terms(terms, config)
