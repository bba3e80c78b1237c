"""Segmentation objective: soft dice, overlap-weighted BCE, text cross-entropy."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel

from tracekit.errors import NonFiniteComponent, ShapeMismatch, TargetOutOfRange

logger = logging.getLogger(__name__)

DICE_SMOOTH = 1e-6
PROB_EPS = 1e-7
BINARIZE_THRESHOLD = 0.5
DEFAULT_ALPHA = 2.0
LAMBDA_REF = 1.0
LAMBDA_DICE = 2.0
IGNORE_ID = -100


def _same_shape(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what}: shapes {a.shape} and {b.shape} differ")


@dataclass
class MaskBatch:
    """K predicted probability masks and their binary ground truth, (K, H, W)."""

    pred: np.ndarray
    gt: np.ndarray
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        self.pred = np.asarray(self.pred, dtype=np.float64)
        self.gt = np.asarray(self.gt, dtype=np.float64)
        if self.pred.ndim == 2:
            self.pred = self.pred[None]
        if self.gt.ndim == 2:
            self.gt = self.gt[None]
        _same_shape(self.pred, self.gt, "mask batch")
        if self.pred.ndim != 3 or self.pred.shape[0] == 0:
            raise ShapeMismatch(f"mask batch must be (K, H, W) with K >= 1, got {self.pred.shape}")
        if not np.all(np.isin(self.gt, (0.0, 1.0))):
            raise ValueError("ground-truth masks must be binary")
        if not np.all(np.isfinite(self.pred)) or self.pred.min() < 0 or self.pred.max() > 1:
            raise ValueError("predicted masks must be finite probabilities in [0, 1]")
        if self.alpha < 1:
            raise ValueError(f"alpha {self.alpha} < 1")

    @property
    def k(self) -> int:
        return self.pred.shape[0]


def dice_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    pred, gt = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    _same_shape(pred, gt, "dice_loss")
    inter = np.sum(pred * gt)
    return float(1.0 - 2.0 * inter / (pred.sum() + gt.sum() + DICE_SMOOTH))


def weight_map(preds: np.ndarray, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """alpha where two or more binarized predictions overlap, else 1."""
    preds = np.asarray(preds, dtype=np.float64)
    if preds.ndim != 3 or preds.shape[0] == 0:
        raise ShapeMismatch(f"weight_map expects (K, H, W) with K >= 1, got {preds.shape}")
    overlap = (preds >= BINARIZE_THRESHOLD).sum(axis=0) >= 2
    return np.where(overlap, alpha, 1.0)


def refinement_loss(batch: MaskBatch) -> float:
    weights = weight_map(batch.pred, batch.alpha)
    p = np.clip(batch.pred, PROB_EPS, 1.0 - PROB_EPS)
    bce = -(batch.gt * np.log(p) + (1.0 - batch.gt) * np.log(1.0 - p))
    return float(np.mean(weights[None] * bce))


def text_ce_loss(logits: np.ndarray, targets, ignore_id: int = IGNORE_ID) -> float:
    """Mean -log softmax(logits)[target] over non-ignored positions."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeMismatch(f"logits {logits.shape} do not match targets {targets.shape}")
    keep = targets != ignore_id
    bad = keep & ((targets < 0) | (targets >= logits.shape[1]))
    if np.any(bad):
        raise TargetOutOfRange(f"target {int(targets[bad][0])} outside [0, {logits.shape[1]})")
    if not np.any(keep):
        logger.warning("Every text target is ignored; text loss defined as 0")
        return 0.0

    rows = logits[keep]
    shifted = rows - rows.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(len(rows)), targets[keep]]
    return float(np.mean(log_z - picked))


def total_loss(
    l_txt: float,
    l_ref: float,
    l_dice: float,
    lambda_ref: float = LAMBDA_REF,
    lambda_dice: float = LAMBDA_DICE,
) -> float:
    for name, value in (("l_txt", l_txt), ("l_ref", l_ref), ("l_dice", l_dice)):
        if not math.isfinite(value) or value < 0:
            raise NonFiniteComponent(f"{name} = {value} is not a finite non-negative loss")
    return l_txt + lambda_ref * l_ref + lambda_dice * l_dice


class SegmentationLosses(BaseModel):
    dice: float
    refinement: float
    text: float
    total: float


def segmentation_objective(batch: MaskBatch, l_txt: float = 0.0) -> SegmentationLosses:
    """Mean dice over targets, refinement loss and their weighted total."""
    dice = float(np.mean([dice_loss(p, g) for p, g in zip(batch.pred, batch.gt)]))
    ref = refinement_loss(batch)
    return SegmentationLosses(dice=dice, refinement=ref, text=l_txt, total=total_loss(l_txt, ref, dice))
