import math

import numpy as np
import pytest

from tracekit.errors import NonFiniteComponent, ShapeMismatch, TargetOutOfRange
from tracekit.nn.seg import (
    IGNORE_ID,
    MaskBatch,
    dice_loss,
    refinement_loss,
    segmentation_objective,
    text_ce_loss,
    total_loss,
    weight_map,
)


def _square(size=16, top=4, left=4, side=8):
    m = np.zeros((size, size))
    m[top:top + side, left:left + side] = 1.0
    return m


def _oracle_refinement(pred, gt, alpha):
    k, h, w = pred.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            hits = sum(1 for q in range(k) if pred[q, i, j] >= 0.5)
            a = alpha if hits >= 2 else 1.0
            for q in range(k):
                p = min(max(pred[q, i, j], 1e-7), 1 - 1e-7)
                g = gt[q, i, j]
                total += a * -(g * math.log(p) + (1 - g) * math.log(1 - p))
    return total / (k * h * w)


class TestDice:
    def test_perfect_overlap(self):
        gt = _square()
        assert 0.0 <= dice_loss(gt, gt) <= 1e-5

    def test_disjoint(self):
        assert dice_loss(_square(top=0, left=0, side=4), _square(top=8, left=8, side=4)) == pytest.approx(1.0)

    def test_half_coverage(self):
        gt = _square(side=8)
        pred = np.zeros_like(gt)
        pred[4:8, 4:12] = 1.0
        assert dice_loss(pred, gt) == pytest.approx(1 / 3, abs=1e-6)

    def test_range_and_symmetry(self, rng):
        for _ in range(20):
            a = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
            b = (rng.uniform(size=(8, 8)) > 0.5).astype(float)
            assert 0.0 <= dice_loss(a, b) <= 1.0
            assert dice_loss(a, b) == pytest.approx(dice_loss(b, a))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            dice_loss(np.zeros((4, 4)), np.zeros((4, 5)))


class TestWeightMap:
    def test_single_mask_has_no_overlap(self, rng):
        assert np.all(weight_map(rng.uniform(size=(1, 8, 8))) == 1.0)

    def test_full_overlap(self):
        preds = np.stack([_square(), _square()]) * 0.9
        weights = weight_map(preds)
        assert np.all(weights[4:12, 4:12] == 2.0)
        assert np.all(weights[:4] == 1.0)

    def test_single_pixel_overlap(self):
        a, b = np.zeros((4, 4)), np.zeros((4, 4))
        a[0, :2] = 0.8
        b[0, 1:3] = 0.6
        weights = weight_map(np.stack([a, b]), alpha=3.0)
        expected = np.ones((4, 4))
        expected[0, 1] = 3.0
        assert np.array_equal(weights, expected)

    def test_threshold_is_inclusive(self):
        assert weight_map(np.full((2, 1, 1), 0.5))[0, 0] == 2.0

    def test_values_are_one_or_alpha(self, rng):
        weights = weight_map(rng.uniform(size=(4, 8, 8)))
        assert set(np.unique(weights)) <= {1.0, 2.0}

    def test_needs_a_batch(self):
        with pytest.raises(ShapeMismatch):
            weight_map(np.zeros((8, 8)))


class TestRefinementLoss:
    def test_correct_labels(self):
        gt = _square()
        assert refinement_loss(MaskBatch(pred=gt, gt=gt)) <= 1e-5

    def test_uniform_prediction_is_ln2(self):
        batch = MaskBatch(pred=np.full((16, 16), 0.5), gt=_square())
        assert refinement_loss(batch) == pytest.approx(math.log(2), abs=1e-12)

    def test_matches_scalar_loop(self, rng):
        pred = rng.uniform(size=(3, 6, 6))
        gt = (rng.uniform(size=(3, 6, 6)) > 0.6).astype(float)
        expected = _oracle_refinement(pred, gt, 2.0)
        assert refinement_loss(MaskBatch(pred=pred, gt=gt)) == pytest.approx(expected, rel=1e-10)

    def test_alpha_one_is_plain_bce(self, rng):
        pred = rng.uniform(0.01, 0.99, size=(3, 5, 5))
        gt = (rng.uniform(size=(3, 5, 5)) > 0.5).astype(float)
        bce = -(gt * np.log(pred) + (1 - gt) * np.log(1 - pred))
        assert refinement_loss(MaskBatch(pred=pred, gt=gt, alpha=1.0)) == pytest.approx(bce.mean(), rel=1e-12)


class TestMaskBatch:
    def test_promotes_single_mask(self):
        assert MaskBatch(pred=np.zeros((4, 4)), gt=np.zeros((4, 4))).k == 1

    @pytest.mark.parametrize(
        "pred,gt,alpha",
        [
            (np.full((2, 2), 1.5), np.zeros((2, 2)), 2.0),
            (np.zeros((2, 2)), np.full((2, 2), 0.5), 2.0),
            (np.full((2, 2), np.nan), np.zeros((2, 2)), 2.0),
            (np.zeros((2, 2)), np.zeros((2, 2)), 0.5),
        ],
    )
    def test_rejects_invalid(self, pred, gt, alpha):
        with pytest.raises(ValueError):
            MaskBatch(pred=pred, gt=gt, alpha=alpha)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            MaskBatch(pred=np.zeros((2, 4, 4)), gt=np.zeros((3, 4, 4)))


class TestTextLoss:
    def test_uniform_logits(self):
        assert text_ce_loss(np.zeros((5, 10)), [0, 3, 9, 2, 2]) == pytest.approx(math.log(10), abs=1e-12)

    def test_confident_correct(self):
        logits = np.full((3, 10), -50.0)
        targets = [1, 4, 7]
        logits[np.arange(3), targets] = 50.0
        assert text_ce_loss(logits, targets) == pytest.approx(0.0, abs=1e-12)

    def test_ignored_positions(self):
        logits = np.zeros((3, 4))
        logits[0, 2] = 100.0
        assert text_ce_loss(logits, [2, IGNORE_ID, IGNORE_ID]) == pytest.approx(0.0, abs=1e-12)

    def test_all_ignored(self, caplog):
        assert text_ce_loss(np.zeros((2, 4)), [IGNORE_ID, IGNORE_ID]) == 0.0
        assert "ignored" in caplog.text

    @pytest.mark.parametrize("bad", [4, -1])
    def test_target_out_of_range(self, bad):
        with pytest.raises(TargetOutOfRange):
            text_ce_loss(np.zeros((2, 4)), [0, bad])


class TestTotalLoss:
    @pytest.mark.parametrize(
        "parts,expected",
        [((0.0, 0.0, 0.0), 0.0), ((1.0, 1.0, 1.0), 4.0), ((0.5, 0.2, 0.1), 0.9)],
    )
    def test_weighted_sum(self, parts, expected):
        assert total_loss(*parts) == pytest.approx(expected)

    @pytest.mark.parametrize("parts", [(math.nan, 0, 0), (0, math.inf, 0), (0, 0, -0.1)])
    def test_rejects_bad_components(self, parts):
        with pytest.raises(NonFiniteComponent):
            total_loss(*parts)

    def test_objective_combines_components(self, rng):
        gt = np.stack([_square(8, 0, 0, 4), _square(8, 2, 2, 4)])
        pred = np.clip(gt * 0.8 + rng.uniform(0, 0.2, gt.shape), 0, 1)
        losses = segmentation_objective(MaskBatch(pred=pred, gt=gt), l_txt=0.3)
        assert losses.total == pytest.approx(0.3 + losses.refinement + 2.0 * losses.dice)
        assert losses.dice == pytest.approx(np.mean([dice_loss(p, g) for p, g in zip(pred, gt)]))
