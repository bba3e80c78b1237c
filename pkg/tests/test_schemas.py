import math

import pytest
from pydantic import ValidationError

from tracekit.errors import EmptyTrace, NonFiniteValue, NonMonotoneTime
from tracekit.models.schemas import (
    AlignedSegment,
    LbmConfig,
    PhraseSpan,
    QuantizedTrace,
    ScorerConfig,
    ScorerMode,
    TimedTrace,
    TimedWord,
    TracePoint,
    TvpConfig,
)
from tracekit.models.validation import validate_trace
from tracekit.scoring.weights import tolerance_of, weight_of


def _trace(points, w=100.0, h=100.0):
    return TimedTrace(points=[TracePoint(x=x, y=y, t=t) for x, y, t in points], image_width=w, image_height=h)


class TestValidateTrace:
    def test_in_bounds_trace_is_unchanged(self):
        trace = _trace([(1, 2, 0.0), (3, 4, 0.1), (5, 6, 0.2)])
        out, clamps = validate_trace(trace)
        assert out == trace
        assert clamps == 0

    def test_out_of_bounds_point_is_clamped(self):
        out, clamps = validate_trace(_trace([(-5, 10, 0.1)]))
        assert out.points[0] == TracePoint(x=0, y=10, t=0.1)
        assert clamps == 1

    def test_clamps_to_far_edges(self):
        out, clamps = validate_trace(_trace([(120, 130, 0.0), (50, 50, 0.1)]))
        assert out.points[0].xy == (100, 100)
        assert clamps == 1

    def test_decreasing_time_rejected(self):
        with pytest.raises(NonMonotoneTime):
            validate_trace(_trace([(1, 1, 0.2), (2, 2, 0.1)]))

    def test_equal_timestamps_allowed(self):
        validate_trace(_trace([(1, 1, 0.2), (2, 2, 0.2)]))

    def test_empty_trace_rejected(self):
        with pytest.raises(EmptyTrace):
            validate_trace(_trace([]))

    @pytest.mark.parametrize("point", [(math.nan, 1, 0.0), (1, math.inf, 0.0), (1, 1, math.nan), (1, 1, -0.5)])
    def test_non_finite_or_negative_time_rejected(self, point):
        with pytest.raises(NonFiniteValue):
            validate_trace(_trace([point]))

    def test_idempotent(self):
        once, _ = validate_trace(_trace([(-5, 200, 0.0), (50, 50, 0.3)]))
        twice, clamps = validate_trace(once)
        assert twice == once
        assert clamps == 0


class TestModels:
    def test_word_must_not_end_before_start(self):
        with pytest.raises(ValidationError):
            TimedWord(text="x", t_start=1.0, t_end=0.5)

    def test_phrase_span_bounds(self):
        span = PhraseSpan(start=2, stop=4, importance=3)
        assert list(span.word_indices) == [2, 3]
        with pytest.raises(ValidationError):
            PhraseSpan(start=2, stop=2, importance=3)
        with pytest.raises(ValidationError):
            PhraseSpan(start=0, stop=1, importance=6)

    def test_segment_points_inside_time_bounds(self):
        p = TracePoint(x=0, y=0, t=0.5)
        AlignedSegment(points=[p], t_start=0.0, t_end=1.0)
        with pytest.raises(ValidationError):
            AlignedSegment(points=[p], t_start=0.6, t_end=1.0)

    def test_segment_weight_and_tolerance_travel_together(self):
        with pytest.raises(ValidationError):
            AlignedSegment(t_start=0, t_end=1, weight=0.4)

    @pytest.mark.parametrize("score", [1, 2, 3, 4, 5])
    def test_tolerance_times_weight_is_eps_base(self, score):
        w = weight_of(score)
        seg = AlignedSegment(t_start=0, t_end=1, weight=w, tolerance=tolerance_of(w, 5.0), importance=score)
        assert seg.tolerance * seg.weight == pytest.approx(5.0, rel=1e-12)

    def test_quantized_trace_range(self):
        assert len(QuantizedTrace(coords=[(0, 999)])) == 1
        with pytest.raises(ValidationError):
            QuantizedTrace(coords=[(1000, 0)])

    def test_external_scorer_needs_endpoint(self):
        with pytest.raises(ValidationError):
            ScorerConfig(mode=ScorerMode.EXTERNAL)
        with pytest.raises(ValidationError):
            ScorerConfig(eps_base=0)
        with pytest.raises(ValidationError):
            ScorerConfig(timeout=0)

    def test_tvp_config_heads_divide_width(self):
        assert TvpConfig().hidden == 256
        with pytest.raises(ValidationError):
            TvpConfig(d_model=10, n_heads=4)

    def test_lbm_config_window_length(self):
        with pytest.raises(ValidationError):
            LbmConfig(fixed_L=0)

    def test_models_are_frozen(self):
        p = TracePoint(x=1, y=2, t=0)
        with pytest.raises(ValidationError):
            p.x = 3
