import numpy as np
import pytest

from conftest import even_words, make_trace
from tracekit.data.alignment import (
    align_phrases,
    chunk_phrases,
    heuristic_spans,
    merge_to_phrases,
    segment_by_words,
    word_owner,
)
from tracekit.errors import SpanCoverageError
from tracekit.models.schemas import PhraseSpan, TimedTrace, TimedWord, TracePoint

WORDS = ["the", "red", "car", "on", "the", "left"]


def _timed(points):
    return TimedTrace(
        points=[TracePoint(x=float(i), y=0.0, t=t) for i, t in enumerate(points)],
        image_width=100,
        image_height=100,
    )


def test_shared_boundary_goes_to_earlier_word():
    words = [TimedWord(text="A", t_start=0.0, t_end=0.3), TimedWord(text="B", t_start=0.3, t_end=0.6)]
    segments = segment_by_words(_timed([0.3]), words)
    assert [len(s.points) for s in segments] == [1, 0]


def test_orphan_owner_matches_brute_force():
    words = [
        TimedWord(text="a", t_start=0.2, t_end=0.4),
        TimedWord(text="b", t_start=0.7, t_end=0.9),
        TimedWord(text="c", t_start=1.5, t_end=1.6),
    ]

    def brute(t):
        gaps = [0.0 if w.t_start <= t <= w.t_end else min(abs(t - w.t_start), abs(t - w.t_end)) for w in words]
        return int(np.argmin(gaps))

    for t in np.linspace(0.0, 2.0, 401):
        assert word_owner(float(t), words) == brute(float(t)), t


def test_orphans_extend_segment_bounds():
    words = [TimedWord(text="a", t_start=0.2, t_end=0.4), TimedWord(text="b", t_start=0.6, t_end=0.8)]
    segments = segment_by_words(_timed([0.0, 0.3, 0.45, 1.0]), words)
    assert [p.t for p in segments[0].points] == [0.0, 0.3, 0.45]
    assert segments[0].t_start == 0.0
    assert segments[1].t_end == 1.0


def test_segments_partition_the_trace(rng):
    ts = np.sort(rng.uniform(0, 3.0, 200))
    trace = _timed(ts.tolist())
    segments = segment_by_words(trace, even_words(WORDS, 2.5))
    flattened = [p for s in segments for p in s.points]
    assert flattened == trace.points


def test_segment_by_words_needs_words():
    with pytest.raises(ValueError):
        segment_by_words(_timed([0.1]), [])


def test_merge_weights_and_tolerances():
    trace = make_trace([(i, i) for i in range(30)], dt=0.1)
    segments = segment_by_words(trace, even_words(WORDS, 3.0))
    spans = [PhraseSpan(start=0, stop=3, importance=5), PhraseSpan(start=3, stop=6, importance=1)]
    merged = merge_to_phrases(segments, spans, eps_base=5.0)

    assert [m.weight for m in merged] == [1.0, 0.2]
    assert merged[0].tolerance == pytest.approx(5.0)
    assert merged[1].tolerance == pytest.approx(25.0)
    assert merged[0].text == "the red car"
    assert sum(len(m.points) for m in merged) == 30


@pytest.mark.parametrize(
    "spans",
    [
        [(0, 3), (2, 6)],
        [(0, 3), (4, 6)],
        [(0, 3), (3, 5)],
    ],
)
def test_spans_must_tile_words(spans):
    trace = make_trace([(i, i) for i in range(12)], dt=0.1)
    segments = segment_by_words(trace, even_words(WORDS, 1.2))
    with pytest.raises(SpanCoverageError):
        merge_to_phrases(segments, [PhraseSpan(start=a, stop=b, importance=3) for a, b in spans])


def test_chunk_phrases_breaks_before_function_words():
    assert chunk_phrases(WORDS) == [(0, 3), (3, 6)]
    assert chunk_phrases(["dog.", "cat"]) == [(0, 1), (1, 2)]
    assert chunk_phrases([]) == []


def test_heuristic_spans_cover_all_words():
    spans = heuristic_spans(even_words(WORDS, 1.0))
    assert [(s.start, s.stop, s.importance) for s in spans] == [(0, 3, 4), (3, 6, 3)]


def test_align_phrases_fills_gaps_with_single_words(caplog):
    words = even_words(WORDS, 1.0)
    spans = align_phrases(words, [("red car", 5), ("zebra", 4), ("the left", 3)])
    assert [(s.start, s.stop, s.importance) for s in spans] == [
        (0, 1, 1),
        (1, 3, 5),
        (3, 4, 1),
        (4, 6, 3),
    ]
    assert "zebra" in caplog.text
