"""Word- and phrase-aligned trace segmentation."""

from __future__ import annotations

import logging
from typing import List, Sequence, Tuple

from tracekit.errors import SpanCoverageError
from tracekit.models.schemas import (
    DEFAULT_EPS_BASE,
    AlignedSegment,
    PhraseSpan,
    TimedTrace,
    TimedWord,
    TracePoint,
)
from tracekit.scoring.heuristic import heuristic_score, is_stopword, tokens
from tracekit.scoring.weights import tolerance_of, weight_of

logger = logging.getLogger(__name__)

PHRASE_BREAK_PUNCTUATION = ".,;:!?"


def word_owner(t: float, words: Sequence[TimedWord]) -> int:
    """Index of the word interval a timestamp belongs to.

    The earliest containing interval wins (so a shared boundary goes to the
    earlier word); a timestamp inside no interval goes to the interval with
    the smallest time gap, ties to the earlier word.
    """
    best, best_gap = 0, float("inf")
    for i, w in enumerate(words):
        if w.t_start <= t <= w.t_end:
            return i
        gap = w.t_start - t if t < w.t_start else t - w.t_end
        if gap < best_gap:
            best, best_gap = i, gap
    return best


def segment_by_words(trace: TimedTrace, words: Sequence[TimedWord]) -> List[AlignedSegment]:
    """Partition trace points into one segment per word.

    Segments may be empty when a word has no trace points. Orphan points
    stretch their segment's time bounds so every point stays inside them.
    """
    if not words:
        raise ValueError("segment_by_words needs at least one timed word")

    buckets: List[List[TracePoint]] = [[] for _ in words]
    for p in trace.points:
        buckets[word_owner(p.t, words)].append(p)

    segments = []
    for w, pts in zip(words, buckets):
        t_start, t_end = w.t_start, w.t_end
        if pts:
            t_start = min(t_start, pts[0].t)
            t_end = max(t_end, pts[-1].t)
        segments.append(
            AlignedSegment(points=pts, t_start=t_start, t_end=t_end, text=w.text)
        )
    return segments


def check_span_cover(spans: Sequence[PhraseSpan], n_words: int) -> List[PhraseSpan]:
    """Return spans in word order, raising unless they tile 0..n_words exactly."""
    ordered = sorted(spans, key=lambda s: s.start)
    cursor = 0
    for span in ordered:
        if span.start < cursor:
            raise SpanCoverageError(f"span [{span.start}, {span.stop}) overlaps the previous span")
        if span.start > cursor:
            raise SpanCoverageError(f"words {cursor}..{span.start - 1} are not covered by any span")
        cursor = span.stop
    if cursor != n_words:
        raise SpanCoverageError(f"spans cover {cursor} of {n_words} words")
    return ordered


def merge_to_phrases(
    segments: Sequence[AlignedSegment],
    spans: Sequence[PhraseSpan],
    eps_base: float = DEFAULT_EPS_BASE,
) -> List[AlignedSegment]:
    """Concatenate word segments into weighted phrase segments."""
    merged = []
    for span in check_span_cover(spans, len(segments)):
        parts = segments[span.start:span.stop]
        weight = weight_of(span.importance)
        merged.append(
            AlignedSegment(
                points=[p for seg in parts for p in seg.points],
                t_start=min(seg.t_start for seg in parts),
                t_end=max(seg.t_end for seg in parts),
                text=" ".join(seg.text for seg in parts if seg.text),
                importance=span.importance,
                weight=weight,
                tolerance=tolerance_of(weight, eps_base),
            )
        )
    return merged


# ── Phrase segmentation ───────────────────────────────────────


def chunk_phrases(words: Sequence[str]) -> List[Tuple[int, int]]:
    """Offline phrase chunking as [start, stop) word ranges.

    A phrase breaks before a stopword that follows a content word, and after
    a word ending in sentence punctuation.
    """
    ranges = []
    start = 0
    for i in range(1, len(words)):
        prev, cur = words[i - 1], words[i]
        if prev.rstrip().endswith(tuple(PHRASE_BREAK_PUNCTUATION)) or (
            is_stopword(cur) and not is_stopword(prev)
        ):
            ranges.append((start, i))
            start = i
    if words:
        ranges.append((start, len(words)))
    return ranges


def heuristic_spans(words: Sequence[TimedWord]) -> List[PhraseSpan]:
    texts = [w.text for w in words]
    return [
        PhraseSpan(start=a, stop=b, importance=heuristic_score(" ".join(texts[a:b])))
        for a, b in chunk_phrases(texts)
    ]


def phrase_texts(words: Sequence[TimedWord], spans: Sequence[PhraseSpan]) -> List[str]:
    return [" ".join(w.text for w in words[s.start:s.stop]) for s in spans]


def _match_at(word_tokens: List[List[str]], j: int, target: List[str]) -> int:
    """Stop index if words j.. spell out target exactly, else -1."""
    acc: List[str] = []
    k = j
    while k < len(word_tokens) and len(acc) < len(target):
        acc.extend(word_tokens[k])
        k += 1
    return k if acc == target else -1


def align_phrases(
    words: Sequence[TimedWord],
    scored_phrases: Sequence[Tuple[str, int]],
) -> List[PhraseSpan]:
    """Map a model's (phrase, score) segmentation onto the timed words.

    Phrases are matched in order on normalized tokens. Words left uncovered
    become single-word spans scored by the heuristic; phrases that match
    nowhere are dropped with a warning.
    """
    word_tokens = [tokens(w.text) for w in words]
    spans: List[PhraseSpan] = []

    def fill_gap(a: int, b: int):
        for i in range(a, b):
            spans.append(PhraseSpan(start=i, stop=i + 1, importance=heuristic_score(words[i].text)))

    cursor = 0
    for phrase, score in scored_phrases:
        target = tokens(phrase)
        if not target:
            continue
        for j in range(cursor, len(words)):
            stop = _match_at(word_tokens, j, target)
            if stop > j:
                fill_gap(cursor, j)
                spans.append(PhraseSpan(start=j, stop=stop, importance=score))
                cursor = stop
                break
        else:
            logger.warning(f"Scored phrase {phrase!r} not found in the timed words; dropped")

    fill_gap(cursor, len(words))
    return spans
