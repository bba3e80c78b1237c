"""Batch pipelines behind the command-line surface.

Every command reads line-oriented input, processes records on a bounded
thread pool, and writes one JSON line per record in input order. Record
failures become error lines; the command's return value is the exit code.
"""

from __future__ import annotations

import json
import logging
import threading
from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from itertools import zip_longest
from typing import Callable, Deque, Iterable, Iterator, List, Sequence, TextIO, Tuple

import pandas as pd

from tracekit.analysis.lbm import LbmTerms, lbm_terms, report_from_terms
from tracekit.analysis.simplify import simplify_semantic
from tracekit.analysis.tokenize import dequantize, is_token_string, parse, quantize, serialize
from tracekit.data.alignment import align_phrases, heuristic_spans, merge_to_phrases, segment_by_words
from tracekit.data.narratives import open_text, parse_record, record_from_obj
from tracekit.errors import TraceKitError
from tracekit.models.schemas import (
    Command,
    LbmConfig,
    NarrativeRecord,
    PhraseSpan,
    RunConfig,
    ScorerMode,
    SimplifyReport,
    TimedTrace,
    TimedWord,
    TracePoint,
    TvpConfig,
)
from tracekit.models.validation import validate_trace
from tracekit.nn.gradcheck import grad_check
from tracekit.nn.masks import read_masks
from tracekit.nn.seg import MaskBatch, segmentation_objective
from tracekit.scoring.external import ExternalScorer

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

# lines submitted ahead of the writer, per worker
IN_FLIGHT_PER_WORKER = 4

Line = Tuple[int, str]

# failures that stay local to one record
RECORD_ERRORS = (TraceKitError, ValueError, TypeError, KeyError, IndexError)


class RecordFailed(Exception):
    """Raised under --strict to stop at the first failing record."""


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def _error_line(line_no: int, error: Exception) -> dict:
    return {"line": line_no, "error": f"{type(error).__name__}: {error}"}


def iter_lines(paths: Sequence[str]) -> Iterator[Line]:
    """(line number, text) for every non-blank line, numbering per file."""
    for path in paths:
        with open_text(path) as f:
            for line_no, line in enumerate(f, 1):
                if line.strip():
                    yield line_no, line.rstrip("\n")


def run_ordered(fn: Callable[[Line], dict], lines: Iterable[Line], jobs: int) -> Iterator[dict]:
    """Map fn over lines on a worker pool, yielding results in input order.

    At most ``jobs * IN_FLIGHT_PER_WORKER`` lines are read ahead of the
    consumer.
    """
    if jobs <= 1:
        yield from map(fn, lines)
        return
    window = jobs * IN_FLIGHT_PER_WORKER
    pending: Deque[Future] = deque()
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        try:
            for item in lines:
                pending.append(pool.submit(fn, item))
                if len(pending) >= window:
                    yield pending.popleft().result()
            while pending:
                yield pending.popleft().result()
        finally:
            for future in pending:
                future.cancel()


# ── Phrase scoring ────────────────────────────────────────────


class SpanScorer:
    """Turns timed words into a scored phrase cover, offline or via the external scorer."""

    def __init__(self, config: RunConfig):
        self.mode = config.scorer.mode
        self._external = ExternalScorer(config.scorer) if self.mode == ScorerMode.EXTERNAL else None
        self._gate = threading.BoundedSemaphore(config.scorer.max_in_flight)

    def spans(self, words: Sequence[TimedWord], caption: str) -> List[PhraseSpan]:
        if self._external is None:
            return heuristic_spans(words)
        with self._gate:
            scored = self._external.segment(caption or " ".join(w.text for w in words))
        return align_phrases(words, scored)


# ── simplify ──────────────────────────────────────────────────


def _words_or_whole(record: NarrativeRecord) -> List[TimedWord]:
    if record.timed_words:
        return list(record.timed_words)
    pts = record.trace.points
    return [TimedWord(text=record.caption or "", t_start=pts[0].t, t_end=pts[-1].t)]


def simplify_record(record: NarrativeRecord, scorer: SpanScorer, eps_base: float) -> Tuple[TimedTrace, SimplifyReport]:
    """Word segmentation, phrase scoring and semantic DP for one record."""
    words = _words_or_whole(record)
    segments = segment_by_words(record.trace, words)
    phrases = merge_to_phrases(segments, scorer.spans(words, record.caption), eps_base)
    return simplify_semantic(phrases, record.image_width, record.image_height)


def _simplified_line(record: NarrativeRecord, trace: TimedTrace, report: SimplifyReport) -> dict:
    return {
        "image_id": record.image_id,
        "image_width": record.image_width,
        "image_height": record.image_height,
        "trace": [[p.x, p.y, p.t] for p in trace.points],
        "report": report.model_dump(),
    }


def _write_all(results: Iterator[dict], out: TextIO, strict: bool):
    for result in results:
        out.write(_dumps(result) + "\n")
        if strict and "error" in result:
            raise RecordFailed(result["error"])


def cmd_simplify(config: RunConfig, out: TextIO) -> int:
    scorer = SpanScorer(config)
    size = (config.image_width, config.image_height)
    totals = {"records": 0, "errors": 0, "input_points": 0, "output_points": 0}

    def process(item: Line) -> dict:
        line_no, text = item
        try:
            record = parse_record(text, size)
            trace, report = simplify_record(record, scorer, config.eps_base)
        except RECORD_ERRORS as e:
            logger.warning(f"line {line_no}: {e}")
            return _error_line(line_no, e)
        return _simplified_line(record, trace, report)

    def counted(results: Iterator[dict]) -> Iterator[dict]:
        for result in results:
            if "error" in result:
                totals["errors"] += 1
            else:
                totals["records"] += 1
                totals["input_points"] += result["report"]["input_points"]
                totals["output_points"] += result["report"]["output_points"]
            yield result

    try:
        _write_all(counted(run_ordered(process, iter_lines(config.inputs), config.jobs)), out, config.strict)
    except RecordFailed:
        logger.error("Stopping at the first failed record (--strict)")

    n_in, n_out = totals["input_points"], totals["output_points"]
    summary = dict(totals, compression=1.0 - n_out / n_in if n_in else 0.0)
    out.write(_dumps({"summary": summary}) + "\n")
    logger.info(f"Simplified {totals['records']} records ({totals['errors']} errors)")
    return EXIT_DATA if totals["errors"] else EXIT_OK


# ── tokenize ──────────────────────────────────────────────────


def trace_from_json(obj: dict, image_size: Tuple[float, float]) -> Tuple[TimedTrace, List[TimedWord]]:
    """A trace (and words, when present) from a narrative or simplified-output line."""
    if "traces" in obj:
        record = record_from_obj(obj, image_size)
        return record.trace, list(record.timed_words)
    if "trace" in obj:
        width = float(obj.get("image_width", image_size[0]))
        height = float(obj.get("image_height", image_size[1]))
        points = [TracePoint(x=p[0], y=p[1], t=p[2] if len(p) > 2 else 0.0) for p in obj["trace"]]
        trace, _ = validate_trace(TimedTrace(points=points, image_width=width, image_height=height))
        return trace, []
    raise ValueError("line holds neither 'traces' nor 'trace'")


def tokenize_line(text: str, image_size: Tuple[float, float]) -> str:
    if is_token_string(text):
        return serialize(parse(text))
    trace, _ = trace_from_json(json.loads(text), image_size)
    return serialize(quantize(trace))


def cmd_tokenize(config: RunConfig, out: TextIO, err: TextIO) -> int:
    size = (config.image_width, config.image_height)

    def process(item: Line) -> dict:
        line_no, text = item
        try:
            return {"tokens": tokenize_line(text, size)}
        except RECORD_ERRORS as e:
            return _error_line(line_no, e)

    errors = 0
    for result in run_ordered(process, iter_lines(config.inputs), config.jobs):
        if "error" in result:
            errors += 1
            err.write(_dumps(result) + "\n")
            if config.strict:
                break
        else:
            out.write(result["tokens"] + "\n")
    return EXIT_DATA if errors else EXIT_OK


# ── eval-lbm ──────────────────────────────────────────────────


def _lbm_side(text: str, size: Tuple[float, float]):
    """(points or trace, words, width, height) for one side of a pair."""
    if is_token_string(text):
        return dequantize(parse(text), *size), [], size
    trace, words = trace_from_json(json.loads(text), size)
    return trace, words, (trace.image_width, trace.image_height)


def cmd_eval_lbm(config: RunConfig, out: TextIO) -> int:
    if len(config.inputs) != 2:
        raise ValueError("eval-lbm needs exactly two inputs: PRED GT")
    base = LbmConfig(window_mode=config.window, fixed_L=config.window_length)
    size = (config.image_width, config.image_height)
    totals = {k: LbmTerms() for k in config.ks}
    pairs = zip_longest(iter_lines([config.inputs[0]]), iter_lines([config.inputs[1]]))

    def process(item) -> dict:
        pred_line, gt_line = item
        line_no = (gt_line or pred_line)[0]
        if pred_line is None or gt_line is None:
            return _error_line(line_no, ValueError("prediction and ground-truth files differ in length"))
        try:
            gt, words, (width, height) = _lbm_side(gt_line[1], size)
            pred, _, _ = _lbm_side(pred_line[1], (width, height))
            terms = {
                k: lbm_terms(pred, gt, base.model_copy(update={"k": k}), width, height, words)
                for k in config.ks
            }
        except RECORD_ERRORS as e:
            return _error_line(line_no, e)
        return {"terms": terms}

    errors = 0
    records = 0
    for result in run_ordered(process, pairs, config.jobs):
        if "error" in result:
            errors += 1
            out.write(_dumps(result) + "\n")
            if config.strict:
                break
            continue
        records += 1
        for k, terms in result["terms"].items():
            totals[k] += terms

    report = report_from_terms(totals, base)
    line = {**report.scores, "n_pairs": report.n_pairs, "n_penalized": report.n_penalized}
    line.update(
        records=records,
        errors=errors,
        window=config.window.value,
        config_fingerprint=report.config_fingerprint,
        definition=report.definition,
    )
    out.write(_dumps(line) + "\n")
    return EXIT_DATA if errors else EXIT_OK


# ── check-tvp ─────────────────────────────────────────────────


def cmd_check_tvp(config: RunConfig, out: TextIO) -> int:
    tvp = TvpConfig(d_model=config.d_model, n_heads=config.n_heads, n_blocks=config.n_blocks, seed=config.seed)
    report = grad_check(tvp, seed=config.seed)
    out.write(_dumps({"config": tvp.model_dump(), **report.model_dump()}) + "\n")
    return EXIT_OK if report.passed else EXIT_DATA


# ── loss ──────────────────────────────────────────────────────


def cmd_loss(config: RunConfig, out: TextIO) -> int:
    if len(config.inputs) != 2:
        raise ValueError("loss needs exactly two inputs: PRED_MASKS GT_MASKS")
    try:
        batch = MaskBatch(
            pred=read_masks(config.inputs[0], "pred"),
            gt=read_masks(config.inputs[1], "gt"),
            alpha=config.alpha,
        )
        losses = segmentation_objective(batch, config.text_loss)
    except (TraceKitError, ValueError) as e:
        out.write(_dumps(_error_line(0, e)) + "\n")
        return EXIT_DATA
    out.write(_dumps({"k": batch.k, **losses.model_dump()}) + "\n")
    return EXIT_OK


# ── stats ─────────────────────────────────────────────────────


def cmd_stats(config: RunConfig, out: TextIO) -> int:
    rows, errors = [], 0
    for line_no, text in iter_lines(config.inputs):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            logger.warning(f"line {line_no}: {e}")
            errors += 1
            continue
        if "report" in obj:
            rows.append({"image_id": obj.get("image_id"), **obj["report"]})
        elif "error" in obj:
            errors += 1

    df = pd.DataFrame(rows, columns=["image_id", "input_points", "output_points", "compression"])
    stats = {"records": len(df), "errors": errors}
    if not df.empty:
        stats.update(
            input_points=int(df["input_points"].sum()),
            output_points=int(df["output_points"].sum()),
            compression_mean=float(df["compression"].mean()),
            compression_median=float(df["compression"].median()),
            compression_min=float(df["compression"].min()),
            compression_max=float(df["compression"].max()),
        )
    out.write(_dumps(stats) + "\n")
    return EXIT_OK


COMMANDS = {
    Command.SIMPLIFY: cmd_simplify,
    Command.EVAL_LBM: cmd_eval_lbm,
    Command.CHECK_TVP: cmd_check_tvp,
    Command.LOSS: cmd_loss,
    Command.STATS: cmd_stats,
}


def run(config: RunConfig, out: TextIO, err: TextIO) -> int:
    if config.command == Command.TOKENIZE:
        return cmd_tokenize(config, out, err)
    return COMMANDS[config.command](config, out)
