"""Localized-Narratives style record ingestion.

One JSON object per line::

    {"image_id": "...", "caption": "...",
     "image_width": 640, "image_height": 480,          # optional
     "timed_caption": [{"utterance": "a", "start_time": 0.0, "end_time": 0.2}, ...],
     "traces": [[{"x": 0.1, "y": 0.2, "t": 0.05}, ...], ...]}

Traces in the public release are normalized to [0, 1]; they are detected
(every coordinate <= 1.5) and rescaled to pixels.
"""

from __future__ import annotations

import gzip
import json
import logging
from pathlib import Path
from typing import IO, Iterator, List, Optional, Tuple, Union

from pydantic import ValidationError

from tracekit.errors import MalformedRecord, TraceKitError
from tracekit.models.schemas import NarrativeRecord, TimedTrace, TimedWord, TracePoint
from tracekit.models.validation import validate_trace

logger = logging.getLogger(__name__)

NORMALIZED_COORD_LIMIT = 1.5

ImageSize = Tuple[float, float]


def _require(obj: dict, key: str, kind):
    if key not in obj:
        raise MalformedRecord(f"record is missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise MalformedRecord(f"field {key!r} has type {type(value).__name__}")
    return value


def _image_size(obj: dict, image_size: Optional[ImageSize]) -> ImageSize:
    present = [key for key in ("image_width", "image_height") if key in obj]
    if len(present) == 1:
        raise MalformedRecord(f"record has {present[0]!r} but not its counterpart")
    if present:
        width = _require(obj, "image_width", (int, float))
        height = _require(obj, "image_height", (int, float))
        return float(width), float(height)
    if image_size is not None:
        return float(image_size[0]), float(image_size[1])
    raise MalformedRecord("record has no image_width/image_height and no default size was given")


def _timed_words(obj: dict) -> List[TimedWord]:
    words = []
    for i, item in enumerate(_require(obj, "timed_caption", list)):
        if not isinstance(item, dict):
            raise MalformedRecord(f"timed_caption[{i}] is not an object")
        words.append(
            TimedWord(
                text=_require(item, "utterance", str),
                t_start=_require(item, "start_time", (int, float)),
                t_end=_require(item, "end_time", (int, float)),
            )
        )

    if any(a.t_start > b.t_start for a, b in zip(words, words[1:])):
        logger.warning("timed_caption not ordered by start_time; re-sorting")
        words.sort(key=lambda w: w.t_start)
    return words


def _flatten_strokes(obj: dict) -> List[dict]:
    raw_points = []
    for s, stroke in enumerate(_require(obj, "traces", list)):
        if not isinstance(stroke, list):
            raise MalformedRecord(f"traces[{s}] is not a list of points")
        for p in stroke:
            if not isinstance(p, dict):
                raise MalformedRecord(f"traces[{s}] holds a non-object point")
            raw_points.append(
                {
                    "x": _require(p, "x", (int, float)),
                    "y": _require(p, "y", (int, float)),
                    "t": _require(p, "t", (int, float)),
                }
            )

    if any(a["t"] > b["t"] for a, b in zip(raw_points, raw_points[1:])):
        logger.warning(f"Strokes overlap in time; re-sorting {len(raw_points)} points by t")
        raw_points.sort(key=lambda p: p["t"])
    return raw_points


def parse_record(line: str, image_size: Optional[ImageSize] = None) -> NarrativeRecord:
    """Parse and validate one JSON-lines narrative record."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise MalformedRecord(f"invalid JSON: {e}") from e
    return record_from_obj(obj, image_size)


def record_from_obj(obj, image_size: Optional[ImageSize] = None) -> NarrativeRecord:
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not a JSON object")

    try:
        image_id = str(_require(obj, "image_id", (str, int)))
        caption = obj.get("caption", "")
        if not isinstance(caption, str):
            raise MalformedRecord("field 'caption' is not a string")
        width, height = _image_size(obj, image_size)
        words = _timed_words(obj)
        raw_points = _flatten_strokes(obj)

        if raw_points and all(
            abs(p["x"]) <= NORMALIZED_COORD_LIMIT and abs(p["y"]) <= NORMALIZED_COORD_LIMIT
            for p in raw_points
        ):
            for p in raw_points:
                p["x"] *= width
                p["y"] *= height

        trace = TimedTrace(
            points=[TracePoint(**p) for p in raw_points],
            image_width=width,
            image_height=height,
        )
    except ValidationError as e:
        raise MalformedRecord(str(e)) from e

    trace, _ = validate_trace(trace)

    joined = " ".join(w.text.strip() for w in words)
    if caption and " ".join(caption.split()) != joined:
        logger.warning(f"{image_id}: caption does not match the joined timed words")

    return NarrativeRecord(
        image_id=image_id,
        image_width=width,
        image_height=height,
        caption=caption,
        timed_words=words,
        trace=trace,
    )


def open_text(path: Union[str, Path]) -> IO[str]:
    """Open a UTF-8 text file, gunzipping ``*.gz`` paths."""
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "r", encoding="utf-8")


def read_records(
    path: Union[str, Path],
    image_size: Optional[ImageSize] = None,
) -> Iterator[Tuple[int, Union[NarrativeRecord, TraceKitError]]]:
    """Yield (line number, record or error) for every non-blank line."""
    with open_text(path) as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                yield line_no, parse_record(line, image_size)
            except TraceKitError as e:
                logger.warning(f"{path}:{line_no}: {e}")
                yield line_no, e
