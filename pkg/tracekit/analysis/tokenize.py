"""Coordinate quantization and the ``<traj>`` token grammar.

Canonical form (what :func:`serialize` writes)::

    <traj>(bx1,by1),(bx2,by2),...</traj>

:func:`parse` also accepts

* a single space after any comma in the canonical form,
* the per-point answer form ``<Traj>[x,y]</Traj> <Traj>[x,y]</Traj> ...``,
* the prompt form ``<Trajectory>(x,y), (x,y) </Trajectory>``.

All values must be bins in [0, 999]. Errors carry the byte offset of the
offending character.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from tracekit.errors import EmptyBody, EmptyTrace, OutOfRange, TrajSyntaxError, ZeroImageDimension
from tracekit.models.schemas import BIN_COUNT, QuantizedTrace, TimedTrace

Pair = Tuple[int, int]


# ── Quantization ──────────────────────────────────────────────


def _check_dims(width: float, height: float):
    if not (width > 0 and height > 0):
        raise ZeroImageDimension(f"image size {width}x{height} must be positive")


def quantize_values(values: np.ndarray, extent: float) -> np.ndarray:
    """floor(v / extent * 1000) clamped to [0, 999]."""
    bins = np.floor(np.asarray(values, dtype=np.float64) / extent * BIN_COUNT)
    return np.clip(bins, 0, BIN_COUNT - 1).astype(np.int64)


def quantize(trace: TimedTrace) -> QuantizedTrace:
    _check_dims(trace.image_width, trace.image_height)
    bx = quantize_values([p.x for p in trace.points], trace.image_width)
    by = quantize_values([p.y for p in trace.points], trace.image_height)
    return QuantizedTrace(coords=list(zip(bx.tolist(), by.tolist())))


def dequantize(qt: QuantizedTrace, width: float, height: float) -> List[Tuple[float, float]]:
    """Bin centres in pixels: x = (bx + 0.5) / 1000 * width."""
    _check_dims(width, height)
    return [
        ((bx + 0.5) / BIN_COUNT * width, (by + 0.5) / BIN_COUNT * height)
        for bx, by in qt.coords
    ]


def unit_coords(qt: QuantizedTrace) -> np.ndarray:
    """(n, 2) bin centres in [0, 1]."""
    arr = np.asarray(qt.coords, dtype=np.float64).reshape(-1, 2)
    return (arr + 0.5) / BIN_COUNT


# ── Serialization ─────────────────────────────────────────────


def serialize(qt: QuantizedTrace) -> str:
    if not qt.coords:
        raise EmptyTrace("cannot serialize an empty trace")
    body = ",".join(f"({bx},{by})" for bx, by in qt.coords)
    return f"<traj>{body}</traj>"


def format_prompt_trajectory(points: Sequence[Tuple[float, float]]) -> str:
    """Pixel coordinates in the baseline-prompt input form."""
    body = ", ".join(f"({int(round(x))},{int(round(y))})" for x, y in points)
    return f"<Trajectory>{body} </Trajectory>"


# ── Parsing ───────────────────────────────────────────────────


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def offset(self, pos: int = None) -> int:
        pos = self.pos if pos is None else pos
        return len(self.text[:pos].encode("utf-8"))

    def fail(self, message: str, pos: int = None):
        raise TrajSyntaxError(self.offset(pos), message)

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self, token: str) -> bool:
        return self.text.startswith(token, self.pos)

    def expect(self, token: str):
        if not self.peek(token):
            found = self.text[self.pos:self.pos + len(token)] or "end of input"
            self.fail(f"expected {token!r}, found {found!r}")
        self.pos += len(token)

    def optional_space(self):
        if self.peek(" "):
            self.pos += 1

    def skip_whitespace(self):
        while not self.at_end() and self.text[self.pos].isspace():
            self.pos += 1

    def integer(self) -> int:
        start = self.pos
        if self.peek("-"):
            self.pos += 1
        digits_start = self.pos
        while not self.at_end() and self.text[self.pos] in "0123456789":
            self.pos += 1
        if self.pos == digits_start:
            self.fail("expected an integer", start)
        value = int(self.text[start:self.pos])
        if not 0 <= value < BIN_COUNT:
            raise OutOfRange(self.offset(start), value)
        return value

    def pair(self, open_: str, close: str) -> Pair:
        self.expect(open_)
        bx = self.integer()
        self.expect(",")
        self.optional_space()
        by = self.integer()
        self.expect(close)
        return (bx, by)


def _parse_grouped(sc: _Scanner, open_tag: str, close_tag: str, space_before_close: bool) -> List[Pair]:
    sc.expect(open_tag)
    if sc.peek(close_tag) or (space_before_close and sc.peek(" " + close_tag)):
        raise EmptyBody(f"{open_tag}{close_tag} holds no points")
    coords = [sc.pair("(", ")")]
    while sc.peek(","):
        sc.pos += 1
        sc.optional_space()
        coords.append(sc.pair("(", ")"))
    if space_before_close:
        sc.optional_space()
    sc.expect(close_tag)
    return coords


def _parse_per_point(sc: _Scanner) -> List[Pair]:
    coords = []
    while True:
        sc.expect("<Traj>")
        if sc.peek("</Traj>"):
            raise EmptyBody("<Traj></Traj> holds no point")
        coords.append(sc.pair("[", "]"))
        sc.expect("</Traj>")
        sc.skip_whitespace()
        if sc.at_end():
            return coords


def parse(text: str) -> QuantizedTrace:
    """Parse any accepted trajectory form into bins."""
    sc = _Scanner(text)
    sc.skip_whitespace()
    if sc.at_end():
        raise EmptyBody("no trajectory in input")

    if sc.peek("<traj>"):
        coords = _parse_grouped(sc, "<traj>", "</traj>", space_before_close=False)
    elif sc.peek("<Trajectory>"):
        coords = _parse_grouped(sc, "<Trajectory>", "</Trajectory>", space_before_close=True)
    elif sc.peek("<Traj>"):
        coords = _parse_per_point(sc)
    else:
        sc.fail("expected '<traj>', '<Traj>' or '<Trajectory>'")

    sc.skip_whitespace()
    if not sc.at_end():
        sc.fail("unexpected trailing characters")
    return QuantizedTrace(coords=coords)


def is_token_string(line: str) -> bool:
    return line.lstrip().startswith("<")


def quantization_error_bound(extent: float) -> float:
    """Worst-case |x - dequantize(quantize(x))| for one axis."""
    return extent / (2 * BIN_COUNT)
