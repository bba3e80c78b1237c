"""Douglas-Peucker simplification and its semantic-guided per-segment variant."""

from __future__ import annotations

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from tracekit.models.schemas import (
    AlignedSegment,
    SegmentReport,
    SimplifyReport,
    TimedTrace,
    TracePoint,
)

logger = logging.getLogger(__name__)


def coords(points: Sequence) -> np.ndarray:
    """(n, 2) float64 array from TracePoints or (x, y[, ...]) tuples."""
    if not len(points):
        return np.empty((0, 2))
    if isinstance(points[0], TracePoint):
        return np.array([(p.x, p.y) for p in points], dtype=np.float64)
    return np.asarray([(p[0], p[1]) for p in points], dtype=np.float64)


def perpendicular_distance(p, a, b) -> float:
    """Distance from p to the line through a and b (to a itself when a == b)."""
    xp, yp = float(p[0]), float(p[1])
    xa, ya = float(a[0]), float(a[1])
    xb, yb = float(b[0]), float(b[1])
    dx, dy = xb - xa, yb - ya
    den = math.sqrt(dy * dy + dx * dx)
    if den == 0.0:
        return math.hypot(xp - xa, yp - ya)
    return abs(dy * xp - dx * yp + xb * ya - yb * xa) / den


def _chord_distances(xy: np.ndarray, s: int, e: int) -> np.ndarray:
    """Distances of xy[s+1:e] to the chord xy[s]-xy[e]."""
    xa, ya = xy[s]
    xb, yb = xy[e]
    inner = xy[s + 1:e]
    dx, dy = xb - xa, yb - ya
    den = math.sqrt(dy * dy + dx * dx)
    if den == 0.0:
        return np.hypot(inner[:, 0] - xa, inner[:, 1] - ya)
    return np.abs(dy * inner[:, 0] - dx * inner[:, 1] + xb * ya - yb * xa) / den


def dp_indices(xy: np.ndarray, eps: float) -> List[int]:
    """Indices retained by Douglas-Peucker at tolerance eps.

    Splits at the first (lowest-index) point of maximum distance whenever
    that distance exceeds eps. Iterative, so long traces do not recurse.
    """
    if eps <= 0:
        raise ValueError(f"tolerance must be positive, got {eps}")
    n = len(xy)
    if n <= 2:
        return list(range(n))

    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[n - 1] = True
    stack = [(0, n - 1)]
    while stack:
        s, e = stack.pop()
        if e - s < 2:
            continue
        d = _chord_distances(xy, s, e)
        i = int(np.argmax(d))
        if d[i] > eps:
            m = s + 1 + i
            keep[m] = True
            stack.append((m, e))
            stack.append((s, m))
    return np.flatnonzero(keep).tolist()


def douglas_peucker(points: Sequence, eps: float) -> list:
    """Order-preserving subsequence of points kept by Douglas-Peucker."""
    if len(points) <= 2:
        if eps <= 0:
            raise ValueError(f"tolerance must be positive, got {eps}")
        return list(points)
    return [points[i] for i in dp_indices(coords(points), eps)]


def compression_of(input_points: int, output_points: int) -> float:
    return 1.0 - output_points / input_points if input_points else 0.0


def simplify_semantic(
    segments: Sequence[AlignedSegment],
    image_width: Optional[float] = None,
    image_height: Optional[float] = None,
) -> Tuple[TimedTrace, SimplifyReport]:
    """Union of per-segment DP runs, each at its segment's own tolerance.

    A retained point that repeats the previous segment's last retained
    coordinates exactly is dropped at the junction. Timestamps ride along.
    Without explicit image size the bounding extent of the points is used.
    """
    out: List[TracePoint] = []
    per_segment: List[SegmentReport] = []
    total_in = 0

    for seg in segments:
        if seg.tolerance is None:
            raise ValueError(f"segment {seg.text!r} has no tolerance; merge it into phrases first")
        total_in += len(seg.points)
        if not seg.points:
            continue
        kept = douglas_peucker(seg.points, seg.tolerance)
        per_segment.append(
            SegmentReport(tolerance=seg.tolerance, in_count=len(seg.points), out_count=len(kept))
        )
        if out and out[-1].xy == kept[0].xy:
            kept = kept[1:]
        out.extend(kept)

    if image_width is None or image_height is None:
        image_width = max((p.x for p in out), default=0.0)
        image_height = max((p.y for p in out), default=0.0)

    report = SimplifyReport(
        input_points=total_in,
        output_points=len(out),
        compression=compression_of(total_in, len(out)),
        per_segment=per_segment,
    )
    logger.debug(f"Semantic DP kept {len(out)} of {total_in} points")
    return TimedTrace(points=out, image_width=image_width, image_height=image_height), report
