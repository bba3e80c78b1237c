from __future__ import annotations

import logging
import math
from typing import Tuple

from tracekit.errors import EmptyTrace, NonFiniteValue, NonMonotoneTime
from tracekit.models.schemas import TimedTrace, TracePoint

logger = logging.getLogger(__name__)


def _clamp(value: float, upper: float) -> float:
    return min(max(value, 0.0), upper)


def validate_trace(trace: TimedTrace) -> Tuple[TimedTrace, int]:
    """Check trace invariants and clamp coordinates to the image.

    Returns the (possibly clamped) trace and the number of points that had
    to be clamped. Running it on its own output is a no-op.
    """
    if not trace.points:
        raise EmptyTrace("trace has no points")

    width, height = trace.image_width, trace.image_height
    if not (math.isfinite(width) and math.isfinite(height)):
        raise NonFiniteValue(f"image size {width}x{height} is not finite")

    clamped = 0
    points = []
    prev_t = -math.inf
    for j, p in enumerate(trace.points):
        if not (math.isfinite(p.x) and math.isfinite(p.y) and math.isfinite(p.t)):
            raise NonFiniteValue(f"point {j} has a non-finite value: {p}")
        if p.t < 0:
            raise NonFiniteValue(f"point {j} has negative timestamp {p.t}")
        if p.t < prev_t:
            raise NonMonotoneTime(f"timestamp decreases at point {j}: {prev_t} -> {p.t}")
        prev_t = p.t

        x, y = _clamp(p.x, width), _clamp(p.y, height)
        if x != p.x or y != p.y:
            clamped += 1
            points.append(TracePoint(x=x, y=y, t=p.t))
        else:
            points.append(p)

    if clamped:
        logger.warning(f"Clamped {clamped} of {len(points)} points to {width}x{height}")
        trace = TimedTrace(points=points, image_width=width, image_height=height)

    return trace, clamped
