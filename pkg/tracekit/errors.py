"""Exception hierarchy shared by every tracekit module."""

from __future__ import annotations

from typing import Optional


class TraceKitError(Exception):
    """Base class for all errors raised by tracekit."""


# ── Traces & records ──────────────────────────────────────────


class EmptyTrace(TraceKitError, ValueError):
    pass


class NonMonotoneTime(TraceKitError, ValueError):
    pass


class NonFiniteValue(TraceKitError, ValueError):
    pass


class MalformedRecord(TraceKitError, ValueError):
    pass


class SpanCoverageError(TraceKitError, ValueError):
    pass


# ── Scoring ───────────────────────────────────────────────────


class ScoreOutOfRange(TraceKitError, ValueError):
    pass


class ScorerTimeout(TraceKitError):
    pass


class ScorerTransportError(TraceKitError):
    def __init__(self, status_code: Optional[int], detail: str = ""):
        if status_code is None:
            super().__init__(f"scorer request failed: {detail}")
        else:
            super().__init__(f"scorer returned HTTP {status_code}: {detail}")
        self.status_code = status_code


class MalformedResponse(TraceKitError, ValueError):
    pass


# ── Simplification & tokens ───────────────────────────────────


class TargetTooSmall(TraceKitError, ValueError):
    pass


class TargetTooLarge(TraceKitError, ValueError):
    pass


class ZeroImageDimension(TraceKitError, ValueError):
    pass


class TrajSyntaxError(TraceKitError, ValueError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


class OutOfRange(TraceKitError, ValueError):
    def __init__(self, offset: int, value: int):
        super().__init__(f"bin value {value} outside [0, 999] at byte {offset}")
        self.offset = offset
        self.value = value


class EmptyBody(TraceKitError, ValueError):
    pass


# ── Metrics ───────────────────────────────────────────────────


class DimensionMismatch(TraceKitError, ValueError):
    pass


# ── Numerical kernels ─────────────────────────────────────────


class ShapeMismatch(TraceKitError, ValueError):
    pass


class NonFiniteInput(TraceKitError, ValueError):
    pass


class MissingActivations(TraceKitError):
    pass


class TargetOutOfRange(TraceKitError, ValueError):
    pass


class NonFiniteComponent(TraceKitError, ValueError):
    pass


class SnapshotFormatError(TraceKitError, ValueError):
    pass
