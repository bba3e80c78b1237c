from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

BIN_COUNT = 1000
DEFAULT_EPS_BASE = 5.0


# ── Traces ────────────────────────────────────────────────────


class TracePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    t: float

    @property
    def xy(self) -> Tuple[float, float]:
        return (self.x, self.y)


class TimedTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    points: List[TracePoint] = Field(default_factory=list)
    image_width: float
    image_height: float

    def __len__(self) -> int:
        return len(self.points)


class TimedWord(BaseModel):
    model_config = ConfigDict(frozen=True)

    text: str
    t_start: float
    t_end: float

    @model_validator(mode="after")
    def _ordered(self):
        if self.t_start > self.t_end:
            raise ValueError(f"word {self.text!r} ends before it starts")
        return self


class PhraseSpan(BaseModel):
    """Contiguous word range [start, stop) with a 1-5 importance score."""

    model_config = ConfigDict(frozen=True)

    start: int = Field(ge=0)
    stop: int
    importance: int = Field(ge=1, le=5)

    @model_validator(mode="after")
    def _non_empty(self):
        if self.stop <= self.start:
            raise ValueError(f"span [{self.start}, {self.stop}) is empty")
        return self

    @property
    def word_indices(self) -> range:
        return range(self.start, self.stop)


class AlignedSegment(BaseModel):
    """A slice of a trace bound to one word or phrase.

    Word-level segments leave weight and tolerance unset; phrase-level
    segments carry both, with tolerance = eps_base / weight.
    """

    model_config = ConfigDict(frozen=True)

    points: List[TracePoint] = Field(default_factory=list)
    t_start: float
    t_end: float
    text: str = ""
    importance: Optional[int] = Field(default=None, ge=1, le=5)
    weight: Optional[float] = None
    tolerance: Optional[float] = None

    @model_validator(mode="after")
    def _check(self):
        if self.t_start > self.t_end:
            raise ValueError("segment ends before it starts")
        for p in self.points:
            if not self.t_start <= p.t <= self.t_end:
                raise ValueError(
                    f"point t={p.t} outside segment [{self.t_start}, {self.t_end}]"
                )
        if (self.weight is None) != (self.tolerance is None):
            raise ValueError("weight and tolerance must be set together")
        if self.weight is not None and not 0.2 <= self.weight <= 1.0:
            raise ValueError(f"weight {self.weight} outside [0.2, 1.0]")
        return self


# ── Records ───────────────────────────────────────────────────


class NarrativeRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    image_id: str
    image_width: float
    image_height: float
    caption: str = ""
    timed_words: List[TimedWord] = Field(default_factory=list)
    trace: TimedTrace


# ── Scoring ───────────────────────────────────────────────────


class ScorerMode(str, Enum):
    HEURISTIC = "heuristic"
    EXTERNAL = "external"


class ScorerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    mode: ScorerMode = ScorerMode.HEURISTIC
    endpoint_url: str = ""
    token: str = ""
    timeout: float = Field(default=30.0, gt=0)
    eps_base: float = Field(default=DEFAULT_EPS_BASE, gt=0)
    max_in_flight: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def _endpoint_for_external(self):
        if self.mode == ScorerMode.EXTERNAL and not self.endpoint_url:
            raise ValueError("external scorer mode needs an endpoint_url")
        return self


# ── Simplification ────────────────────────────────────────────


class SegmentReport(BaseModel):
    tolerance: float
    in_count: int
    out_count: int


class SimplifyReport(BaseModel):
    input_points: int = 0
    output_points: int = 0
    compression: float = 0.0
    per_segment: List[SegmentReport] = Field(default_factory=list)


class MethodResult(BaseModel):
    method: str
    tolerance: Optional[float] = None
    keypoints: int
    compression: float
    lbm_k0: float


class SweepPoint(BaseModel):
    eps_base: float
    keypoints: int
    compression: float


# ── Tokens ────────────────────────────────────────────────────


class QuantizedTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    coords: List[Tuple[int, int]] = Field(default_factory=list)

    @field_validator("coords")
    @classmethod
    def _in_range(cls, coords):
        for bx, by in coords:
            if not (0 <= bx < BIN_COUNT and 0 <= by < BIN_COUNT):
                raise ValueError(f"bin ({bx}, {by}) outside [0, {BIN_COUNT - 1}]")
        return coords

    def __len__(self) -> int:
        return len(self.coords)


# ── Metrics ───────────────────────────────────────────────────


class WindowMode(str, Enum):
    BY_WORD = "by_word"
    FIXED = "fixed"


class LbmConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(default=0, ge=0)
    window_mode: WindowMode = WindowMode.FIXED
    fixed_L: int = Field(default=5, ge=1)
    normalization: str = "diagonal"


class LbmReport(BaseModel):
    scores: Dict[str, float] = Field(default_factory=dict)
    n_pairs: int = 0
    n_penalized: int = 0
    config_fingerprint: str = ""
    definition: str = ""


# ── TVP / segmentation ────────────────────────────────────────


class TvpConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    d_model: int = Field(default=64, gt=0)
    n_heads: int = Field(default=4, gt=0)
    n_blocks: int = Field(default=2, gt=0)
    ffn_hidden: Optional[int] = Field(default=None, gt=0)
    activation: str = "gelu"
    seed: int = 0

    @model_validator(mode="after")
    def _heads_divide(self):
        if self.d_model % self.n_heads:
            raise ValueError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if self.activation not in ("gelu", "relu"):
            raise ValueError(f"unsupported activation {self.activation!r}")
        return self

    @property
    def hidden(self) -> int:
        return self.ffn_hidden or 4 * self.d_model


class ParamCheck(BaseModel):
    name: str
    shape: List[int]
    checked: int
    max_rel_err: float


class GradCheckReport(BaseModel):
    max_rel_err: float
    passed: bool
    tolerance: float
    per_param: List[ParamCheck] = Field(default_factory=list)


# ── Runs ──────────────────────────────────────────────────────


class Command(str, Enum):
    SIMPLIFY = "simplify"
    TOKENIZE = "tokenize"
    EVAL_LBM = "eval-lbm"
    CHECK_TVP = "check-tvp"
    LOSS = "loss"
    STATS = "stats"


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: Command
    inputs: List[str] = Field(default_factory=list)
    output: Optional[str] = None
    eps_base: float = Field(default=DEFAULT_EPS_BASE, gt=0)
    scorer: ScorerConfig = Field(default_factory=ScorerConfig)
    seed: int = 0
    jobs: int = Field(default=1, ge=1)
    strict: bool = False
    ks: List[int] = Field(default_factory=lambda: [0, 1])
    window: WindowMode = WindowMode.FIXED
    window_length: int = Field(default=5, ge=1)
    image_width: float = Field(default=1000.0, gt=0)
    image_height: float = Field(default=1000.0, gt=0)
    d_model: int = 64
    n_heads: int = 4
    n_blocks: int = 2
    text_loss: float = Field(default=0.0, ge=0)
    alpha: float = Field(default=2.0, ge=1)


# ── HTTP ──────────────────────────────────────────────────────


class TokenizeRequest(BaseModel):
    points: List[Tuple[float, float]]
    image_width: float = Field(gt=0)
    image_height: float = Field(gt=0)


class ParseRequest(BaseModel):
    text: str


class LbmRequest(BaseModel):
    pred: List[Tuple[float, float]]
    gt: List[Tuple[float, float]]
    image_width: float = Field(gt=0)
    image_height: float = Field(gt=0)
    ks: List[int] = Field(default_factory=lambda: [0, 1])
    window_length: int = Field(default=5, ge=1)
