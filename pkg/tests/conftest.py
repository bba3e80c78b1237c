import json
import math
from typing import List, Sequence

import numpy as np
import pytest

from tracekit.models.schemas import TimedTrace, TimedWord, TracePoint


def make_trace(xy: Sequence, width: float = 1000.0, height: float = 1000.0, dt: float = 1 / 60) -> TimedTrace:
    return TimedTrace(
        points=[TracePoint(x=float(x), y=float(y), t=i * dt) for i, (x, y) in enumerate(xy)],
        image_width=width,
        image_height=height,
    )


def random_polyline(rng: np.random.Generator, n: int, extent: float = 500.0) -> np.ndarray:
    """Random walk polyline, (n, 2)."""
    steps = rng.normal(0.0, extent / 20, (n, 2))
    return np.cumsum(steps, axis=0) + extent / 2


def jittered_path(rng: np.random.Generator, n: int = 300, sigma: float = 2.0) -> np.ndarray:
    """60 Hz samples along a piecewise-linear path with Gaussian jitter."""
    corners = np.array([[100, 100], [600, 150], [650, 600], [200, 700], [150, 300]], dtype=float)
    seg_len = np.hypot(*np.diff(corners, axis=0).T)
    s = np.linspace(0.0, seg_len.sum(), n)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    idx = np.minimum(np.searchsorted(cum, s, side="right") - 1, len(seg_len) - 1)
    frac = (s - cum[idx]) / seg_len[idx]
    base = corners[idx] + (corners[idx + 1] - corners[idx]) * frac[:, None]
    return base + rng.normal(0.0, sigma, base.shape)


def even_words(texts: List[str], t_end: float) -> List[TimedWord]:
    step = t_end / len(texts)
    return [TimedWord(text=w, t_start=i * step, t_end=(i + 1) * step) for i, w in enumerate(texts)]


def narrative_line(
    image_id: str = "img-0",
    words: Sequence[str] = ("a", "red", "car"),
    n_points: int = 12,
    width: float = 640.0,
    height: float = 480.0,
    strokes: int = 1,
    normalized: bool = False,
    seed: int = 0,
) -> str:
    """One Localized-Narratives style JSON line."""
    rng = np.random.default_rng(seed)
    duration = 0.1 * n_points
    points = []
    for j in range(n_points):
        x = float(rng.uniform(0, width))
        y = float(rng.uniform(0, height))
        if normalized:
            x, y = x / width, y / height
        points.append({"x": x, "y": y, "t": round(0.1 * j + 0.05, 6)})
    per = math.ceil(n_points / strokes)
    step = duration / len(words)
    return json.dumps(
        {
            "image_id": image_id,
            "image_width": width,
            "image_height": height,
            "caption": " ".join(words),
            "timed_caption": [
                {"utterance": w, "start_time": round(i * step, 6), "end_time": round((i + 1) * step, 6)}
                for i, w in enumerate(words)
            ],
            "traces": [points[i:i + per] for i in range(0, n_points, per)],
        }
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def square_trace():
    return make_trace([(10, 10), (20, 10), (20, 20), (10, 20)], width=100, height=100)


@pytest.fixture
def records_file(tmp_path):
    path = tmp_path / "records.jsonl"
    lines = [
        narrative_line(f"img-{i}", words=("the", "red", "car", "on", "the", "left"), n_points=40, seed=i)
        for i in range(10)
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
