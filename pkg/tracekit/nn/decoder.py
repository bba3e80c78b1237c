"""Codebook and the toy two-layer mask decoder.

The codebook holds 6 learned tokens laid out as 2 scales x 3 tokens. Scale 1
feeds decoder layer 1 and scale 2 feeds layer 2. Each layer modulates its
tokens by cross-attention to the visual tokens::

    z1 = s1 * (1 + CA1(Q=s1, KV=f_v))
    u2 = s2 + mean(z1)
    z2 = u2 * (1 + CA2(Q=u2, KV=f_v))
    e  = mean of the 6 rows of [z1; z2]

and the mask is sigmoid((f_v W_pix + b_pix) . e / sqrt(d)) per pixel.
All-zero seg tokens give e = 0 and therefore probability 0.5 everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit

from tracekit.errors import ShapeMismatch
from tracekit.models.schemas import GradCheckReport
from tracekit.nn.attention import (
    AttentionParams,
    cross_attention_backward,
    cross_attention_forward,
)
from tracekit.nn.gradcheck import MAX_ENTRIES, finite_difference_check

N_SCALES = 2
TOKENS_PER_SCALE = 3
N_TOKENS = N_SCALES * TOKENS_PER_SCALE


@dataclass
class Codebook:
    tokens: np.ndarray  # (6, d)

    def __post_init__(self):
        if self.tokens.ndim != 2 or self.tokens.shape[0] != N_TOKENS:
            raise ShapeMismatch(f"codebook must hold {N_TOKENS} tokens, got shape {self.tokens.shape}")

    @classmethod
    def random(cls, d_model: int, rng: np.random.Generator) -> "Codebook":
        return cls(rng.normal(0.0, 1.0, (N_TOKENS, d_model)))

    @property
    def d_model(self) -> int:
        return self.tokens.shape[1]

    def scale(self, i: int) -> np.ndarray:
        return self.tokens[i * TOKENS_PER_SCALE:(i + 1) * TOKENS_PER_SCALE]

    def expand(self, k: int) -> np.ndarray:
        """(k, 6, d): one copy of the codebook per target."""
        return np.repeat(self.tokens[None], k, axis=0)


@dataclass
class DecoderParams:
    layer1: AttentionParams
    layer2: AttentionParams
    w_pix: np.ndarray
    b_pix: np.ndarray
    n_heads: int = 1

    @classmethod
    def random(cls, d: int, rng: np.random.Generator, n_heads: int = 1, bias_scale: float = 0.0) -> "DecoderParams":
        return cls(
            layer1=AttentionParams.random(d, rng, bias_scale),
            layer2=AttentionParams.random(d, rng, bias_scale),
            w_pix=rng.normal(0.0, 1.0 / np.sqrt(d), (d, d)),
            b_pix=rng.normal(0.0, bias_scale, d) if bias_scale else np.zeros(d),
            n_heads=n_heads,
        )

    def named_arrays(self) -> List[Tuple[str, np.ndarray]]:
        arrays = list(self.layer1.named_arrays("layer1.")) + list(self.layer2.named_arrays("layer2."))
        arrays += [("w_pix", self.w_pix), ("b_pix", self.b_pix)]
        return arrays


def _grid(n_visual: int, grid: Optional[Tuple[int, int]]) -> Tuple[int, int]:
    if grid is None:
        side = math.isqrt(n_visual)
        if side * side != n_visual:
            raise ShapeMismatch(f"{n_visual} visual tokens do not form a square grid; pass grid=")
        return side, side
    if grid[0] * grid[1] != n_visual:
        raise ShapeMismatch(f"grid {grid} does not hold {n_visual} visual tokens")
    return grid


def _targets(e_seg: np.ndarray, d: int) -> np.ndarray:
    e_seg = np.asarray(e_seg, dtype=np.float64)
    if e_seg.ndim == 2:
        e_seg = e_seg[None]
    if e_seg.ndim != 3 or e_seg.shape[1:] != (N_TOKENS, d):
        raise ShapeMismatch(f"seg embeddings must be (K, {N_TOKENS}, {d}), got {e_seg.shape}")
    return e_seg


def _forward_one(f_v: np.ndarray, e: np.ndarray, pixels: np.ndarray, params: DecoderParams):
    d = f_v.shape[1]
    s1, s2 = e[:TOKENS_PER_SCALE], e[TOKENS_PER_SCALE:]
    a1, c1 = cross_attention_forward(s1, f_v, params.layer1, params.n_heads)
    z1 = s1 * (1.0 + a1)
    u2 = s2 + z1.mean(axis=0)
    a2, c2 = cross_attention_forward(u2, f_v, params.layer2, params.n_heads)
    z2 = u2 * (1.0 + a2)
    pooled = np.concatenate([z1, z2]).mean(axis=0)
    prob = expit(pixels @ pooled / np.sqrt(d))
    return prob, (s1, a1, c1, u2, a2, c2, z1, z2, pooled)


def toy_mask_decoder(
    f_visual: np.ndarray,
    e_seg: np.ndarray,
    params: DecoderParams,
    grid: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """(K, H', W') mask probabilities in (0, 1)."""
    f_v = np.asarray(f_visual, dtype=np.float64)
    d = params.w_pix.shape[0]
    if f_v.ndim != 2 or f_v.shape[1] != d:
        raise ShapeMismatch(f"visual tokens must be (N_v, {d}), got {f_v.shape}")
    h, w = _grid(f_v.shape[0], grid)
    pixels = f_v @ params.w_pix + params.b_pix
    probs = [_forward_one(f_v, e, pixels, params)[0] for e in _targets(e_seg, d)]
    return np.stack(probs).reshape(-1, h, w)


def decoder_backward(
    f_visual: np.ndarray,
    e_seg: np.ndarray,
    params: DecoderParams,
    d_probs: np.ndarray,
) -> Tuple[Dict[str, np.ndarray], np.ndarray, np.ndarray]:
    """Gradients of sum(d_probs * toy_mask_decoder(...)).

    Returns (param grads by name, d f_visual, d e_seg).
    """
    f_v = np.asarray(f_visual, dtype=np.float64)
    d = params.w_pix.shape[0]
    targets = _targets(e_seg, d)
    d_probs = np.asarray(d_probs, dtype=np.float64).reshape(len(targets), -1)
    pixels = f_v @ params.w_pix + params.b_pix
    scale = 1.0 / np.sqrt(d)

    g1 = AttentionParams.zeros(d)
    g2 = AttentionParams.zeros(d)
    d_pixels = np.zeros_like(pixels)
    d_fv = np.zeros_like(f_v)
    d_e = np.zeros_like(targets)

    for k, e in enumerate(targets):
        prob, (s1, a1, c1, u2, a2, c2, z1, z2, pooled) = _forward_one(f_v, e, pixels, params)
        d_logit = d_probs[k] * prob * (1.0 - prob) * scale
        d_pooled = pixels.T @ d_logit
        d_pixels += np.outer(d_logit, pooled)

        d_row = d_pooled / N_TOKENS
        d_z1 = np.tile(d_row, (TOKENS_PER_SCALE, 1))
        d_z2 = np.tile(d_row, (TOKENS_PER_SCALE, 1))

        d_u2 = d_z2 * (1.0 + a2)
        grads, d_q, d_kv = cross_attention_backward(d_z2 * u2, c2, params.layer2)
        _accumulate(g2, grads)
        d_u2 += d_q
        d_fv += d_kv
        d_e[k, TOKENS_PER_SCALE:] = d_u2
        d_z1 += d_u2.sum(axis=0) / TOKENS_PER_SCALE

        d_s1 = d_z1 * (1.0 + a1)
        grads, d_q, d_kv = cross_attention_backward(d_z1 * s1, c1, params.layer1)
        _accumulate(g1, grads)
        d_e[k, :TOKENS_PER_SCALE] = d_s1 + d_q
        d_fv += d_kv

    d_fv += d_pixels @ params.w_pix.T
    named = dict(g1.named_arrays("layer1.")) | dict(g2.named_arrays("layer2."))
    named["w_pix"] = f_v.T @ d_pixels
    named["b_pix"] = d_pixels.sum(axis=0)
    return named, d_fv, d_e


def _accumulate(total: AttentionParams, part: AttentionParams):
    for f in fields(total):
        getattr(total, f.name)[...] += getattr(part, f.name)


def decoder_grad_check(
    seed: int = 0,
    d_model: int = 8,
    n_heads: int = 2,
    grid: Tuple[int, int] = (4, 4),
    k: int = 2,
    max_entries: int = MAX_ENTRIES,
) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    params = DecoderParams.random(d_model, rng, n_heads=n_heads, bias_scale=0.1)
    f_v = rng.normal(0.0, 1.0, (grid[0] * grid[1], d_model))
    e_seg = Codebook.random(d_model, rng).expand(k) + rng.normal(0.0, 0.1, (k, N_TOKENS, d_model))
    upstream = rng.normal(0.0, 1.0, (k, *grid))

    def loss() -> float:
        return float(np.sum(toy_mask_decoder(f_v, e_seg, params, grid) * upstream))

    named, d_fv, d_e = decoder_backward(f_v, e_seg, params, upstream)
    arrays = params.named_arrays() + [("input.f_visual", f_v), ("input.e_seg", e_seg)]
    named["input.f_visual"] = d_fv
    named["input.e_seg"] = d_e
    return finite_difference_check(loss, arrays, named, rng, max_entries=max_entries)
