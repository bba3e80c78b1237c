"""Multi-head cross-attention with an explicit backward pass (float64 numpy)."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Iterator, Tuple

import numpy as np

from tracekit.errors import NonFiniteInput, ShapeMismatch


@dataclass
class AttentionParams:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray
    b_q: np.ndarray
    b_k: np.ndarray
    b_v: np.ndarray
    b_o: np.ndarray

    @classmethod
    def zeros(cls, d: int) -> "AttentionParams":
        return cls(
            *(np.zeros((d, d)) for _ in range(4)),
            *(np.zeros(d) for _ in range(4)),
        )

    @classmethod
    def random(cls, d: int, rng: np.random.Generator, bias_scale: float = 0.0) -> "AttentionParams":
        scale = 1.0 / np.sqrt(d)
        return cls(
            *(rng.normal(0.0, scale, (d, d)) for _ in range(4)),
            *(rng.normal(0.0, bias_scale, d) if bias_scale else np.zeros(d) for _ in range(4)),
        )

    @property
    def d_model(self) -> int:
        return self.w_q.shape[0]

    def named_arrays(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for f in fields(self):
            yield f"{prefix}{f.name}", getattr(self, f.name)


@dataclass
class AttentionCache:
    x_q: np.ndarray
    x_kv: np.ndarray
    q: np.ndarray  # (H, M, dh)
    k: np.ndarray  # (H, N, dh)
    v: np.ndarray  # (H, N, dh)
    probs: np.ndarray  # (H, M, N)
    context: np.ndarray  # (M, d), heads concatenated
    n_heads: int


def _check(name: str, x: np.ndarray, d: int):
    if x.ndim != 2 or x.shape[1] != d or x.shape[0] == 0:
        raise ShapeMismatch(f"{name} has shape {x.shape}, expected (n, {d}) with n > 0")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput(f"{name} contains non-finite values")


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, n_heads, d // n_heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_attention_forward(
    x_q: np.ndarray,
    x_kv: np.ndarray,
    params: AttentionParams,
    n_heads: int,
) -> Tuple[np.ndarray, AttentionCache]:
    """softmax(Q K^T / sqrt(d_head)) V per head, heads concatenated, then W_o."""
    d = params.d_model
    if d % n_heads:
        raise ShapeMismatch(f"d_model {d} not divisible by {n_heads} heads")
    _check("query input", x_q, d)
    _check("key/value input", x_kv, d)

    dh = d // n_heads
    q = _split_heads(x_q @ params.w_q + params.b_q, n_heads)
    k = _split_heads(x_kv @ params.w_k + params.b_k, n_heads)
    v = _split_heads(x_kv @ params.w_v + params.b_v, n_heads)

    probs = softmax(np.einsum("hmd,hnd->hmn", q, k) / np.sqrt(dh))
    context = _merge_heads(np.einsum("hmn,hnd->hmd", probs, v))
    out = context @ params.w_o + params.b_o
    return out, AttentionCache(x_q, x_kv, q, k, v, probs, context, n_heads)


def cross_attention(x_q: np.ndarray, x_kv: np.ndarray, params: AttentionParams, n_heads: int) -> np.ndarray:
    return cross_attention_forward(x_q, x_kv, params, n_heads)[0]


def cross_attention_backward(
    d_out: np.ndarray,
    cache: AttentionCache,
    params: AttentionParams,
) -> Tuple[AttentionParams, np.ndarray, np.ndarray]:
    """Gradients (params, d x_q, d x_kv) for an upstream gradient d_out."""
    dh = params.d_model // cache.n_heads

    grads = AttentionParams.zeros(params.d_model)
    grads.w_o = cache.context.T @ d_out
    grads.b_o = d_out.sum(axis=0)
    d_ctx = _split_heads(d_out @ params.w_o.T, cache.n_heads)

    d_probs = np.einsum("hmd,hnd->hmn", d_ctx, cache.v)
    d_v = np.einsum("hmn,hmd->hnd", cache.probs, d_ctx)
    d_scores = cache.probs * (d_probs - (d_probs * cache.probs).sum(axis=-1, keepdims=True))
    d_scores /= np.sqrt(dh)
    d_q = _merge_heads(np.einsum("hmn,hnd->hmd", d_scores, cache.k))
    d_k = _merge_heads(np.einsum("hmn,hmd->hnd", d_scores, cache.q))
    d_v = _merge_heads(d_v)

    grads.w_q = cache.x_q.T @ d_q
    grads.b_q = d_q.sum(axis=0)
    grads.w_k = cache.x_kv.T @ d_k
    grads.b_k = d_k.sum(axis=0)
    grads.w_v = cache.x_kv.T @ d_v
    grads.b_v = d_v.sum(axis=0)

    d_x_q = d_q @ params.w_q.T
    d_x_kv = d_k @ params.w_k.T + d_v @ params.w_v.T
    return grads, d_x_q, d_x_kv
