"""Trajectory-aware visual perception block, forward and reverse mode.

Per block::

    f_img'  = f_img  + gamma * CA_img(Q=f_img, KV=f_traj)
    f_traj' = f_traj + CA_traj(Q=f_traj, KV=f_img') + FFN(f_traj)

gamma is a per-channel vector initialised to zero, so a fresh block leaves
the visual features untouched. The FFN reads the block's input trajectory
features, not the attention output. There is no normalisation layer.
Trajectory tokens enter through a 2 -> d_model linear lift of bin-centre
unit coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np
from scipy.special import erf

from tracekit.analysis.tokenize import unit_coords
from tracekit.errors import MissingActivations, NonFiniteInput, ShapeMismatch
from tracekit.models.schemas import QuantizedTrace, TvpConfig
from tracekit.nn.attention import (
    AttentionCache,
    AttentionParams,
    cross_attention_backward,
    cross_attention_forward,
)

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


# ── Activations ───────────────────────────────────────────────


def gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / _SQRT_2))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / _SQRT_2)) + x * np.exp(-0.5 * x * x) * _INV_SQRT_2PI


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(x: np.ndarray) -> np.ndarray:
    return (x > 0).astype(np.float64)


ACTIVATIONS = {"gelu": (gelu, gelu_grad), "relu": (relu, relu_grad)}


# ── Parameters ────────────────────────────────────────────────


@dataclass
class BlockParams:
    img_attn: AttentionParams
    traj_attn: AttentionParams
    gamma: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def named_arrays(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        yield from self.img_attn.named_arrays(f"{prefix}img_attn.")
        yield from self.traj_attn.named_arrays(f"{prefix}traj_attn.")
        for name in ("gamma", "w1", "b1", "w2", "b2"):
            yield f"{prefix}{name}", getattr(self, name)


@dataclass
class TvpParams:
    config: TvpConfig
    lift_w: np.ndarray
    lift_b: np.ndarray
    blocks: List[BlockParams] = field(default_factory=list)

    def named_arrays(self) -> List[Tuple[str, np.ndarray]]:
        """Every parameter array in declaration order (the snapshot order)."""
        arrays = [("lift_w", self.lift_w), ("lift_b", self.lift_b)]
        for i, block in enumerate(self.blocks):
            arrays.extend(block.named_arrays(f"blocks.{i}."))
        return arrays


def zero_params(config: TvpConfig) -> TvpParams:
    d, hidden = config.d_model, config.hidden
    return TvpParams(
        config=config,
        lift_w=np.zeros((2, d)),
        lift_b=np.zeros(d),
        blocks=[
            BlockParams(
                img_attn=AttentionParams.zeros(d),
                traj_attn=AttentionParams.zeros(d),
                gamma=np.zeros(d),
                w1=np.zeros((d, hidden)),
                b1=np.zeros(hidden),
                w2=np.zeros((hidden, d)),
                b2=np.zeros(d),
            )
            for _ in range(config.n_blocks)
        ],
    )


def init_params(config: TvpConfig, seed: Optional[int] = None) -> TvpParams:
    """Scaled-normal weights, zero biases, gamma = 0."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    d, hidden = config.d_model, config.hidden
    blocks = []
    for _ in range(config.n_blocks):
        blocks.append(
            BlockParams(
                img_attn=AttentionParams.random(d, rng),
                traj_attn=AttentionParams.random(d, rng),
                gamma=np.zeros(d),
                w1=rng.normal(0.0, 1.0 / np.sqrt(d), (d, hidden)),
                b1=np.zeros(hidden),
                w2=rng.normal(0.0, 1.0 / np.sqrt(hidden), (hidden, d)),
                b2=np.zeros(d),
            )
        )
    return TvpParams(
        config=config,
        lift_w=rng.normal(0.0, 1.0, (2, d)),
        lift_b=np.zeros(d),
        blocks=blocks,
    )


# ── Forward ───────────────────────────────────────────────────


@dataclass
class BlockActivations:
    f_img: np.ndarray
    f_traj: np.ndarray
    img_cache: AttentionCache
    traj_cache: AttentionCache
    enhancement: np.ndarray  # CA_img output, before gamma
    f_img_out: np.ndarray
    ffn_pre: np.ndarray
    ffn_hidden: np.ndarray
    f_traj_out: np.ndarray


@dataclass
class TvpActivations:
    units: np.ndarray
    blocks: List[BlockActivations]


def _require_finite(name: str, x: np.ndarray):
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput(f"{name} contains non-finite values")


def _units(traj: Union[QuantizedTrace, np.ndarray]) -> np.ndarray:
    units = unit_coords(traj) if isinstance(traj, QuantizedTrace) else np.asarray(traj, dtype=np.float64)
    if units.ndim != 2 or units.shape[1] != 2 or not len(units):
        raise ShapeMismatch(f"trajectory units must be (n, 2) with n > 0, got {units.shape}")
    return units


def embed_trajectory(params: TvpParams, traj: Union[QuantizedTrace, np.ndarray]) -> np.ndarray:
    return _units(traj) @ params.lift_w + params.lift_b


def tvp_block_forward(
    f_img: np.ndarray,
    f_traj: np.ndarray,
    block: BlockParams,
    config: TvpConfig,
) -> Tuple[np.ndarray, np.ndarray, BlockActivations]:
    _require_finite("visual features", f_img)
    _require_finite("trajectory features", f_traj)
    act, _ = ACTIVATIONS[config.activation]

    enhancement, img_cache = cross_attention_forward(f_img, f_traj, block.img_attn, config.n_heads)
    f_img_out = f_img + block.gamma * enhancement

    refinement, traj_cache = cross_attention_forward(f_traj, f_img_out, block.traj_attn, config.n_heads)
    ffn_pre = f_traj @ block.w1 + block.b1
    ffn_hidden = act(ffn_pre)
    f_traj_out = f_traj + refinement + (ffn_hidden @ block.w2 + block.b2)

    cache = BlockActivations(
        f_img=f_img,
        f_traj=f_traj,
        img_cache=img_cache,
        traj_cache=traj_cache,
        enhancement=enhancement,
        f_img_out=f_img_out,
        ffn_pre=ffn_pre,
        ffn_hidden=ffn_hidden,
        f_traj_out=f_traj_out,
    )
    return f_img_out, f_traj_out, cache


def tvp_forward(
    params: TvpParams,
    f_img: np.ndarray,
    traj: Union[QuantizedTrace, np.ndarray],
    depth: Optional[int] = None,
) -> Tuple[np.ndarray, np.ndarray, TvpActivations]:
    """Lift the trajectory and run the first ``depth`` blocks (all by default)."""
    depth = len(params.blocks) if depth is None else depth
    if not 0 <= depth <= len(params.blocks):
        raise ShapeMismatch(f"depth {depth} outside 0..{len(params.blocks)}")
    f_img = np.asarray(f_img, dtype=np.float64)
    units = _units(traj)
    f_traj = units @ params.lift_w + params.lift_b

    caches = []
    for block in params.blocks[:depth]:
        f_img, f_traj, cache = tvp_block_forward(f_img, f_traj, block, params.config)
        caches.append(cache)
    return f_img, f_traj, TvpActivations(units=units, blocks=caches)


# ── Backward ──────────────────────────────────────────────────


@dataclass
class TvpGradients:
    params: TvpParams
    f_img: np.ndarray
    units: np.ndarray


def tvp_block_backward(
    d_img_out: np.ndarray,
    d_traj_out: np.ndarray,
    cache: BlockActivations,
    block: BlockParams,
    config: TvpConfig,
) -> Tuple[BlockParams, np.ndarray, np.ndarray]:
    """Returns (block grads, d f_img, d f_traj)."""
    _, act_grad = ACTIVATIONS[config.activation]

    # FFN branch
    d_w2 = cache.ffn_hidden.T @ d_traj_out
    d_b2 = d_traj_out.sum(axis=0)
    d_pre = (d_traj_out @ block.w2.T) * act_grad(cache.ffn_pre)
    d_w1 = cache.f_traj.T @ d_pre
    d_b1 = d_pre.sum(axis=0)
    d_f_traj = d_traj_out + d_pre @ block.w1.T

    traj_grads, d_q, d_kv = cross_attention_backward(d_traj_out, cache.traj_cache, block.traj_attn)
    d_f_traj = d_f_traj + d_q
    d_img_total = d_img_out + d_kv

    d_gamma = (d_img_total * cache.enhancement).sum(axis=0)
    img_grads, d_q, d_kv = cross_attention_backward(
        d_img_total * block.gamma, cache.img_cache, block.img_attn
    )
    d_f_img = d_img_total + d_q
    d_f_traj = d_f_traj + d_kv

    grads = BlockParams(
        img_attn=img_grads,
        traj_attn=traj_grads,
        gamma=d_gamma,
        w1=d_w1,
        b1=d_b1,
        w2=d_w2,
        b2=d_b2,
    )
    return grads, d_f_img, d_f_traj


def tvp_backward(
    params: TvpParams,
    activations: Optional[TvpActivations],
    d_img: np.ndarray,
    d_traj: np.ndarray,
) -> TvpGradients:
    """Exact gradients of sum(d_img * out_img) + sum(d_traj * out_traj).

    Blocks beyond the forward depth get exactly zero gradients.
    """
    if activations is None:
        raise MissingActivations("tvp_backward needs the activations cached by tvp_forward")
    if len(activations.blocks) > len(params.blocks):
        raise MissingActivations("activations belong to a deeper parameter set")

    grads = zero_params(params.config)
    d_img, d_traj = np.asarray(d_img, dtype=np.float64), np.asarray(d_traj, dtype=np.float64)
    for i in reversed(range(len(activations.blocks))):
        grads.blocks[i], d_img, d_traj = tvp_block_backward(
            d_img, d_traj, activations.blocks[i], params.blocks[i], params.config
        )

    grads.lift_w = activations.units.T @ d_traj
    grads.lift_b = d_traj.sum(axis=0)
    return TvpGradients(params=grads, f_img=d_img, units=d_traj @ params.lift_w.T)
