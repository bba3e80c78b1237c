"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import logging
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from tracekit.models.schemas import GradCheckReport, ParamCheck, TvpConfig
from tracekit.nn.tvp import TvpParams, init_params, tvp_backward, tvp_forward

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
REL_ERR_TOLERANCE = 1e-4
REL_ERR_FLOOR = 1e-4
MAX_ENTRIES = 24

# problem size for the TVP check
N_VISUAL = 6
N_TRAJECTORY = 4


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_ERR_FLOOR)


def finite_difference_check(
    loss: Callable[[], float],
    arrays: Sequence[Tuple[str, np.ndarray]],
    analytic: Dict[str, np.ndarray],
    rng: np.random.Generator,
    max_entries: int = MAX_ENTRIES,
    step: float = FD_STEP,
    tolerance: float = REL_ERR_TOLERANCE,
) -> GradCheckReport:
    """Perturb entries of each named array in place and compare (L(+h) - L(-h)) / 2h
    against the analytic gradient. Arrays with more than max_entries entries are
    checked on a random subset; every array is restored afterwards.
    """
    per_param = []
    for name, arr in arrays:
        grad = analytic[name]
        if arr.size <= max_entries:
            idx = np.arange(arr.size)
        else:
            idx = np.sort(rng.choice(arr.size, size=max_entries, replace=False))
        worst = 0.0
        for i in idx:
            orig = arr.flat[i]
            arr.flat[i] = orig + step
            plus = loss()
            arr.flat[i] = orig - step
            minus = loss()
            arr.flat[i] = orig
            numeric = (plus - minus) / (2.0 * step)
            worst = max(worst, relative_error(float(grad.flat[i]), numeric))
        per_param.append(ParamCheck(name=name, shape=list(arr.shape), checked=len(idx), max_rel_err=worst))

    max_rel_err = max((p.max_rel_err for p in per_param), default=0.0)
    report = GradCheckReport(
        max_rel_err=max_rel_err,
        passed=max_rel_err < tolerance,
        tolerance=tolerance,
        per_param=per_param,
    )
    if not report.passed:
        worst = max(per_param, key=lambda p: p.max_rel_err)
        logger.warning(f"Gradient check failed: {worst.name} rel err {worst.max_rel_err:.3e}")
    return report


def perturb_params(params: TvpParams, rng: np.random.Generator, gamma_scale: float = 0.5, bias_scale: float = 0.1):
    """Move biases and gamma off zero so their gradient paths carry signal."""
    for name, arr in params.named_arrays():
        leaf = name.rsplit(".", 1)[-1]
        if leaf == "gamma":
            if gamma_scale:
                arr[...] = rng.normal(0.0, gamma_scale, arr.shape)
        elif leaf.startswith("b") or leaf == "lift_b":
            arr[...] = rng.normal(0.0, bias_scale, arr.shape)


def grad_check(
    config: Optional[TvpConfig] = None,
    seed: int = 0,
    max_entries: int = MAX_ENTRIES,
    perturb_gamma: bool = True,
) -> GradCheckReport:
    """Random params, inputs and upstream gradients; analytic vs numeric on
    every parameter tensor and both inputs."""
    config = config or TvpConfig(seed=seed)
    rng = np.random.default_rng(seed)
    params = init_params(config, seed)
    perturb_params(params, rng, gamma_scale=0.5 if perturb_gamma else 0.0)

    f_img = rng.normal(0.0, 1.0, (N_VISUAL, config.d_model))
    units = rng.uniform(0.0, 1.0, (N_TRAJECTORY, 2))
    g_img = rng.normal(0.0, 1.0, (N_VISUAL, config.d_model))
    g_traj = rng.normal(0.0, 1.0, (N_TRAJECTORY, config.d_model))

    def loss() -> float:
        out_img, out_traj, _ = tvp_forward(params, f_img, units)
        return float(np.sum(out_img * g_img) + np.sum(out_traj * g_traj))

    _, _, acts = tvp_forward(params, f_img, units)
    grads = tvp_backward(params, acts, g_img, g_traj)

    arrays = params.named_arrays() + [("input.f_img", f_img), ("input.trajectory", units)]
    analytic = dict(grads.params.named_arrays())
    analytic["input.f_img"] = grads.f_img
    analytic["input.trajectory"] = grads.units

    report = finite_difference_check(loss, arrays, analytic, rng, max_entries=max_entries)
    logger.info(
        f"TVP grad check d={config.d_model} heads={config.n_heads} blocks={config.n_blocks} "
        f"seed={seed}: max rel err {report.max_rel_err:.3e}"
    )
    return report
