import math

import numpy as np
import pytest

from tracekit.errors import NonFiniteInput, ShapeMismatch
from tracekit.nn.attention import (
    AttentionParams,
    cross_attention,
    cross_attention_backward,
    cross_attention_forward,
)
from tracekit.nn.gradcheck import finite_difference_check


def _dense_loop(x_q, x_kv, p: AttentionParams, n_heads: int) -> np.ndarray:
    """Straight-line reference: explicit loops over heads, queries and keys."""
    m, d = x_q.shape
    n = x_kv.shape[0]
    dh = d // n_heads

    def project(x, w, b):
        out = [[0.0] * d for _ in range(len(x))]
        for r in range(len(x)):
            for c in range(d):
                out[r][c] = b[c] + sum(x[r][i] * w[i][c] for i in range(d))
        return out

    q, k, v = project(x_q, p.w_q, p.b_q), project(x_kv, p.w_k, p.b_k), project(x_kv, p.w_v, p.b_v)
    context = [[0.0] * d for _ in range(m)]
    for h in range(n_heads):
        cols = range(h * dh, (h + 1) * dh)
        for i in range(m):
            scores = [sum(q[i][c] * k[j][c] for c in cols) / math.sqrt(dh) for j in range(n)]
            top = max(scores)
            weights = [math.exp(s - top) for s in scores]
            z = sum(weights)
            for c in cols:
                context[i][c] = sum(weights[j] / z * v[j][c] for j in range(n))
    return np.array(project(context, p.w_o, p.b_o))


def test_single_key_attends_fully(rng):
    d = 8
    params = AttentionParams.random(d, rng, bias_scale=0.1)
    x_q, x_kv = rng.normal(size=(5, d)), rng.normal(size=(1, d))
    out, cache = cross_attention_forward(x_q, x_kv, params, n_heads=2)
    assert np.all(cache.probs == 1.0)
    expected = (x_kv @ params.w_v + params.b_v) @ params.w_o + params.b_o
    np.testing.assert_allclose(out, np.repeat(expected, 5, axis=0), rtol=1e-12)


def test_zero_values_give_zero_output(rng):
    d = 8
    params = AttentionParams.random(d, rng)
    out = cross_attention(rng.normal(size=(3, d)), np.zeros((4, d)), params, n_heads=2)
    assert np.all(out == 0.0)


@pytest.mark.parametrize("m,n", [(3, 5), (5, 3)])
def test_matches_dense_loop_oracle(rng, m, n):
    d = 8
    params = AttentionParams.random(d, rng, bias_scale=0.2)
    x_q, x_kv = rng.normal(size=(m, d)), rng.normal(size=(n, d))
    out = cross_attention(x_q, x_kv, params, n_heads=2)
    np.testing.assert_allclose(out, _dense_loop(x_q, x_kv, params, 2), rtol=1e-10, atol=1e-12)


def test_attention_rows_sum_to_one(rng):
    params = AttentionParams.random(16, rng)
    _, cache = cross_attention_forward(rng.normal(size=(7, 16)) * 5, rng.normal(size=(9, 16)), params, n_heads=4)
    assert cache.probs.shape == (4, 7, 9)
    np.testing.assert_allclose(cache.probs.sum(axis=-1), 1.0, atol=1e-12)


def test_backward_matches_finite_differences(rng):
    d = 8
    params = AttentionParams.random(d, rng, bias_scale=0.1)
    x_q, x_kv = rng.normal(size=(3, d)), rng.normal(size=(5, d))
    upstream = rng.normal(size=(3, d))

    def loss():
        return float(np.sum(cross_attention(x_q, x_kv, params, 2) * upstream))

    _, cache = cross_attention_forward(x_q, x_kv, params, 2)
    grads, d_xq, d_xkv = cross_attention_backward(upstream, cache, params)
    analytic = dict(grads.named_arrays()) | {"x_q": d_xq, "x_kv": d_xkv}
    arrays = list(params.named_arrays()) + [("x_q", x_q), ("x_kv", x_kv)]
    report = finite_difference_check(loss, arrays, analytic, rng, max_entries=64)
    assert report.passed, report.max_rel_err


class TestErrors:
    def test_width_mismatch(self, rng):
        params = AttentionParams.random(8, rng)
        with pytest.raises(ShapeMismatch):
            cross_attention(rng.normal(size=(3, 6)), rng.normal(size=(3, 8)), params, 2)

    def test_empty_keys(self, rng):
        params = AttentionParams.random(8, rng)
        with pytest.raises(ShapeMismatch):
            cross_attention(rng.normal(size=(3, 8)), np.zeros((0, 8)), params, 2)

    def test_heads_must_divide_width(self, rng):
        params = AttentionParams.random(8, rng)
        with pytest.raises(ShapeMismatch):
            cross_attention(rng.normal(size=(3, 8)), rng.normal(size=(3, 8)), params, 3)

    def test_non_finite(self, rng):
        params = AttentionParams.random(8, rng)
        x = rng.normal(size=(3, 8))
        x[1, 2] = np.nan
        with pytest.raises(NonFiniteInput):
            cross_attention(x, rng.normal(size=(3, 8)), params, 2)
