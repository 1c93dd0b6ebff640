import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from striplab import tensor as T
from striplab.attention import (Direction, SelfAttentionParams, StdaParams, StripParams,
                                effective_kernel, flops_self_attention, flops_stda,
                                self_attention, stda, stda_frames, stda_frozen, strip_apply,
                                strip_weights)
from striplab.verification import oracles as orc

H, V = Direction.HORIZONTAL, Direction.VERTICAL


def one_hot(k):
    a = np.zeros(k)
    a[k // 2] = 1.0
    return a


# -- self-attention ------------------------------------------------------------

def test_self_attention_single_token(rng):
    p = SelfAttentionParams.random(3, rng)
    x = rng.normal(size=(3, 1, 1))
    expected = (x[:, 0, 0] @ p.w_v)[:, None, None]
    np.testing.assert_allclose(self_attention(x, p), expected, atol=1e-15)


def test_self_attention_constant_input(rng):
    p = SelfAttentionParams.random(2, rng)
    x = np.broadcast_to(rng.normal(size=(2, 1, 1)), (2, 3, 4)).copy()
    out = self_attention(x, p)
    assert np.all(out == out[:, :1, :1])


def test_self_attention_matches_oracle(rng):
    x = rng.normal(size=(2, 3, 3))
    p = SelfAttentionParams.random(2, rng)
    ref = orc.oracle_self_attention(x, p.w_q, p.w_k, p.w_v)
    assert np.max(np.abs(self_attention(x, p) - ref)) < 1e-12


def test_self_attention_scaled_flag(rng):
    x = rng.normal(size=(4, 2, 3))
    p = SelfAttentionParams.random(4, rng, scale_by_sqrt_d=True)
    ref = orc.oracle_self_attention(x, p.w_q, p.w_k, p.w_v, scale=True)
    assert np.max(np.abs(self_attention(x, p) - ref)) < 1e-12


def test_self_attention_outputs_in_value_hull(rng):
    # each output token is a convex combination of the value rows
    x = rng.normal(size=(3, 3, 3))
    p = SelfAttentionParams.random(3, rng)
    v = x.reshape(3, -1).T @ p.w_v
    out = self_attention(x, p).reshape(3, -1).T
    assert np.all(out <= v.max(axis=0) + 1e-12)
    assert np.all(out >= v.min(axis=0) - 1e-12)


def test_self_attention_shape_errors(rng):
    p = SelfAttentionParams.random(3, rng)
    with pytest.raises(T.ShapeError):
        self_attention(np.ones((2, 2, 2)), p)
    with pytest.raises(T.ShapeError):
        SelfAttentionParams(np.eye(3), np.eye(2), np.eye(3))


# -- strip weights ---------------------------------------------------------------

def test_strip_weights_zero_params(rng):
    p = StripParams(H, 5, np.zeros((5, 3)), np.zeros(5))
    np.testing.assert_array_equal(strip_weights(rng.normal(size=(3, 4, 4)), p), [0.5] * 5)


def test_strip_weights_zero_input(rng):
    p = StripParams.random(V, 3, 2, rng)
    np.testing.assert_allclose(strip_weights(np.zeros((2, 3, 3)), p), T.sigmoid(p.bias), atol=0)


def test_strip_weights_is_composition_of_core_ops(rng):
    x = rng.normal(size=(4, 5, 6))
    p = StripParams.random(H, 7, 4, rng)
    composed = T.sigmoid(T.matmul(p.weight, T.gap_spatial(x)[:, None])[:, 0] + p.bias)
    assert np.max(np.abs(strip_weights(x, p) - composed)) < 1e-14
    assert np.all((strip_weights(x, p) > 0) & (strip_weights(x, p) < 1))


def test_strip_params_validation(rng):
    with pytest.raises(ValueError, match="odd"):
        StripParams(H, 4, np.zeros((4, 2)), np.zeros(4))
    with pytest.raises(T.ShapeError):
        StripParams(H, 3, np.zeros((5, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        StdaParams(StripParams.random(H, 3, 2, rng), StripParams.random(V, 5, 2, rng))
    with pytest.raises(ValueError):
        StdaParams(StripParams.random(V, 3, 2, rng), StripParams.random(V, 3, 2, rng))


# -- strip integration -----------------------------------------------------------

@pytest.mark.parametrize("direction", [H, V])
def test_strip_apply_k1_is_gating(rng, direction):
    x = rng.normal(size=(2, 4, 5))
    np.testing.assert_array_equal(strip_apply(x, [0.3], direction), 0.3 * x)


@pytest.mark.parametrize("direction", [H, V])
@pytest.mark.parametrize("k", [1, 3, 5, 7])
def test_strip_apply_center_one_hot_is_identity(rng, direction, k):
    x = rng.normal(size=(2, 4, 5))
    np.testing.assert_array_equal(strip_apply(x, one_hot(k), direction), x)


@pytest.mark.parametrize("direction", [H, V])
def test_strip_apply_matches_loop_oracle(rng, direction):
    x = rng.normal(size=(2, 5, 7))
    a = rng.uniform(size=3)
    ref = orc.oracle_strip_apply(x, a, direction is H)
    assert np.max(np.abs(strip_apply(x, a, direction) - ref)) < 1e-12


def test_strip_apply_zero_padding_literal():
    # single row, K=3, weights (1, 10, 100): out[w] = x[w-1] + 10 x[w] + 100 x[w+1]
    x = np.array([[[1.0, 2.0, 3.0]]])
    out = strip_apply(x, [1.0, 10.0, 100.0], H)
    np.testing.assert_array_equal(out, [[[210.0, 321.0, 32.0]]])
    out_v = strip_apply(x.transpose(0, 2, 1), [1.0, 10.0, 100.0], V)
    np.testing.assert_array_equal(out_v[..., 0], [[210.0, 321.0, 32.0]])


def test_strip_apply_overhang(rng):
    # K larger than the axis: every out-of-range tap reads zero
    x = rng.normal(size=(1, 2, 2))
    a = rng.uniform(size=7)
    ref = orc.oracle_strip_apply(x, a, True)
    assert np.max(np.abs(strip_apply(x, a, H) - ref)) < 1e-12


def test_strip_apply_rejects_even_length():
    with pytest.raises(ValueError):
        strip_apply(np.ones((1, 3, 3)), [0.5, 0.5], H)


@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3),
       st.sampled_from([1, 3, 5, 7]), st.sampled_from([H, V]))
def test_strip_apply_linear_in_input(seed, alpha, beta, k, direction):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, 2, 3, 6))
    a = rng.uniform(size=k)
    lhs = strip_apply(alpha * x + beta * y, a, direction)
    rhs = alpha * strip_apply(x, a, direction) + beta * strip_apply(y, a, direction)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


# -- STDA --------------------------------------------------------------------------

def test_stda_frozen_center_one_hot_is_identity(rng):
    x = rng.normal(size=(3, 5, 5))
    np.testing.assert_array_equal(stda_frozen(x, one_hot(5), one_hot(5)), x)


def test_stda_k1_double_gating(rng):
    x = rng.normal(size=(3, 4, 4))
    p = StdaParams.random(1, 3, rng)
    a_h = strip_weights(x, p.horizontal)[0]
    a_v = strip_weights(a_h * x, p.vertical)[0]
    np.testing.assert_allclose(stda(x, p), a_v * (a_h * x), rtol=1e-15, atol=0)


def test_stda_identity_with_saturated_center_weights():
    # bias +-800 saturates the sigmoid to exact 0/1, giving a one-hot centre strip
    k, c = 5, 2
    bias = np.where(np.arange(k) == k // 2, 800.0, -800.0)
    strip = lambda d: StripParams(d, k, np.zeros((k, c)), bias)  # noqa: E731
    x = np.random.default_rng(1).normal(size=(c, 6, 6))
    np.testing.assert_array_equal(stda(x, StdaParams(strip(H), strip(V))), x)


def test_stda_matches_composed_oracle(rng):
    x = rng.normal(size=(2, 5, 6))
    p = StdaParams.random(3, 2, rng)
    ref = orc.oracle_stda(x, p.horizontal.weight, p.horizontal.bias,
                          p.vertical.weight, p.vertical.bias)
    assert np.max(np.abs(stda(x, p) - ref)) < 1e-12


def test_stda_vertical_weights_come_from_horizontal_output(rng):
    x = rng.normal(size=(2, 5, 5))
    p = StdaParams.random(3, 2, rng)
    y = strip_apply(x, strip_weights(x, p.horizontal), H)
    expected = strip_apply(y, strip_weights(y, p.vertical), V)
    np.testing.assert_array_equal(stda(x, p), expected)


def test_stda_frames_parallel_bit_identical(rng):
    clip = rng.normal(size=(6, 3, 8, 8))
    p = StdaParams.random(5, 3, rng)
    serial = stda_frames(clip, p)
    np.testing.assert_array_equal(serial, stda_frames(clip, p, workers=4))
    np.testing.assert_array_equal(serial[2], stda(clip[2], p))


# -- effective kernel ----------------------------------------------------------------

def correlate2d_zero(x, kern):
    c, h, w = x.shape
    r = kern.shape[0] // 2
    out = np.zeros_like(x)
    for i in range(kern.shape[0]):
        for j in range(kern.shape[1]):
            for hh in range(h):
                for ww in range(w):
                    sh, sw = hh - r + i, ww - r + j
                    if 0 <= sh < h and 0 <= sw < w:
                        out[:, hh, ww] += kern[i, j] * x[:, sh, sw]
    return out


def test_effective_kernel_one_hot():
    kern = effective_kernel(one_hot(3), one_hot(3))
    expected = np.zeros((3, 3))
    expected[1, 1] = 1.0
    np.testing.assert_array_equal(kern, expected)


def test_effective_kernel_two_hop_path_weight():
    # horizontal B = w_AB A + w_BB B + w_CB C, then vertical D = w_BD B + w_DD D:
    # the coefficient of A in D is w_BD * w_AB
    w_ab, w_bb, w_cb = 0.2, 0.5, 0.3
    w_bd, w_dd = 0.7, 0.4
    a_h = np.array([w_ab, w_bb, w_cb])
    a_v = np.array([w_bd, w_dd, 0.0])
    x = np.zeros((1, 3, 3))
    x[0, 0, 0] = 1.0  # pixel A, left neighbour of B = (0, 1); D = (1, 1) sits below B
    out = stda_frozen(x, a_h, a_v)
    assert out[0, 1, 1] == pytest.approx(w_bd * w_ab, abs=1e-15)
    assert effective_kernel(a_h, a_v)[0, 0] == pytest.approx(w_bd * w_ab, abs=1e-15)


def test_effective_kernel_equals_frozen_stda(rng):
    for k in (1, 3, 5, 7):
        a_h, a_v = rng.uniform(size=(2, k))
        x = rng.normal(size=(2, 9, 8))
        ref = correlate2d_zero(x, effective_kernel(a_h, a_v))
        assert np.max(np.abs(stda_frozen(x, a_h, a_v) - ref)) < 1e-12


def test_effective_kernel_length_mismatch():
    with pytest.raises(T.ShapeError):
        effective_kernel(np.ones(3), np.ones(5))


# -- FLOP models -----------------------------------------------------------------------

def test_flops_self_attention():
    f = flops_self_attention(1, 1, 1)
    assert dict(f) == {"projections": 3, "attention_map": 1, "weighted_sum": 1, "total": 5}
    f = flops_self_attention(4, 4, 8)
    assert f["projections"] == 3072 and f["attention_map"] == 2048
    g = flops_self_attention(8, 4, 8)
    assert g["attention_map"] == 4 * f["attention_map"]
    assert g["weighted_sum"] == 4 * f["weighted_sum"]


def test_flops_stda():
    assert flops_stda(1, 1, 1, 1)["integration"] == 2
    assert flops_stda(64, 64, 32, 7)["integration"] == 1_835_008
    assert flops_stda(16, 8, 32, 7)["integration"] == 2 * flops_stda(8, 8, 32, 7)["integration"]
    f = flops_stda(2, 3, 4, 5)
    assert f["weight_branch"] == 2 * (24 + 20 + 5)
    assert f.total == f["integration"] + f["weight_branch"]


@pytest.mark.parametrize("s", [8, 16, 32, 64])
def test_flops_stda_cheaper_on_bench_grid(s):
    assert flops_stda(s, s, 32, 7).total < flops_self_attention(s, s, 32).total


def test_flops_reject_nonpositive():
    with pytest.raises(ValueError):
        flops_stda(0, 1, 1, 1)
    with pytest.raises(ValueError):
        flops_self_attention(1, -2, 1)
