import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from striplab import tensor as T
from striplab.verification.oracles import oracle_gap, oracle_matmul

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_matmul_identity(rng):
    b = rng.normal(size=(3, 3))
    assert np.array_equal(T.matmul(np.eye(3), b), b)
    assert np.array_equal(T.matmul([[1, 2], [3, 4]], np.eye(2)), [[1, 2], [3, 4]])


def test_matmul_matches_triple_loop(rng):
    a, b = rng.normal(size=(5, 7)), rng.normal(size=(7, 3))
    assert np.max(np.abs(T.matmul(a, b) - oracle_matmul(a, b))) < 1e-12


def test_matmul_shape_mismatch():
    with pytest.raises(T.ShapeError, match=r"\(2, 3\) x \(2, 3\)"):
        T.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_associative(rng):
    for _ in range(20):
        m, n, p, q = rng.integers(1, 8, size=4)
        a, b, c = rng.normal(size=(m, n)), rng.normal(size=(n, p)), rng.normal(size=(p, q))
        left = T.matmul(T.matmul(a, b), c)
        right = T.matmul(a, T.matmul(b, c))
        assert np.max(np.abs(left - right)) <= 1e-10 * max(1.0, np.max(np.abs(left)))


def test_softmax_examples(rng):
    np.testing.assert_allclose(T.softmax_rows([[0.0, 0.0, 0.0]]), [[1 / 3] * 3], atol=1e-15)
    out = T.softmax_rows([[1000.0, 0.0]])
    assert np.all(np.isfinite(out))
    assert out[0, 0] == 1.0 and out[0, 1] < 1e-300
    s = T.softmax_rows(rng.normal(size=(4, 4)))
    assert np.all(s >= 0)
    assert np.max(np.abs(s.sum(axis=1) - 1.0)) < 1e-12


@given(arrays(np.float64, (3, 5), elements=finite), finite)
def test_softmax_shift_invariant(x, shift):
    np.testing.assert_allclose(T.softmax_rows(x + shift), T.softmax_rows(x), rtol=0, atol=1e-12)


def test_sigmoid(rng):
    assert T.sigmoid(0.0) == 0.5
    sat = T.sigmoid(np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(sat)) and sat[0] < 1e-300 and sat[1] == 1.0
    x = rng.normal(scale=4, size=50)
    naive = np.array([1.0 / (1.0 + math.exp(-v)) for v in x])
    assert np.max(np.abs(T.sigmoid(x) - naive)) < 1e-14
    assert np.all((T.sigmoid(x) > 0) & (T.sigmoid(x) < 1))


def test_gap(rng):
    np.testing.assert_array_equal(T.gap_spatial(np.full((3, 2, 4), 2.5)), [2.5] * 3)
    np.testing.assert_array_equal(T.gap_spatial([[[7.0]], [[-1.0]]]), [7.0, -1.0])
    x = rng.normal(size=(3, 4, 5))
    assert np.max(np.abs(T.gap_spatial(x) - oracle_gap(x))) < 1e-12
    with pytest.raises(T.ShapeError):
        T.gap_spatial(np.ones((2, 0, 3)))


@given(arrays(np.float64, (2, 3, 3), elements=finite), st.floats(-50, 50))
def test_gap_homogeneous(x, alpha):
    np.testing.assert_allclose(T.gap_spatial(alpha * x), alpha * T.gap_spatial(x),
                               rtol=1e-12, atol=1e-9)


def test_cosine_examples():
    v = np.array([1.0, -2.0, 0.5])
    assert T.cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-15)
    assert T.cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert T.cosine_similarity(v, -v) == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(T.ZeroNormError):
        T.cosine_similarity([0.0, 0.0], [1.0, 1.0])


@given(arrays(np.float64, 4, elements=st.floats(-10, 10)),
       arrays(np.float64, 4, elements=st.floats(-10, 10)),
       st.floats(0.1, 10) | st.floats(-10, -0.1), st.floats(0.1, 10) | st.floats(-10, -0.1))
def test_cosine_scale(a, b, alpha, beta):
    if np.linalg.norm(a) < 1e-3 or np.linalg.norm(b) < 1e-3:
        return
    expected = np.sign(alpha * beta) * T.cosine_similarity(a, b)
    assert abs(T.cosine_similarity(alpha * a, beta * b) - expected) < 1e-12


def test_tsr_round_trip(tmp_path, rng):
    x = rng.normal(size=(2, 3, 4))
    T.save(tmp_path / "x.tsr", x)
    raw = (tmp_path / "x.tsr").read_bytes()
    assert raw.startswith(b"TSR1 3 2 3 4\n")
    assert len(raw) == len(b"TSR1 3 2 3 4\n") + 8 * 24
    np.testing.assert_array_equal(T.load(tmp_path / "x.tsr"), x)
    # payload is little-endian float64 in row-major order
    assert np.frombuffer(raw[-8:], "<f8")[0] == x[1, 2, 3]


@pytest.mark.parametrize("data", [
    b"TSR2 1 2\n" + bytes(16),
    b"TSR1 2 2\n" + bytes(16),
    b"TSR1 1 3\n" + bytes(16),
    b"TSR1 1 x\n",
    b"\xff\xfe\n",
])
def test_tsr_rejects_malformed(data):
    with pytest.raises(T.TensorFormatError):
        T.load_tsr(io.BytesIO(data))
