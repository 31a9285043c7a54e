import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fedhealth.exceptions import ConfigurationError, InvalidInputError
from fedhealth.nn.layers import (
    conv1d_forward,
    cross_entropy_loss,
    fc_forward,
    maxpool1d_forward,
    softmax,
    softmax_cross_entropy,
)


def conv_oracle(x, w, b, stride):
    c_out, c_in, k = w.shape
    t_out = (x.shape[1] - k) // stride + 1
    out = np.zeros((c_out, t_out))
    for o in range(c_out):
        for t in range(t_out):
            acc = b[o]
            for c in range(c_in):
                for j in range(k):
                    acc += w[o, c, j] * x[c, t * stride + j]
            out[o, t] = acc
    return out


def pool_oracle(x, window, stride):
    t_out = (x.shape[1] - window) // stride + 1
    return np.array([[max(row[t * stride:t * stride + window]) for t in range(t_out)] for row in x])


class TestConv:
    def test_zero_weights_give_bias(self, rng):
        out = conv1d_forward(rng.normal(size=(3, 20)), np.zeros((2, 3, 9)), np.array([0.5, -1.0]))
        assert np.all(out[0] == 0.5) and np.all(out[1] == -1.0)

    def test_unit_impulse_is_truncation(self, rng):
        x = rng.normal(size=(1, 20))
        w = np.zeros((1, 1, 9))
        w[0, 0, 0] = 1.0
        out = conv1d_forward(x, w, np.zeros(1))
        np.testing.assert_array_equal(out[0], x[0, :12])

    @pytest.mark.parametrize("stride", [1, 2, 3])
    def test_matches_loop_oracle(self, rng, stride):
        x = rng.normal(size=(2, 32))
        w = rng.normal(size=(4, 2, 9))
        b = rng.normal(size=4)
        out = conv1d_forward(x, w, b, stride)
        assert out.shape == (4, (32 - 9) // stride + 1)
        assert np.max(np.abs(out - conv_oracle(x, w, b, stride))) < 1e-12

    def test_batched_equals_single(self, rng):
        x = rng.normal(size=(3, 2, 16))
        w = rng.normal(size=(3, 2, 9))
        b = rng.normal(size=3)
        batched = conv1d_forward(x, w, b)
        for i in range(3):
            np.testing.assert_array_equal(batched[i], conv1d_forward(x[i], w, b))

    def test_channel_mismatch(self, rng):
        with pytest.raises(ConfigurationError):
            conv1d_forward(rng.normal(size=(3, 20)), rng.normal(size=(2, 4, 9)), np.zeros(2))

    def test_too_short(self, rng):
        with pytest.raises(InvalidInputError):
            conv1d_forward(rng.normal(size=(1, 8)), rng.normal(size=(1, 1, 9)), np.zeros(1))


class TestPool:
    def test_hand_example(self):
        out, arg = maxpool1d_forward(np.array([[1.0, 3.0, 2.0, 5.0]]), 2, 2)
        np.testing.assert_array_equal(out, [[3.0, 5.0]])
        np.testing.assert_array_equal(arg, [[1, 3]])

    def test_constant_input(self):
        out, _ = maxpool1d_forward(np.full((2, 10), 4.25), 2, 2)
        assert np.all(out == 4.25)

    @pytest.mark.parametrize("window,stride", [(2, 2), (3, 1), (3, 2), (1, 1)])
    def test_matches_scan_oracle(self, rng, window, stride):
        x = rng.normal(size=(3, 16))
        out, arg = maxpool1d_forward(x, window, stride)
        np.testing.assert_array_equal(out, pool_oracle(x, window, stride))
        np.testing.assert_array_equal(np.take_along_axis(x, arg, axis=1), out)

    def test_window_too_large(self):
        with pytest.raises(InvalidInputError):
            maxpool1d_forward(np.zeros((1, 3)), 4, 1)


class TestFC:
    def test_identity(self, rng):
        x = rng.normal(size=5)
        np.testing.assert_array_equal(fc_forward(x, np.eye(5), np.zeros(5)), x)

    def test_zero_weight(self, rng):
        b = rng.normal(size=3)
        np.testing.assert_array_equal(fc_forward(rng.normal(size=4), np.zeros((3, 4)), b), b)

    def test_matches_matvec(self, rng):
        x, w, b = rng.normal(size=8), rng.normal(size=(4, 8)), rng.normal(size=4)
        oracle = [sum(w[i, j] * x[j] for j in range(8)) + b[i] for i in range(4)]
        assert np.max(np.abs(fc_forward(x, w, b) - oracle)) < 1e-12

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ConfigurationError):
            fc_forward(rng.normal(size=5), rng.normal(size=(3, 4)), np.zeros(3))


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(np.zeros(6)), np.full(6, 1 / 6), rtol=0, atol=1e-15)

    def test_direct_oracle(self):
        z = np.array([1.0, 2.0, 3.0])
        e = [math.exp(v) for v in z]
        np.testing.assert_allclose(softmax(z), [v / sum(e) for v in e], rtol=0, atol=1e-15)

    def test_nan_rejected(self):
        with pytest.raises(InvalidInputError):
            softmax(np.array([0.0, np.nan]))

    def test_large_logits_stable(self):
        p = softmax(np.array([1000.0, 1000.0, -1000.0]))
        np.testing.assert_allclose(p, [0.5, 0.5, 0.0], atol=1e-15)

    @given(
        arrays(np.float64, st.integers(1, 10), elements=st.floats(-50, 50)),
        st.floats(-100, 100),
    )
    @settings(max_examples=200, deadline=None)
    def test_sum_and_shift_invariance(self, z, c):
        p = softmax(z)
        assert np.all(p > 0)
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.max(np.abs(softmax(z + c) - p)) < 1e-12


class TestCrossEntropy:
    def test_one_hot(self):
        assert cross_entropy_loss(np.array([0.0, 1.0, 0.0]), 1) == pytest.approx(0.0, abs=1e-15)

    def test_uniform_six(self):
        assert cross_entropy_loss(np.full(6, 1 / 6), 3) == pytest.approx(1.791759, abs=1e-6)

    def test_random_distribution(self, rng):
        p = rng.dirichlet(np.ones(5))
        assert cross_entropy_loss(p, 2) == pytest.approx(-math.log(p[2]), rel=1e-15)

    def test_floor(self):
        assert cross_entropy_loss(np.array([1.0, 0.0]), 1) == pytest.approx(-math.log(1e-12))

    @pytest.mark.parametrize("label", [-1, 3])
    def test_label_out_of_range(self, label):
        with pytest.raises(InvalidInputError):
            cross_entropy_loss(np.full(3, 1 / 3), label)

    def test_batch_mean_matches_per_sample(self, rng):
        logits = rng.normal(size=(7, 6))
        labels = rng.integers(0, 6, size=7)
        loss, _ = softmax_cross_entropy(logits, labels)
        per = [cross_entropy_loss(softmax(z), y) for z, y in zip(logits, labels)]
        assert loss == pytest.approx(np.mean(per), rel=1e-13)
