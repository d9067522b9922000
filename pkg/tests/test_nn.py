import math

import numpy as np
import pytest

from hmil.nn import (
    IDENTITY,
    RELU,
    TANH,
    AdamState,
    OffsetError,
    ShapeError,
    Tape,
    Tensor,
    adam_step,
    backward,
    concat_cols,
    dense_forward,
    segment_max,
    segment_mean,
)


def fd_grad(f, arr, eps=1e-5):
    """Central-difference gradient of scalar f() w.r.t. the entries of arr.

    Independent oracle: perturbs raw array entries and re-runs the
    forward closure, never touching the tape.
    """
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        ix = it.multi_index
        orig = arr[ix]
        arr[ix] = orig + eps
        hi = f()
        arr[ix] = orig - eps
        lo = f()
        arr[ix] = orig
        g[ix] = (hi - lo) / (2 * eps)
        it.iternext()
    return g


def rel_err(a, b):
    """Max element-wise relative error with a small denominator floor."""
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-4)
    return float(np.max(np.abs(a - b) / denom))


class TestDenseForward:
    def test_identity_weights(self):
        out = dense_forward(Tensor([[1.0, 2.0]]), Tensor(np.eye(2)),
                            Tensor([0.0, 0.0]), IDENTITY)
        np.testing.assert_array_equal(out.data, [[1.0, 2.0]])

    def test_relu_clips_negative(self):
        out = dense_forward(Tensor([[-1.0, 1.0]]), Tensor(np.eye(2)),
                            Tensor([0.0, 0.0]), RELU)
        np.testing.assert_array_equal(out.data, [[0.0, 1.0]])

    def test_tanh_scalar(self):
        # tanh(0.5 * 2 + 1) = tanh(2); oracle value from math.tanh
        out = dense_forward(Tensor([[0.5]]), Tensor([[2.0]]), Tensor([1.0]), TANH)
        assert out.data[0, 0] == pytest.approx(0.9640275800758169, abs=1e-12)
        assert out.data[0, 0] == pytest.approx(math.tanh(2.0), abs=1e-15)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError) as exc:
            dense_forward(Tensor([[1.0, 2.0]]), Tensor([[1.0]]), None, IDENTITY)
        assert "(1, 2)" in str(exc.value) and "(1, 1)" in str(exc.value)

    def test_bias_optional(self):
        out = dense_forward(Tensor([[2.0]]), Tensor([[3.0]]), None, IDENTITY)
        assert out.data[0, 0] == 6.0

    def test_tanh_output_in_open_unit_interval(self):
        # float64 tanh saturates to exactly +/-1 for |z| > ~19, so the
        # strict bound is asserted on the representable range.
        rng = np.random.default_rng(7)
        x = Tensor(rng.normal(size=(40, 6)))
        w = Tensor(rng.normal(size=(6, 5)))
        b = Tensor(rng.normal(size=(1, 5)))
        z = x.data @ w.data + b.data
        assert np.all(np.abs(z) < 18)
        out = dense_forward(x, w, b, TANH)
        assert np.all(out.data > -1.0) and np.all(out.data < 1.0)


class TestSegmentMean:
    def test_mean_of_two_rows(self):
        out = segment_mean(Tensor([[1.0, 3.0], [3.0, 5.0]]), [0, 2])
        np.testing.assert_array_equal(out.data, [[2.0, 4.0]])

    def test_singleton_is_identity(self):
        out = segment_mean(Tensor([[7.0, 7.0]]), [0, 1])
        np.testing.assert_array_equal(out.data, [[7.0, 7.0]])

    def test_empty_segment_yields_zero_row(self):
        out = segment_mean(Tensor([[1.0, 1.0], [2.0, 2.0]]), [0, 0, 2])
        np.testing.assert_array_equal(out.data, [[0.0, 0.0], [1.5, 1.5]])

    @pytest.mark.parametrize("offsets", [[1, 2], [0, 1], [0, 3, 2], [0]])
    def test_malformed_offsets(self, offsets):
        with pytest.raises(OffsetError):
            segment_mean(Tensor([[1.0], [2.0], [3.0]]), offsets)

    def test_linearity(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = rng.integers(1, 12)
            k = rng.integers(1, 5)
            a = rng.normal(size=(n, k))
            b = rng.normal(size=(n, k))
            alpha, beta = rng.normal(size=2)
            cuts = np.sort(rng.integers(0, n + 1, size=3))
            offsets = np.concatenate([[0], cuts, [n]])
            lhs = segment_mean(Tensor(alpha * a + beta * b), offsets).data
            rhs = (alpha * segment_mean(Tensor(a), offsets).data
                   + beta * segment_mean(Tensor(b), offsets).data)
            np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


class TestSegmentMax:
    def test_elementwise_max(self):
        out = segment_max(Tensor([[1.0, 5.0], [3.0, 2.0]]), [0, 2])
        np.testing.assert_array_equal(out.data, [[3.0, 5.0]])

    def test_singleton(self):
        out = segment_max(Tensor([[-1.0, -2.0]]), [0, 1])
        np.testing.assert_array_equal(out.data, [[-1.0, -2.0]])

    def test_empty_bag_convention(self):
        out = segment_max(Tensor(np.empty((0, 3))), [0, 0])
        np.testing.assert_array_equal(out.data, [[0.0, 0.0, 0.0]])


class TestBackward:
    def test_linear_chain_rule(self):
        x, w = Tensor([[1.0]]), Tensor([[3.0]])
        tape = Tape()
        loss = dense_forward(x, w, None, IDENTITY, tape)
        grads = backward(tape, loss)
        np.testing.assert_array_equal(grads[w], [[1.0]])
        np.testing.assert_array_equal(grads[x], [[3.0]])

    def test_mean_backward_splits_evenly(self):
        x = Tensor([[1.0, 2.0], [3.0, 4.0]])
        ones = Tensor([[1.0], [1.0]])
        tape = Tape()
        pooled = segment_mean(x, [0, 2], tape)
        loss = dense_forward(pooled, ones, None, IDENTITY, tape)
        grads = backward(tape, loss)
        np.testing.assert_array_equal(grads[x], [[0.5, 0.5], [0.5, 0.5]])

    def test_max_backward_routes_to_first_argmax(self):
        x = Tensor([[2.0], [2.0], [1.0]])
        tape = Tape()
        pooled = segment_max(x, [0, 3], tape)
        grads = backward(tape, pooled)
        np.testing.assert_array_equal(grads[x], [[1.0], [0.0], [0.0]])

    def test_non_scalar_loss_rejected(self):
        x = Tensor([[1.0, 2.0]])
        tape = Tape()
        out = dense_forward(x, Tensor(np.eye(2)), None, IDENTITY, tape)
        with pytest.raises(ShapeError):
            backward(tape, out)

    def test_fanout_accumulates(self):
        x = Tensor([[1.0]])
        two, three = Tensor([[2.0]]), Tensor([[3.0]])
        tape = Tape()
        a = dense_forward(x, two, None, IDENTITY, tape)
        b = dense_forward(x, three, None, IDENTITY, tape)
        loss = dense_forward(concat_cols([a, b], tape),
                             Tensor([[1.0], [1.0]]), None, IDENTITY, tape)
        grads = backward(tape, loss)
        np.testing.assert_array_equal(grads[x], [[5.0]])


class TestGradientVsFiniteDifferences:
    """Randomized finite-difference checks for every op, 100+ cases.

    Each case scalarizes by mean-pooling a single output column, so the
    tape under test and the fd oracle share only the forward closure.
    """

    def test_dense_tanh_many_shapes(self):
        rng = np.random.default_rng(123)
        worst = 0.0
        for _ in range(60):
            n, d, k = (int(v) for v in rng.integers(1, 7, size=3))
            x = Tensor(rng.normal(size=(n, d)))
            w = Tensor(rng.normal(size=(d, k)))
            b = Tensor(rng.normal(size=(1, k)))
            ones = Tensor(np.ones((k, 1)))

            def run():
                h = dense_forward(x, w, b, TANH)
                col = dense_forward(h, ones, None, IDENTITY)
                return segment_mean(col, [0, n]).data[0, 0]

            tape = Tape()
            h = dense_forward(x, w, b, TANH, tape)
            col = dense_forward(h, ones, None, IDENTITY, tape)
            loss = segment_mean(col, [0, n], tape)
            grads = backward(tape, loss)
            for t in (x, w, b):
                worst = max(worst, rel_err(grads[t], fd_grad(run, t.data)))
        assert worst < 1e-4

    def test_segment_ops_many_shapes(self):
        rng = np.random.default_rng(456)
        worst = 0.0
        for case in range(50):
            n = int(rng.integers(1, 10))
            k = int(rng.integers(1, 4))
            x = Tensor(rng.normal(size=(n, k)) * 2)
            cuts = np.sort(rng.integers(0, n + 1, size=2))
            offsets = np.concatenate([[0], cuts, [n]])
            w = Tensor(rng.normal(size=(k, 1)))
            agg = segment_mean if case % 2 == 0 else segment_max

            def run():
                pooled = agg(x, offsets)
                col = dense_forward(pooled, w, None, IDENTITY)
                return segment_mean(col, [0, col.rows]).data[0, 0]

            tape = Tape()
            pooled = agg(x, offsets, tape)
            col = dense_forward(pooled, w, None, IDENTITY, tape)
            loss = segment_mean(col, [0, col.rows], tape)
            grads = backward(tape, loss)
            worst = max(worst, rel_err(grads[x], fd_grad(run, x.data)))
            worst = max(worst, rel_err(grads[w], fd_grad(run, w.data)))
        assert worst < 1e-4

    def test_relu_away_from_kinks(self):
        rng = np.random.default_rng(789)
        x = Tensor(rng.normal(size=(5, 3)) + 3.0 * np.sign(rng.normal(size=(5, 3))))
        w = Tensor(np.eye(3))
        tape = Tape()
        h = dense_forward(x, w, None, RELU, tape)
        col = dense_forward(h, Tensor(np.ones((3, 1))), None, IDENTITY, tape)
        total = segment_mean(col, [0, 5], tape)
        grads = backward(tape, total)

        def run():
            h = dense_forward(x, w, None, RELU)
            col = dense_forward(h, Tensor(np.ones((3, 1))), None, IDENTITY)
            return segment_mean(col, [0, 5]).data[0, 0]

        assert rel_err(grads[x], fd_grad(run, x.data)) < 1e-4


class TestAdam:
    def test_zero_gradient_is_fixed_point(self):
        p = Tensor([[1.0, -2.0]])
        state = AdamState.for_params([p])
        adam_step([p], [np.zeros((1, 2))], state, lr=0.1)
        np.testing.assert_array_equal(p.data, [[1.0, -2.0]])

    def test_single_step_hand_value(self):
        # m-hat = v-hat = 1 after one unit-gradient step, so the update is
        # lr / (1 + eps); hand-evaluated: -0.09999999900000002
        p = Tensor([[0.0]])
        state = AdamState.for_params([p])
        adam_step([p], [np.ones((1, 1))], state, lr=0.1)
        assert p.data[0, 0] == pytest.approx(-0.09999999900000002, abs=1e-15)

    def test_identical_params_get_identical_updates(self):
        p1, p2 = Tensor([[0.3]]), Tensor([[0.3]])
        g = np.array([[0.7]])
        state = AdamState.for_params([p1, p2])
        adam_step([p1, p2], [g, g.copy()], state, lr=0.01)
        assert p1.data[0, 0] == p2.data[0, 0]

    def test_state_length_mismatch(self):
        p = Tensor([[0.0]])
        state = AdamState.for_params([p])
        with pytest.raises(ShapeError):
            adam_step([p, Tensor([[0.0]])], [np.zeros((1, 1))] * 2, state)


def test_determinism_bit_identical():
    def run():
        rng = np.random.default_rng(42)
        x = Tensor(rng.normal(size=(6, 3)))
        w = Tensor(rng.normal(size=(3, 4)))
        b = Tensor(rng.normal(size=(1, 4)))
        h = dense_forward(x, w, b, TANH)
        return segment_mean(h, [0, 2, 6]).data

    a, b = run(), run()
    assert a.tobytes() == b.tobytes()


def test_forward_outputs_finite_on_finite_input():
    rng = np.random.default_rng(5)
    x = Tensor(rng.normal(size=(20, 4)) * 50)
    w = Tensor(rng.normal(size=(4, 4)) * 50)
    b = Tensor(rng.normal(size=(1, 4)))
    for act in (TANH, RELU, IDENTITY):
        out = dense_forward(x, w, b, act)
        assert np.all(np.isfinite(out.data))
