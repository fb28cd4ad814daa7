"""Tensor operations, reverse pass and the convolutional GRU."""

import numpy as np
import pytest

from src.errors import ShapeError
from src.nn_core import (
    GruParams, Tape, Variable, add, bias_add, binarize, clamp, constant, conv2d,
    depth_to_space, gru_step, mul, one_minus, reduce_sum, reverse_pass, scale, sigmoid,
    space_to_depth, sub, tanh, zero_state,
)
from tests.helpers import check_gradients

SHAPES = [(3,), (2, 5), (1, 4, 4, 3)]


def _var(rng, shape, name, spread=1.0):
    return Variable(rng.normal(0.0, spread, size=shape), name=name, requires_grad=True)


class TestElementwiseGradients:

    @pytest.mark.parametrize("shape", SHAPES)
    def test_binary_ops(self, shape):
        rng = np.random.default_rng(1)
        a, b = _var(rng, shape, "a"), _var(rng, shape, "b")
        for op in (add, sub, mul):
            check_gradients(lambda tape: op(a, b, tape), [a, b])

    @pytest.mark.parametrize("shape", SHAPES)
    def test_unary_ops(self, shape):
        rng = np.random.default_rng(2)
        a = _var(rng, shape, "a")
        check_gradients(lambda tape: scale(a, -2.5, tape), [a])
        check_gradients(lambda tape: one_minus(a, tape), [a])
        check_gradients(lambda tape: sigmoid(a, tape), [a])
        check_gradients(lambda tape: tanh(a, tape), [a])
        check_gradients(lambda tape: reduce_sum(a, tape), [a])

    @pytest.mark.parametrize("shape", SHAPES)
    def test_clamp_inside_and_outside(self, shape):
        rng = np.random.default_rng(3)
        values = rng.uniform(0.05, 0.45, size=shape) * rng.choice([-1.0, 1.0], size=shape)
        # push half the entries well outside the range; none sit near a bound
        values = np.where(rng.uniform(size=shape) < 0.5, values * 4.0, values)
        values = np.where(np.abs(np.abs(values) - 0.5) < 0.05, 0.2, values)
        a = Variable(values, name="a", requires_grad=True)
        check_gradients(lambda tape: clamp(a, -0.5, 0.5, tape), [a])

    def test_bias_add(self):
        rng = np.random.default_rng(4)
        x, b = _var(rng, (2, 3, 3, 4), "x"), _var(rng, (4,), "b")
        check_gradients(lambda tape: bias_add(x, b, tape), [x, b])


class TestBinarizer:

    def test_sign_with_zero_as_plus_one(self):
        x = constant(np.array([-0.3, 0.0, 0.7, -0.0]))
        np.testing.assert_array_equal(binarize(x).value, [-1.0, 1.0, 1.0, 1.0])

    def test_straight_through_gradient(self):
        x = Variable(np.array([[-2.0, 0.1], [0.0, 3.0]]), name="x", requires_grad=True)
        tape = Tape()
        weights = constant(np.array([[1.0, 2.0], [3.0, 4.0]]))
        loss = reduce_sum(mul(binarize(x, tape), weights, tape), tape)
        grads = reverse_pass(tape, loss, wrt=[x])
        np.testing.assert_array_equal(grads["x"], weights.value)

    def test_keeps_dtype(self):
        x = constant(np.zeros((2, 2), dtype=np.float32))
        assert binarize(x).dtype == np.float32


class TestConvolution:

    @pytest.mark.parametrize("k", [1, 3])
    @pytest.mark.parametrize("stride", [1, 2])
    def test_gradients(self, k, stride):
        rng = np.random.default_rng(10 * k + stride)
        x = _var(rng, (2, 5, 6, 3), "x")
        w = _var(rng, (k, k, 3, 4), "w", spread=0.5)
        check_gradients(lambda tape: conv2d(x, w, stride, tape), [x, w])

    @pytest.mark.parametrize("stride", [1, 2])
    def test_output_size_is_ceil(self, stride):
        x = constant(np.ones((1, 7, 9, 2)))
        w = constant(np.ones((3, 3, 2, 5)))
        assert conv2d(x, w, stride).shape == (1, -(-7 // stride), -(-9 // stride), 5)

    def test_zero_padding_at_borders(self):
        x = constant(np.ones((1, 3, 3, 1)))
        w = constant(np.ones((3, 3, 1, 1)))
        out = conv2d(x, w).value[0, :, :, 0]
        np.testing.assert_array_equal(out, [[4, 6, 4], [6, 9, 6], [4, 6, 4]])

    def test_cross_correlation_orientation(self):
        x = np.zeros((1, 3, 3, 1))
        x[0, 1, 2, 0] = 1.0
        w = np.zeros((3, 3, 1, 1))
        w[1, 2, 0, 0] = 5.0
        out = conv2d(constant(x), constant(w)).value[0, :, :, 0]
        # kernel tap (1, 2) reads the pixel to the right of the output position
        assert out[1, 1] == 5.0
        assert np.count_nonzero(out) == 1

    def test_rejects_bad_shapes(self):
        x = constant(np.ones((1, 4, 4, 2)))
        with pytest.raises(ShapeError):
            conv2d(x, constant(np.ones((2, 2, 2, 1))))
        with pytest.raises(ShapeError):
            conv2d(x, constant(np.ones((3, 3, 3, 1))))
        with pytest.raises(ShapeError):
            conv2d(x, constant(np.ones((3, 3, 2, 1))), stride=3)
        with pytest.raises(ShapeError):
            conv2d(constant(np.ones((4, 4, 2))), constant(np.ones((1, 1, 2, 1))))


class TestDepthToSpace:

    def test_index_mapping(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(2, 3, 4, 8))
        out = depth_to_space(constant(x)).value
        assert out.shape == (2, 6, 8, 2)
        for y in range(3):
            for xx in range(4):
                for dy in range(2):
                    for dx in range(2):
                        for c in range(2):
                            np.testing.assert_array_equal(
                                out[:, 2 * y + dy, 2 * xx + dx, c],
                                x[:, y, xx, c * 4 + dy * 2 + dx],
                            )

    def test_space_to_depth_is_inverse(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(1, 4, 6, 12))
        back = space_to_depth(depth_to_space(constant(x))).value
        np.testing.assert_array_equal(back, x)

    def test_gradients(self):
        rng = np.random.default_rng(7)
        x = _var(rng, (1, 2, 3, 8), "x")
        check_gradients(lambda tape: depth_to_space(x, 2, tape), [x])
        y = _var(rng, (1, 4, 6, 2), "y")
        check_gradients(lambda tape: space_to_depth(y, 2, tape), [y])

    def test_rejects_bad_depth(self):
        with pytest.raises(ShapeError):
            depth_to_space(constant(np.ones((1, 2, 2, 6))))
        with pytest.raises(ShapeError):
            space_to_depth(constant(np.ones((1, 3, 2, 4))))


class TestReversePass:

    def test_repeated_passes_are_identical(self):
        rng = np.random.default_rng(8)
        a, b = _var(rng, (3, 4), "a"), _var(rng, (3, 4), "b")
        tape = Tape()
        loss = reduce_sum(mul(tanh(add(a, b, tape), tape), a, tape), tape)
        first = reverse_pass(tape, loss)
        second = reverse_pass(tape, loss)
        for name in ("a", "b"):
            np.testing.assert_array_equal(first[name], second[name])

    def test_fan_out_accumulates(self):
        a = Variable(np.array([1.5, -2.0]), name="a", requires_grad=True)
        tape = Tape()
        loss = reduce_sum(add(mul(a, a, tape), a, tape), tape)
        grads = reverse_pass(tape, loss, wrt=[a])
        np.testing.assert_allclose(grads["a"], 2 * a.value + 1)

    def test_empty_tape_gives_zero_gradients(self):
        a = Variable(np.ones((2, 2)), name="a", requires_grad=True)
        grads = reverse_pass(Tape(), constant(np.asarray(0.0)), wrt=[a])
        np.testing.assert_array_equal(grads["a"], np.zeros((2, 2)))

    def test_constants_do_not_collect_gradients(self):
        a = Variable(np.ones(3), name="a", requires_grad=True)
        c = Variable(np.full(3, 2.0), name="c", requires_grad=False)
        tape = Tape()
        loss = reduce_sum(mul(a, c, tape), tape)
        grads = reverse_pass(tape, loss, wrt=[a, c])
        np.testing.assert_array_equal(grads["a"], c.value)
        np.testing.assert_array_equal(grads["c"], np.zeros(3))

    def test_default_wrt_lists_named_trainables(self):
        a = Variable(np.ones(3), name="a", requires_grad=True)
        tape = Tape()
        loss = reduce_sum(scale(a, 3.0, tape), tape)
        assert set(reverse_pass(tape, loss)) == {"a"}

    def test_unnamed_wrt_is_rejected(self):
        a = Variable(np.ones(3), requires_grad=True)
        tape = Tape()
        loss = reduce_sum(a, tape)
        with pytest.raises(ValueError):
            reverse_pass(tape, loss, wrt=[a])

    def test_no_tape_records_nothing(self):
        a = Variable(np.ones(3), name="a", requires_grad=True)
        out = add(a, a)
        np.testing.assert_array_equal(out.value, [2.0, 2.0, 2.0])


def _gru_params(rng, c_in, depth, k_in, k_hidden):
    names = {}
    for gate in ("w", "w_z", "w_r"):
        names[gate] = _var(rng, (k_in, k_in, c_in, depth), f"gru/{gate}", spread=0.4)
    for gate in ("u", "u_z", "u_r"):
        names[gate] = _var(rng, (k_hidden, k_hidden, depth, depth), f"gru/{gate}", spread=0.4)
    for gate in ("b", "b_z", "b_r"):
        names[gate] = _var(rng, (depth,), f"gru/{gate}", spread=0.2)
    return GruParams(**names)


class TestConvGru:

    @pytest.mark.parametrize("k_hidden", [1, 3])
    @pytest.mark.parametrize("stride", [1, 2])
    def test_gradients(self, k_hidden, stride):
        rng = np.random.default_rng(20 + k_hidden + stride)
        params = _gru_params(rng, 2, 3, 3, k_hidden)
        x = _var(rng, (1, 4, 4, 2), "x")
        h = _var(rng, (1, 4 // stride, 4 // stride, 3), "h", spread=0.5)
        inputs = [x, h] + list(params.variables())
        check_gradients(lambda tape: gru_step(x, h, params, stride, tape), inputs)

    def test_zero_update_gate_keeps_state(self):
        rng = np.random.default_rng(30)
        params = _gru_params(rng, 2, 3, 3, 1)
        for gate in ("w_z", "u_z"):
            getattr(params, gate).value[...] = 0.0
        params.b_z.value[...] = -50.0
        x = constant(rng.normal(size=(1, 4, 4, 2)))
        h = constant(rng.normal(size=(1, 4, 4, 3)))
        np.testing.assert_allclose(gru_step(x, h, params).value, h.value, atol=1e-12)

    def test_zero_parameters_halve_state(self):
        rng = np.random.default_rng(34)
        params = _gru_params(rng, 2, 3, 3, 3)
        for var in params.variables():
            var.value[...] = 0.0
        x = constant(rng.normal(size=(1, 4, 4, 2)))
        h = constant(rng.normal(size=(1, 4, 4, 3)))
        # z = 1/2 and the candidate is tanh(0) = 0
        np.testing.assert_allclose(gru_step(x, h, params).value, 0.5 * h.value, atol=1e-15)

    def test_matches_gate_equations(self):
        rng = np.random.default_rng(31)
        params = _gru_params(rng, 2, 3, 1, 1)
        x = rng.normal(size=(1, 2, 2, 2))
        h = rng.normal(size=(1, 2, 2, 3))

        def lin(a, w):
            return np.einsum("bhwc,cd->bhwd", a, w.value[0, 0])

        def sig(v):
            return 1 / (1 + np.exp(-v))

        z = sig(lin(x, params.w_z) + lin(h, params.u_z) + params.b_z.value)
        r = sig(lin(x, params.w_r) + lin(h, params.u_r) + params.b_r.value)
        cand = np.tanh(lin(x, params.w) + lin(r * h, params.u) + params.b.value)
        expected = (1 - z) * h + z * cand
        out = gru_step(constant(x), constant(h), params).value
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=1e-12)

    def test_misaligned_state_is_rejected(self):
        rng = np.random.default_rng(32)
        params = _gru_params(rng, 2, 3, 3, 1)
        x = constant(np.zeros((1, 4, 4, 2)))
        with pytest.raises(ShapeError):
            gru_step(x, zero_state(1, 4, 4, 3), params, stride=2)
        with pytest.raises(ShapeError):
            gru_step(x, zero_state(1, 4, 4, 5), params)

    def test_params_validate_shapes(self):
        rng = np.random.default_rng(33)
        params = _gru_params(rng, 2, 3, 3, 1)
        fields = {f: getattr(params, f) for f in ("w", "w_z", "w_r", "u", "u_z", "u_r",
                                                  "b", "b_z", "b_r")}
        fields["b_r"] = Variable(np.zeros(4), name="gru/b_r")
        with pytest.raises(ShapeError):
            GruParams(**fields)
