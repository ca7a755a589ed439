"""
Unit tests for src/tensorcore/

Covers:
- Tensor construction and gradient buffers
- Tape recording, backward policy and accumulation
- graph contractions (loop oracles, linearity, factorization identity)
- linear_channels, prelu, batch_norm, conv2d, elementwise ops
"""

import numpy as np
import pytest

from errors import ShapeError, TapeError
from model.encoder import full_from_separable
from tensorcore.gradcheck import grad_check
from tensorcore.ops import (
    RunningStats,
    absolute,
    add,
    batch_norm,
    constant,
    contract_full,
    contract_space,
    contract_time,
    conv2d,
    joint_norm,
    linear_channels,
    mean_all,
    parameter,
    permute,
    prelu,
    scale,
    sub,
    sum_all,
)
from tensorcore.tensor import Tape, Tensor, backward


def _smooth_loss(t: Tensor) -> Tensor:
    return sum_all(joint_norm(t, axis=1))


# ---------------------------------------------------------------------------
# Tensor
# ---------------------------------------------------------------------------

class TestTensor:
    def test_zero_extent_rejected(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((2, 0, 3)))

    def test_integer_data_becomes_float(self):
        assert Tensor([1, 2, 3]).dtype == np.float64

    def test_grad_buffer_only_when_requested(self):
        assert Tensor(np.ones((2, 2))).grad is None
        p = parameter(np.ones((2, 2)))
        assert p.grad.shape == (2, 2)
        assert np.all(p.grad == 0)

    def test_parameter_copies_its_input(self):
        source = np.ones(3)
        p = parameter(source)
        p.data[0] = 5.0
        assert source[0] == 1.0

    def test_item_needs_single_element(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones(2)).item()


# ---------------------------------------------------------------------------
# Tape
# ---------------------------------------------------------------------------

class TestTape:
    def test_ops_outside_a_tape_do_not_record(self):
        h = parameter(np.ones((2, 2)))
        out = add(h, h)
        assert out.requires_grad is False

    def test_constants_only_do_not_record(self):
        with Tape() as tape:
            add(constant(np.ones(2)), constant(np.ones(2)))
        assert len(tape) == 0

    def test_records_in_execution_order(self):
        a, b = parameter(np.ones(3)), parameter(np.ones(3))
        with Tape() as tape:
            y = sub(add(a, b), b)
            sum_all(y)
        assert tape.operations == ["add", "sub", "sum"]

    def test_sum_gradient_is_all_ones(self, rng):
        h = parameter(rng.normal(size=(2, 3, 4, 5)))
        with Tape() as tape:
            loss = sum_all(h)
        tape.backward(loss)
        np.testing.assert_array_equal(h.grad, np.ones((2, 3, 4, 5)))

    def test_prelu_gradient_on_negative_input(self, rng):
        h = parameter(-rng.uniform(0.5, 2.0, size=(2, 3)))
        slope = parameter(np.array([0.25]))
        with Tape() as tape:
            loss = sum_all(prelu(h, slope))
        tape.backward(loss)
        np.testing.assert_allclose(h.grad, np.full((2, 3), 0.25))
        np.testing.assert_allclose(slope.grad, [h.data.sum()])

    def test_second_backward_rejected(self):
        h = parameter(np.ones(4))
        with Tape() as tape:
            loss = sum_all(h)
        tape.backward(loss)
        with pytest.raises(TapeError, match="empty tape"):
            tape.backward(loss)
        with pytest.raises(TapeError, match="empty tape"):
            backward(loss)

    def test_backward_needs_scalar_loss(self):
        h = parameter(np.ones(4))
        with Tape() as tape:
            out = add(h, h)
        with pytest.raises(TapeError, match="scalar"):
            tape.backward(out)

    def test_backward_on_empty_tape(self):
        with pytest.raises(TapeError, match="empty tape"):
            Tape().backward(Tensor(1.0))

    def test_gradients_accumulate_until_zeroed(self):
        h = parameter(np.ones(3))
        for _ in range(2):
            with Tape() as tape:
                loss = sum_all(h)
            tape.backward(loss)
        np.testing.assert_array_equal(h.grad, [2.0, 2.0, 2.0])
        h.zero_grad()
        np.testing.assert_array_equal(h.grad, [0.0, 0.0, 0.0])

    def test_shared_input_gradients_sum(self):
        h = parameter(np.array([1.0, -2.0]))
        with Tape() as tape:
            loss = sum_all(add(h, h))
        tape.backward(loss)
        np.testing.assert_array_equal(h.grad, [2.0, 2.0])


# ---------------------------------------------------------------------------
# Contractions
# ---------------------------------------------------------------------------

class TestContractTime:
    def test_identity(self):
        At = Tensor(np.eye(2)[None])
        H = Tensor(np.array([1.0, 2.0]).reshape(1, 1, 1, 2))
        np.testing.assert_array_equal(contract_time(At, H).data.reshape(-1), [1.0, 2.0])

    def test_hand_computed(self):
        At = Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        H = Tensor(np.array([1.0, 2.0]).reshape(1, 1, 1, 2))
        np.testing.assert_array_equal(contract_time(At, H).data.reshape(-1), [5.0, 11.0])

    def test_zero_adjacency(self, rng):
        out = contract_time(Tensor(np.zeros((3, 4, 4))), Tensor(rng.normal(size=(2, 2, 3, 4))))
        assert np.all(out.data == 0)

    def test_loop_oracle(self, rng):
        At = rng.integers(-3, 4, size=(3, 4, 4)).astype(float)
        H = rng.integers(-3, 4, size=(2, 2, 3, 4)).astype(float)
        expected = np.zeros_like(H)
        for b in range(2):
            for c in range(2):
                for v in range(3):
                    for k in range(4):
                        expected[b, c, v, k] = sum(At[v, k, m] * H[b, c, v, m] for m in range(4))
        np.testing.assert_array_equal(contract_time(Tensor(At), Tensor(H)).data, expected)

    def test_frame_mismatch_names_axis(self):
        with pytest.raises(ShapeError) as exc:
            contract_time(Tensor(np.ones((3, 4, 4))), Tensor(np.ones((1, 1, 3, 5))))
        assert exc.value.axis == "T"

    def test_joint_mismatch_names_axis(self):
        with pytest.raises(ShapeError) as exc:
            contract_time(Tensor(np.ones((2, 4, 4))), Tensor(np.ones((1, 1, 3, 4))))
        assert exc.value.axis == "V"


class TestContractSpace:
    def test_identity(self, rng):
        H = rng.normal(size=(2, 3, 4, 5))
        As = np.broadcast_to(np.eye(4), (5, 4, 4)).copy()
        np.testing.assert_array_equal(contract_space(Tensor(As), Tensor(H)).data, H)

    def test_swap(self):
        As = Tensor(np.array([[[0.0, 1.0], [1.0, 0.0]]]))
        Ht = Tensor(np.array([3.0, 7.0]).reshape(1, 1, 2, 1))
        np.testing.assert_array_equal(contract_space(As, Ht).data.reshape(-1), [7.0, 3.0])

    def test_loop_oracle(self, rng):
        As = rng.integers(-3, 4, size=(2, 2, 2)).astype(float)
        Ht = rng.integers(-3, 4, size=(1, 2, 2, 2)).astype(float)
        expected = np.zeros_like(Ht)
        for c in range(2):
            for w in range(2):
                for k in range(2):
                    expected[0, c, w, k] = sum(As[k, w, v] * Ht[0, c, v, k] for v in range(2))
        np.testing.assert_array_equal(contract_space(Tensor(As), Tensor(Ht)).data, expected)


class TestContractFull:
    def test_flattened_identity(self, rng):
        V, T = 3, 4
        Ast = np.eye(V * T).reshape(V, T, V, T)
        H = rng.normal(size=(2, 2, V, T))
        np.testing.assert_allclose(contract_full(Tensor(Ast), Tensor(H)).data, H, atol=1e-15)

    def test_loop_oracle(self, rng):
        Ast = rng.integers(-3, 4, size=(2, 2, 2, 2)).astype(float)
        H = rng.integers(-3, 4, size=(1, 1, 2, 2)).astype(float)
        expected = np.zeros_like(H)
        for w in range(2):
            for k in range(2):
                expected[0, 0, w, k] = sum(
                    Ast[w, k, v, m] * H[0, 0, v, m] for v in range(2) for m in range(2)
                )
        np.testing.assert_array_equal(contract_full(Tensor(Ast), Tensor(H)).data, expected)

    def test_factorization_identity(self, rng):
        for _ in range(100):
            V, T = rng.integers(1, 5, size=2)
            B, C = rng.integers(1, 4, size=2)
            As = rng.normal(size=(T, V, V))
            At = rng.normal(size=(V, T, T))
            H = Tensor(rng.normal(size=(B, C, V, T)))
            separable = contract_space(Tensor(As), contract_time(Tensor(At), H)).data
            full = contract_full(Tensor(full_from_separable(As, At)), H).data
            assert np.max(np.abs(separable - full)) <= 1e-10

    def test_contractions_are_linear(self, rng):
        V, T = 3, 4
        At, As, Ast = rng.normal(size=(V, T, T)), rng.normal(size=(T, V, V)), rng.normal(size=(V, T, V, T))
        H1, H2 = rng.normal(size=(2, 2, V, T)), rng.normal(size=(2, 2, V, T))
        a, b = 1.7, -0.3
        for op, adj in ((contract_time, At), (contract_space, As), (contract_full, Ast)):
            lhs = op(Tensor(adj), Tensor(a * H1 + b * H2)).data
            rhs = a * op(Tensor(adj), Tensor(H1)).data + b * op(Tensor(adj), Tensor(H2)).data
            assert np.max(np.abs(lhs - rhs)) <= 1e-10

    @pytest.mark.parametrize("op,adj_shape", [
        (contract_time, (3, 4, 4)),
        (contract_space, (4, 3, 3)),
        (contract_full, (3, 4, 3, 4)),
    ])
    def test_gradients_match_finite_differences(self, rng, op, adj_shape):
        adj = parameter(rng.normal(size=adj_shape))
        H = parameter(rng.normal(size=(2, 3, 3, 4)))
        assert grad_check(lambda: _smooth_loss(op(adj, H)), [adj, H]) < 1e-4


# ---------------------------------------------------------------------------
# Channel projection, activation, normalization, convolution
# ---------------------------------------------------------------------------

class TestLinearChannels:
    def test_identity(self, rng):
        H = rng.normal(size=(2, 3, 4, 5))
        np.testing.assert_allclose(linear_channels(Tensor(H), Tensor(np.eye(3))).data, H)

    def test_channel_sum(self):
        H = Tensor(np.array([3.0, 4.0]).reshape(1, 2, 1, 1))
        assert linear_channels(H, Tensor(np.array([[1.0], [1.0]]))).data.item() == 7.0

    def test_loop_oracle(self, rng):
        H = rng.normal(size=(2, 3, 2, 2))
        W = rng.normal(size=(3, 5))
        expected = np.zeros((2, 5, 2, 2))
        for b in range(2):
            for o in range(5):
                for v in range(2):
                    for t in range(2):
                        expected[b, o, v, t] = sum(H[b, c, v, t] * W[c, o] for c in range(3))
        np.testing.assert_allclose(linear_channels(Tensor(H), Tensor(W)).data, expected, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError) as exc:
            linear_channels(Tensor(np.ones((1, 3, 2, 2))), Tensor(np.ones((4, 2))))
        assert exc.value.axis == "C"

    def test_gradients(self, rng):
        H, W = parameter(rng.normal(size=(2, 3, 2, 4))), parameter(rng.normal(size=(3, 5)))
        assert grad_check(lambda: _smooth_loss(linear_channels(H, W)), [H, W]) < 1e-4


class TestPrelu:
    def test_definition(self):
        out = prelu(Tensor(np.array([-4.0, 4.0])), Tensor(np.array([0.25])))
        np.testing.assert_array_equal(out.data, [-1.0, 4.0])

    def test_slope_must_be_scalar(self):
        with pytest.raises(ShapeError):
            prelu(Tensor(np.ones(3)), Tensor(np.ones(2)))

    def test_gradients(self, rng):
        H = parameter(rng.normal(size=(2, 3, 4, 2)))
        slope = parameter(np.array([0.3]))
        assert grad_check(lambda: _smooth_loss(prelu(H, slope)), [H, slope]) < 1e-4


class TestBatchNorm:
    def _params(self, channels):
        return parameter(np.full(channels, 1.5)), parameter(np.full(channels, -0.5)), RunningStats.fresh(channels)

    def test_train_mode_output_statistics(self, rng):
        gamma, beta, stats = self._params(4)
        H = Tensor(rng.normal(2.0, 3.0, size=(8, 4, 5, 6)))
        out = batch_norm(H, gamma, beta, stats, train_mode=True).data
        np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), np.full(4, -0.5), atol=1e-4)
        np.testing.assert_allclose(out.std(axis=(0, 2, 3)), np.full(4, 1.5), atol=1e-4)

    def test_running_stats_update(self, rng):
        gamma, beta, stats = self._params(2)
        x = rng.normal(1.0, 2.0, size=(4, 2, 3, 3))
        batch_norm(Tensor(x), gamma, beta, stats, train_mode=True)
        n = x.size // 2
        np.testing.assert_allclose(stats.mean, 0.1 * x.mean(axis=(0, 2, 3)))
        np.testing.assert_allclose(stats.var, 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * n / (n - 1))

    def test_eval_mode_has_no_batch_coupling(self, rng):
        gamma, beta, stats = self._params(3)
        stats.mean[:] = [0.5, -1.0, 2.0]
        stats.var[:] = [1.0, 4.0, 0.25]
        H = rng.normal(size=(5, 3, 2, 2))
        whole = batch_norm(Tensor(H), gamma, beta, stats, train_mode=False).data
        single = batch_norm(Tensor(H[2:3]), gamma, beta, stats, train_mode=False).data
        np.testing.assert_array_equal(whole[2:3], single)

    def test_eval_mode_leaves_stats_alone(self, rng):
        gamma, beta, stats = self._params(3)
        batch_norm(Tensor(rng.normal(size=(2, 3, 2, 2))), gamma, beta, stats, train_mode=False)
        np.testing.assert_array_equal(stats.mean, np.zeros(3))
        np.testing.assert_array_equal(stats.var, np.ones(3))

    @pytest.mark.parametrize("train_mode", [True, False])
    def test_gradients(self, rng, train_mode):
        gamma = parameter(rng.uniform(0.5, 1.5, size=3))
        beta = parameter(rng.normal(size=3))
        H = parameter(rng.normal(size=(4, 3, 2, 3)))

        def model_fn():
            # fresh stats each call so finite differences see the same function
            return _smooth_loss(batch_norm(H, gamma, beta, RunningStats.fresh(3), train_mode))

        assert grad_check(model_fn, [H, gamma, beta]) < 1e-4


class TestConv2d:
    def test_zero_kernel_and_bias(self, rng):
        out = conv2d(Tensor(rng.normal(size=(2, 3, 4, 5))), Tensor(np.zeros((2, 3, 3, 3))), Tensor(np.zeros(2)))
        assert out.shape == (2, 2, 4, 5)
        assert np.all(out.data == 0)

    def test_loop_oracle_with_unit_padding(self, rng):
        x = rng.normal(size=(1, 2, 3, 4))
        k = rng.normal(size=(2, 2, 3, 3))
        b = rng.normal(size=2)
        padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        expected = np.zeros((1, 2, 3, 4))
        for o in range(2):
            for p in range(3):
                for q in range(4):
                    expected[0, o, p, q] = b[o] + np.sum(padded[0, :, p:p + 3, q:q + 3] * k[o])
        out = conv2d(Tensor(x), Tensor(k), Tensor(b)).data
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError):
            conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 2, 2))), Tensor(np.zeros(1)))

    def test_gradients(self, rng):
        x = parameter(rng.normal(size=(2, 3, 3, 4)))
        k = parameter(rng.normal(size=(2, 3, 3, 3)))
        b = parameter(rng.normal(size=2))
        assert grad_check(lambda: _smooth_loss(conv2d(x, k, b)), [x, k, b]) < 1e-4


class TestElementwise:
    def test_add_shape_mismatch(self):
        with pytest.raises(ShapeError):
            add(Tensor(np.ones(2)), Tensor(np.ones(3)))

    def test_joint_norm_three_four_five(self):
        H = Tensor(np.array([3.0, 0.0, 4.0]).reshape(1, 3, 1, 1))
        assert joint_norm(H, axis=1).data.item() == 5.0

    def test_joint_norm_zero_subgradient(self):
        h = parameter(np.zeros((1, 3, 2, 1)))
        with Tape() as tape:
            loss = sum_all(joint_norm(h, axis=1))
        tape.backward(loss)
        assert np.all(h.grad == 0)

    def test_permute_round_trip_and_gradient(self, rng):
        h = parameter(rng.normal(size=(2, 3, 4, 5)))
        out = permute(h, (0, 3, 1, 2))
        assert out.shape == (2, 5, 3, 4)
        np.testing.assert_array_equal(permute(out, (0, 2, 3, 1)).data, h.data)
        assert grad_check(lambda: _smooth_loss(permute(h, (0, 3, 1, 2))), [h]) < 1e-4

    def test_permute_rejects_non_permutation(self):
        with pytest.raises(ShapeError):
            permute(Tensor(np.ones((2, 2))), (0, 0))

    def test_reductions_and_scale(self, rng):
        h = parameter(rng.normal(size=(3, 4)))
        assert mean_all(h).item() == pytest.approx(h.data.mean())
        assert sum_all(scale(h, 2.0)).item() == pytest.approx(2.0 * h.data.sum())
        assert grad_check(lambda: mean_all(absolute(scale(h, -3.0))), [h]) < 1e-4
