"""Tensor-engine kernels: hand oracles, finite-difference checks, graph contracts."""

import numpy as np
import pytest

from tvlm import grad_check
from tvlm.errors import ContractError, DomainError, NumericsError, ShapeError
from tvlm.tensor import (
    Tensor,
    backward,
    bilinear_resize,
    concat,
    conv1d,
    conv2d,
    dropout,
    gelu,
    layer_norm,
    matmul,
    mul,
    narrow,
    repeat0,
    reshape,
    set_finite_checks,
    sigmoid,
    softmax,
    tmean,
    trace,
    transpose,
    tsum,
)


# ---------------------------------------------------------------- matmul


def test_matmul_identity():
    b = Tensor(np.arange(12, dtype=float).reshape(3, 4))
    out = matmul(Tensor(np.eye(3)), b)
    np.testing.assert_array_equal(out.data, b.data)


def test_matmul_hand_case():
    out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
    np.testing.assert_allclose(out.data, [[3.0], [7.0]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 2))))


def test_matmul_grad_of_sum_is_ones_times_bt():
    rng = np.random.default_rng(0)
    a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal((4, 2)))
    loss = tsum(matmul(a, b))
    backward(loss)
    np.testing.assert_allclose(a.grad, np.ones((3, 2)) @ b.data.T)


def test_matmul_finite_difference():
    rng = np.random.default_rng(1)
    a = Tensor(rng.standard_normal((3, 4)))
    b = Tensor(rng.standard_normal((4, 2)))
    assert grad_check(matmul, [a, b]) < 1e-5


def test_matmul_batched_broadcast():
    rng = np.random.default_rng(2)
    a = Tensor(rng.standard_normal((5, 3, 4)))
    b = Tensor(rng.standard_normal((4, 2)))
    out = matmul(a, b)
    assert out.shape == (5, 3, 2)
    assert grad_check(matmul, [a, b]) < 1e-5


# ---------------------------------------------------------------- softmax


def test_softmax_uniform():
    out = softmax(Tensor([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(out.data, np.full(3, 1 / 3))


def test_softmax_large_input_stable():
    out = softmax(Tensor([1000.0, 0.0]))
    np.testing.assert_allclose(out.data, [1.0, 0.0], atol=1e-12)


def test_softmax_rows_sum_to_one_extreme_magnitudes():
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = Tensor(rng.uniform(-1e4, 1e4, size=(4, 7)))
        out = softmax(x, axis=-1)
        assert np.all(out.data >= 0)
        np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-9)


def test_softmax_finite_difference():
    rng = np.random.default_rng(4)
    x = Tensor(rng.standard_normal(6))
    assert grad_check(lambda t: softmax(t, axis=-1), [x]) < 1e-5


# ---------------------------------------------------------------- layer norm


def test_layer_norm_constant_row_is_zero():
    out = layer_norm(Tensor([[5.0, 5.0, 5.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
    np.testing.assert_allclose(out.data, 0.0, atol=1e-9)


def test_layer_norm_two_point_row():
    # population variance of [1, 3] is 1 -> normalized to [-1, 1]
    out = layer_norm(Tensor([1.0, 3.0]), Tensor(np.ones(2)), Tensor(np.zeros(2)))
    np.testing.assert_allclose(out.data, [-1.0, 1.0], atol=1e-4)


def test_layer_norm_finite_difference():
    rng = np.random.default_rng(5)
    x = Tensor(rng.standard_normal((2, 5)))
    g = Tensor(rng.standard_normal(5))
    b = Tensor(rng.standard_normal(5))
    assert grad_check(layer_norm, [x, g, b]) < 1e-5


# ---------------------------------------------------------------- conv


def test_conv2d_1x1_kernel_sums_channels():
    rng = np.random.default_rng(6)
    x = Tensor(rng.standard_normal((2, 3, 4, 5)))
    k = Tensor(np.ones((1, 3, 1, 1)))
    out = conv2d(x, k)
    np.testing.assert_allclose(out.data, x.data.sum(axis=1, keepdims=True))


def test_conv2d_all_ones_3x3():
    out = conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))))
    assert out.shape == (1, 1, 1, 1)
    np.testing.assert_allclose(out.data, 9.0)


def test_conv2d_kernel_too_large():
    with pytest.raises(ShapeError):
        conv2d(Tensor(np.ones((1, 1, 2, 2))), Tensor(np.ones((1, 1, 3, 3))))


def test_conv2d_output_shape_stride_padding():
    x = Tensor(np.zeros((1, 1, 5, 7)))
    k = Tensor(np.zeros((2, 1, 3, 3)))
    out = conv2d(x, k, stride=2, padding=1)
    # h' = (5+2-3)//2+1 = 3, w' = (7+2-3)//2+1 = 4
    assert out.shape == (1, 2, 3, 4)


def test_conv2d_matches_channel_matmul_oracle():
    # 1x1 kernels at stride 1/pad 0 are a pure channel mixing
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 4, 3, 3))
    k = rng.standard_normal((5, 4, 1, 1))
    out = conv2d(Tensor(x), Tensor(k))
    mixed = np.einsum("bchw,oc->bohw", x, k[:, :, 0, 0])
    np.testing.assert_allclose(out.data, mixed, atol=1e-12)


def test_conv2d_finite_difference():
    rng = np.random.default_rng(8)
    x = Tensor(rng.standard_normal((1, 2, 5, 5)))
    k = Tensor(rng.standard_normal((3, 2, 3, 3)))
    assert grad_check(lambda a, b: conv2d(a, b, stride=1, padding=1), [x, k]) < 1e-5


def test_conv1d_matches_manual_cross_correlation():
    x = np.array([[[1.0, 2.0, 3.0, 4.0]]])
    k = np.array([[[1.0, 0.0, -1.0]]])
    out = conv1d(Tensor(x), Tensor(k))
    np.testing.assert_allclose(out.data, [[[1 - 3, 2 - 4]]])


def test_conv1d_finite_difference():
    rng = np.random.default_rng(9)
    x = Tensor(rng.standard_normal((2, 3, 8)))
    k = Tensor(rng.standard_normal((4, 3, 3)))
    assert grad_check(lambda a, b: conv1d(a, b, padding=1), [x, k]) < 1e-5


# ---------------------------------------------------------------- bilinear


def test_bilinear_identity_is_bit_exact():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((1, 2, 4, 6))
    out = bilinear_resize(Tensor(x), 4, 6)
    assert np.array_equal(out.data, x)


def test_bilinear_2x2_to_3x3_hand_values():
    x = Tensor(np.array([[[[0.0, 1.0], [2.0, 3.0]]]]))
    out = bilinear_resize(x, 3, 3)
    expected = np.array([[[[0.0, 0.5, 1.0], [1.0, 1.5, 2.0], [2.0, 2.5, 3.0]]]])
    np.testing.assert_allclose(out.data, expected)
    assert out.data[0, 0, 1, 1] == pytest.approx(1.5)


def test_bilinear_exact_at_source_grid_points():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((1, 1, 3, 5))
    out = bilinear_resize(Tensor(x), 5, 9)  # odd upsampling keeps grid points
    np.testing.assert_allclose(out.data[0, 0, ::2, ::2], x[0, 0], atol=1e-12)


def test_bilinear_zero_output_size_rejected():
    with pytest.raises(DomainError):
        bilinear_resize(Tensor(np.zeros((1, 1, 2, 2))), 0, 3)


def test_bilinear_finite_difference():
    rng = np.random.default_rng(12)
    x = Tensor(rng.standard_normal((1, 2, 3, 4)))
    assert grad_check(lambda t: bilinear_resize(t, 5, 6), [x]) < 1e-5


# ---------------------------------------------------------------- backward


def test_backward_sum_gives_ones():
    x = Tensor(np.arange(6, dtype=float).reshape(2, 3), requires_grad=True)
    backward(tsum(x))
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))


def test_backward_sum_of_squares_gives_2x():
    x = Tensor(np.arange(5, dtype=float), requires_grad=True)
    backward(tsum(mul(x, x)))
    np.testing.assert_allclose(x.grad, 2 * x.data)


def test_backward_rejects_non_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        backward(mul(x, x))


def test_backward_skips_non_grad_leaves():
    a = Tensor(np.ones(3), requires_grad=True)
    b = Tensor(np.ones(3))
    grads = backward(tsum(mul(a, b)))
    assert a.node_id in grads
    assert b.node_id not in grads and b.grad is None


def test_backward_accumulates_shared_nodes():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = mul(x, x)
    loss = tsum(y + y)
    backward(loss)
    np.testing.assert_allclose(x.grad, [8.0])


def test_trace_is_topologically_ordered():
    x = Tensor(np.ones(3), requires_grad=True)
    y = mul(x, x)
    loss = tsum(y + y)
    order = trace(loss)
    pos = {node.node_id: i for i, node in enumerate(order)}
    for node in order:
        for parent in node.parents:
            assert pos[parent.node_id] < pos[node.node_id]


def test_gradient_shapes_match_leaves():
    rng = np.random.default_rng(13)
    a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    b = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
    backward(tsum(matmul(a, b)))
    assert a.grad.shape == a.shape and b.grad.shape == b.shape


# ---------------------------------------------------------------- misc ops


def test_structural_ops_finite_difference():
    rng = np.random.default_rng(14)
    x = Tensor(rng.standard_normal((3, 4)))
    assert grad_check(lambda t: reshape(t, (2, 6)), [x]) < 1e-9
    assert grad_check(lambda t: transpose(t), [x]) < 1e-9
    assert grad_check(lambda t: narrow(t, 1, 1, 2), [x]) < 1e-9
    assert grad_check(lambda t: repeat0(t, 3), [x]) < 1e-9
    y = Tensor(rng.standard_normal((3, 2)))
    assert grad_check(lambda a, b: concat([a, b], axis=1), [x, y]) < 1e-9


def test_activation_finite_difference():
    rng = np.random.default_rng(15)
    x = Tensor(rng.standard_normal(9))
    assert grad_check(sigmoid, [x]) < 1e-5
    assert grad_check(gelu, [x]) < 1e-5
    assert grad_check(lambda t: tmean(t), [x]) < 1e-9


def test_dropout_eval_mode_is_identity():
    x = Tensor(np.arange(4.0))
    assert dropout(x, 0.5, None) is x
    assert dropout(x, 0.0, np.random.default_rng(0)) is x


def test_dropout_scales_kept_values():
    rng = np.random.default_rng(16)
    x = Tensor(np.ones(1000))
    out = dropout(x, 0.25, rng)
    kept = out.data[out.data > 0]
    np.testing.assert_allclose(kept, 1.0 / 0.75)


def test_finite_check_catches_overflow():
    x = Tensor(np.array([1e308]))
    with np.errstate(over="ignore"), pytest.raises(NumericsError):
        mul(x, x)


def test_finite_check_can_be_disabled():
    old = set_finite_checks(False)
    try:
        with np.errstate(over="ignore"):
            out = mul(Tensor(np.array([1e308])), Tensor(np.array([1e308])))
        assert np.isinf(out.data[0])
    finally:
        set_finite_checks(old)


# ---------------------------------------------------------------- grad_check harness


def test_grad_check_linear_map_near_exact():
    rng = np.random.default_rng(17)
    w = Tensor(rng.standard_normal((4, 3)))
    x = Tensor(rng.standard_normal((2, 4)))
    assert grad_check(lambda a: matmul(a, w), [x]) < 1e-9


def test_grad_check_randomized_kernel_sweep():
    # every differentiable kernel across 20 seeds and varied shapes
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        m, k, n = rng.integers(1, 5, size=3)
        a = Tensor(rng.standard_normal((m, k)))
        b = Tensor(rng.standard_normal((k, n)))
        assert grad_check(matmul, [a, b], seed=seed) < 1e-5
        v = Tensor(rng.standard_normal(int(rng.integers(2, 7))))
        assert grad_check(lambda t: softmax(t, axis=-1), [v], seed=seed) < 1e-5
        assert grad_check(sigmoid, [v], seed=seed) < 1e-5
        assert grad_check(gelu, [v], seed=seed) < 1e-5
        d = int(rng.integers(2, 6))
        x = Tensor(rng.standard_normal((2, d)))
        gain = Tensor(rng.standard_normal(d))
        bias = Tensor(rng.standard_normal(d))
        assert grad_check(layer_norm, [x, gain, bias], seed=seed) < 1e-5
