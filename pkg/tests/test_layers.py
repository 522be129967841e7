import numpy as np
import pytest

from trisim import layers
from trisim.arrays import finite_difference_gradient, max_relative_error


def test_conv_all_ones_dot_product():
    x = np.ones((1, 5, 5))
    w = np.ones((1, 1, 5, 5))
    y, _ = layers.conv_forward(x, w, np.zeros(1))
    assert y.shape == (1, 1, 1)
    assert y[0, 0, 0] == 25.0


def test_conv_zero_kernel_gives_constant_bias():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, (3, 9, 9))
    w = np.zeros((2, 3, 5, 5))
    b = np.array([1.5, -2.0])
    y, _ = layers.conv_forward(x, w, b)
    assert np.array_equal(y[0], np.full((5, 5), 1.5))
    assert np.array_equal(y[1], np.full((5, 5), -2.0))


def test_conv_first_layer_shape():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 1, (1, 28, 28))
    w = rng.normal(0, 0.1, (20, 1, 5, 5))
    y, _ = layers.conv_forward(x, w, np.zeros(20))
    assert y.shape == (20, 24, 24)  # 28 - 5 + 1


def test_conv_shape_errors():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        layers.conv_forward(rng.normal(size=(2, 8, 8)),
                            rng.normal(size=(4, 3, 5, 5)), np.zeros(4))
    with pytest.raises(ValueError):
        layers.conv_forward(rng.normal(size=(1, 4, 4)),
                            rng.normal(size=(4, 1, 5, 5)), np.zeros(4))
    with pytest.raises(ValueError):
        layers.conv_forward(rng.normal(size=(1, 8, 8)),
                            rng.normal(size=(4, 1, 5, 5)), np.zeros(3))


def test_conv_backward_zero_upstream():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 8, 8))
    w = rng.normal(size=(3, 2, 5, 5))
    y, cache = layers.conv_forward(x, w, np.zeros(3))
    gx, gw, gb = layers.conv_backward(cache, np.zeros_like(y))
    assert not gx.any() and not gw.any() and not gb.any()


def test_conv_backward_single_element_weight_grad_is_input_patch():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(1, 7, 7))
    w = rng.normal(size=(1, 1, 5, 5))
    y, cache = layers.conv_forward(x, w, np.zeros(1))
    gy = np.zeros_like(y)
    gy[0, 1, 2] = 1.0
    _, gw, gb = layers.conv_backward(cache, gy)
    assert np.allclose(gw[0, 0], x[0, 1:6, 2:7], atol=1e-15)
    assert gb[0] == 1.0


def test_conv_backward_missing_cache():
    with pytest.raises(ValueError):
        layers.conv_backward(None, np.zeros((1, 1, 1)))


def _scalarize(y, proj):
    return float(np.sum(y * proj))


def test_conv_gradients_match_oracle():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2, 8, 8))
    w = rng.normal(size=(3, 2, 5, 5)) * 0.5
    b = rng.normal(size=3)
    y, cache = layers.conv_forward(x, w, b)
    proj = rng.normal(size=y.shape)
    gx, gw, gb = layers.conv_backward(cache, proj)
    fd_x = finite_difference_gradient(
        lambda v: _scalarize(layers.conv_forward(v, w, b)[0], proj), x, eps=1e-6)
    fd_w = finite_difference_gradient(
        lambda v: _scalarize(layers.conv_forward(x, v, b)[0], proj), w, eps=1e-6)
    fd_b = finite_difference_gradient(
        lambda v: _scalarize(layers.conv_forward(x, w, v)[0], proj), b, eps=1e-6)
    assert max_relative_error(gx, fd_x) < 1e-5
    assert max_relative_error(gw, fd_w) < 1e-5
    assert max_relative_error(gb, fd_b) < 1e-5


def test_conv_linearity_in_input():
    rng = np.random.default_rng(6)
    w = rng.normal(size=(2, 1, 5, 5))
    b = np.zeros(2)
    x1 = rng.normal(size=(1, 9, 9))
    x2 = rng.normal(size=(1, 9, 9))
    alpha, beta = 1.7, -0.3
    lhs, _ = layers.conv_forward(alpha * x1 + beta * x2, w, b)
    y1, _ = layers.conv_forward(x1, w, b)
    y2, _ = layers.conv_forward(x2, w, b)
    assert np.max(np.abs(lhs - (alpha * y1 + beta * y2))) < 1e-10


def test_maxpool_basic():
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    y, argmax = layers.maxpool_forward(x)
    assert y[0, 0, 0] == 4.0
    assert argmax[0, 0, 0] == 3  # bottom-right in scan order


def test_maxpool_tie_takes_first_scan_position():
    y, argmax = layers.maxpool_forward(np.ones((1, 4, 4)))
    assert np.array_equal(y, np.ones((1, 2, 2)))
    assert not argmax.any()


def test_maxpool_shape():
    rng = np.random.default_rng(7)
    y, _ = layers.maxpool_forward(rng.normal(size=(20, 24, 24)))
    assert y.shape == (20, 12, 12)


def test_maxpool_odd_extent_raises():
    with pytest.raises(ValueError):
        layers.maxpool_forward(np.zeros((1, 5, 4)))


def test_maxpool_backward_routes_to_argmax_only():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(3, 6, 8))
    y, argmax = layers.maxpool_forward(x)
    gx = layers.maxpool_backward(argmax, np.ones_like(y))
    # exactly one nonzero entry (of value 1) per 2x2 pool
    pools = gx.reshape(3, 3, 2, 4, 2).transpose(0, 1, 3, 2, 4).reshape(3, 3, 4, 4)
    counts = (pools != 0).sum(axis=3)
    assert np.array_equal(counts, np.ones_like(counts))
    assert not layers.maxpool_backward(argmax, np.zeros_like(y)).any()


def test_maxpool_backward_shape_mismatch():
    with pytest.raises(ValueError):
        layers.maxpool_backward(np.zeros((1, 2, 2), dtype=np.int8),
                                np.zeros((1, 3, 2)))


def test_maxpool_gradient_matches_oracle_away_from_ties():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(2, 6, 6))
    # enforce a unique per-pool max by a margin well above the fd step
    pools = x.reshape(2, 3, 2, 3, 2)
    flat = pools.transpose(0, 1, 3, 2, 4).reshape(-1, 4)
    flat[np.arange(flat.shape[0]), flat.argmax(axis=1)] += 0.01
    x = flat.reshape(2, 3, 3, 2, 2).transpose(0, 1, 3, 2, 4).reshape(2, 6, 6)
    y, argmax = layers.maxpool_forward(x)
    proj = rng.normal(size=y.shape)
    gx = layers.maxpool_backward(argmax, proj)
    fd = finite_difference_gradient(
        lambda v: _scalarize(layers.maxpool_forward(v)[0], proj), x, eps=1e-6)
    assert max_relative_error(gx, fd) < 1e-5


def test_fc_identity_and_constant():
    x = np.array([1.0, -2.0, 3.0])
    y, _ = layers.fc_forward(x, np.eye(3), np.zeros(3))
    assert np.array_equal(y, x)
    y, _ = layers.fc_forward(x, np.zeros((2, 3)), np.array([4.0, 5.0]))
    assert np.array_equal(y, [4.0, 5.0])


def test_fc_gradients_match_oracle():
    rng = np.random.default_rng(10)
    x = rng.normal(size=10)
    w = rng.normal(size=(4, 10))
    b = rng.normal(size=4)
    y, cache = layers.fc_forward(x, w, b)
    proj = rng.normal(size=4)
    gx, gw, gb = layers.fc_backward(cache, proj)
    fd_x = finite_difference_gradient(
        lambda v: _scalarize(layers.fc_forward(v, w, b)[0], proj), x, eps=1e-6)
    fd_w = finite_difference_gradient(
        lambda v: _scalarize(layers.fc_forward(x, v, b)[0], proj), w, eps=1e-6)
    fd_b = finite_difference_gradient(
        lambda v: _scalarize(layers.fc_forward(x, w, v)[0], proj), b, eps=1e-6)
    assert max_relative_error(gx, fd_x) < 1e-6
    assert max_relative_error(gw, fd_w) < 1e-6
    assert max_relative_error(gb, fd_b) < 1e-6


def test_fc_backward_is_transpose_outer_and_sum():
    rng = np.random.default_rng(11)
    x = rng.normal(size=6)
    w = rng.normal(size=(3, 6))
    _, cache = layers.fc_forward(x, w, np.zeros(3))
    g = rng.normal(size=3)
    gx, gw, gb = layers.fc_backward(cache, g)
    assert np.allclose(gx, w.T @ g, atol=1e-15)
    assert np.allclose(gw, np.outer(g, x), atol=1e-15)
    assert np.array_equal(gb, g)


def test_fc_linearity_in_input():
    rng = np.random.default_rng(12)
    w = rng.normal(size=(4, 7))
    x1, x2 = rng.normal(size=7), rng.normal(size=7)
    alpha, beta = -2.2, 0.9
    lhs, _ = layers.fc_forward(alpha * x1 + beta * x2, w, np.zeros(4))
    y1, _ = layers.fc_forward(x1, w, np.zeros(4))
    y2, _ = layers.fc_forward(x2, w, np.zeros(4))
    assert np.max(np.abs(lhs - (alpha * y1 + beta * y2))) < 1e-10


def test_relu_examples():
    y, mask = layers.relu_forward(np.array([-1.0, 0.0, 2.0]))
    assert np.array_equal(y, [0.0, 0.0, 2.0])
    assert layers.relu_backward(mask, np.array([5.0, 5.0, 5.0]))[2] == 5.0
    y, mask = layers.relu_forward(np.array([-3.0, -0.1]))
    assert not y.any()
    assert not layers.relu_backward(mask, np.ones(2)).any()


def test_relu_gradient_matches_oracle_away_from_kink():
    rng = np.random.default_rng(13)
    x = rng.normal(size=20)
    x = np.where(np.abs(x) < 1e-3, 1e-3, x)
    _, mask = layers.relu_forward(x)
    proj = rng.normal(size=20)
    gx = layers.relu_backward(mask, proj)
    fd = finite_difference_gradient(
        lambda v: _scalarize(layers.relu_forward(v)[0], proj), x, eps=1e-6)
    assert max_relative_error(gx, fd) < 1e-6


def test_batched_forward_matches_per_sample():
    rng = np.random.default_rng(14)
    xb = rng.normal(size=(4, 2, 8, 8))
    w = rng.normal(size=(3, 2, 5, 5))
    b = rng.normal(size=3)
    yb, _ = layers.conv_forward(xb, w, b)
    for i in range(4):
        yi, _ = layers.conv_forward(xb[i], w, b)
        assert np.allclose(yb[i], yi, atol=1e-12)
    pb, ab = layers.maxpool_forward(rng.normal(size=(4, 2, 6, 6)))
    assert pb.shape == (4, 2, 3, 3) and ab.shape == (4, 2, 3, 3)
    xf = rng.normal(size=(4, 6))
    wf = rng.normal(size=(2, 6))
    bf = rng.normal(size=2)
    yf, _ = layers.fc_forward(xf, wf, bf)
    for i in range(4):
        yi, _ = layers.fc_forward(xf[i], wf, bf)
        assert np.allclose(yf[i], yi, atol=1e-12)
