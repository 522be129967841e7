"""Forward and backward passes for the four layer types of the network:
valid 2-d convolution, 2x2 max pooling, fully-connected affine, and ReLU.

Every forward accepts a single sample (conv/pool: maps x H x W, fc: a vector)
or a leading batch axis, and returns the output together with the cache its
backward pass needs. All backward passes are checked against the
central-difference oracle in the test suite.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass
class LayerActivation:
    """Cache recorded by a forward pass for use by the matching backward."""

    inputs: np.ndarray
    weights: np.ndarray
    single: bool
    cols: np.ndarray = None  # conv only: im2col matrix reused by backward


def _batched(x, ndim):
    x = np.asarray(x)
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim == ndim:
        return x, False
    raise ValueError(f"expected {ndim - 1}-d or {ndim}-d input, got {x.ndim}-d")


def _im2col(x, k):
    """Patches of x as a (N*H'*W', in*k*k) matrix, one 5x5xin patch per row."""
    n, c, h, w = x.shape
    oh, ow = h - k + 1, w - k + 1
    win = sliding_window_view(x, (k, k), axis=(2, 3))  # (N, in, H', W', k, k)
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5))
    return cols.reshape(n * oh * ow, c * k * k), oh, ow


def conv_forward(x, w, b):
    """Valid (no padding, stride 1) convolution.

    x: (maps, H, W) or (N, maps, H, W); w: (out, in, k, k); b: (out,).
    Output spatial extent shrinks by k - 1. Evaluated as one im2col matmul;
    the patch matrix is cached for the backward pass.
    """
    x, single = _batched(x, 4)
    w = np.asarray(w)
    b = np.asarray(b)
    if w.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ValueError(f"kernel must be (out, in, k, k), got {w.shape}")
    out_maps, in_maps, k, _ = w.shape
    if x.shape[1] != in_maps:
        raise ValueError(f"input has {x.shape[1]} maps, kernel expects {in_maps}")
    if b.shape != (out_maps,):
        raise ValueError(f"bias must be ({out_maps},), got {b.shape}")
    if x.shape[2] < k or x.shape[3] < k:
        raise ValueError(f"spatial extent {x.shape[2:]} smaller than kernel {k}")
    cols, oh, ow = _im2col(x, k)
    y = cols @ w.reshape(out_maps, -1).T + b  # (N*H'*W', out)
    y = y.reshape(x.shape[0], oh, ow, out_maps).transpose(0, 3, 1, 2)
    cache = LayerActivation(inputs=x, weights=w, single=single, cols=cols)
    return (y[0] if single else y), cache


def conv_backward(cache, upstream, need_input_grad=True):
    """Gradients of the convolution w.r.t. input, weights and bias.

    ``need_input_grad=False`` (useful for the first layer, whose input
    gradient nobody consumes) returns None in place of the input gradient.
    """
    if cache is None:
        raise ValueError("conv_backward needs the cache from conv_forward")
    x, w = cache.inputs, cache.weights
    gy = np.asarray(upstream)
    if cache.single:
        gy = gy[None]
    out_maps, in_maps, k, _ = w.shape
    n = x.shape[0]
    oh, ow = x.shape[2] - k + 1, x.shape[3] - k + 1
    if gy.shape != (n, out_maps, oh, ow):
        raise ValueError(f"upstream shape {gy.shape} does not match output "
                         f"{(n, out_maps, oh, ow)}")
    gym = np.ascontiguousarray(gy.transpose(0, 2, 3, 1)).reshape(-1, out_maps)
    gb = gym.sum(axis=0)
    gw = (gym.T @ cache.cols).reshape(w.shape)
    if not need_input_grad:
        return None, gw, gb
    gcols = gym @ w.reshape(out_maps, -1)  # (N*H'*W', in*k*k)
    gc = gcols.reshape(n, oh, ow, in_maps, k, k)
    gx = np.zeros_like(x)
    for i in range(k):
        for j in range(k):
            gx[:, :, i:i + oh, j:j + ow] += gc[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return (gx[0] if cache.single else gx), gw, gb


def maxpool_forward(x):
    """Non-overlapping 2x2 max pooling.

    Returns the pooled output plus per-pool argmax codes in 0..3 (row-major
    scan order inside the pool; ties go to the first position scanned).
    """
    x, single = _batched(x, 4)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"pooling needs even spatial extents, got {h}x{w}")
    v = x.reshape(n, c, h // 2, 2, w // 2, 2)
    best = v[:, :, :, 0, :, 0].copy()
    argmax = np.zeros(best.shape, dtype=np.int8)
    for code, cand in ((1, v[:, :, :, 0, :, 1]),
                       (2, v[:, :, :, 1, :, 0]),
                       (3, v[:, :, :, 1, :, 1])):
        better = cand > best  # strict: ties keep the earlier scan position
        np.copyto(best, cand, where=better)
        argmax[better] = code
    if single:
        return best[0], argmax[0]
    return best, argmax


def maxpool_backward(argmax, upstream):
    """Route the upstream gradient to the argmax position of each pool."""
    gy = np.asarray(upstream)
    am = np.asarray(argmax)
    single = gy.ndim == 3
    if single:
        gy = gy[None]
        am = am[None]
    if am.shape != gy.shape:
        raise ValueError(f"argmax shape {am.shape} does not match upstream {gy.shape}")
    n, c, h2, w2 = gy.shape
    gx5 = np.zeros((n, c, h2, w2, 4), dtype=gy.dtype)
    np.put_along_axis(gx5, am[..., None], gy[..., None], axis=4)
    gx = gx5.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    gx = gx.reshape(n, c, 2 * h2, 2 * w2)
    return gx[0] if single else gx


def fc_forward(x, w, b):
    """Affine map W x + b. x: (n,) or (N, n); w: (m, n); b: (m,)."""
    x, single = _batched(x, 2)
    w = np.asarray(w)
    b = np.asarray(b)
    if w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ValueError(f"input width {x.shape[1]} does not match weights {w.shape}")
    if b.shape != (w.shape[0],):
        raise ValueError(f"bias must be ({w.shape[0]},), got {b.shape}")
    y = x @ w.T + b
    cache = LayerActivation(inputs=x, weights=w, single=single)
    return (y[0] if single else y), cache


def fc_backward(cache, upstream):
    """Gradients of the affine map: (W^T g, g outer x, g)."""
    if cache is None:
        raise ValueError("fc_backward needs the cache from fc_forward")
    x, w = cache.inputs, cache.weights
    gy = np.asarray(upstream)
    if cache.single:
        gy = gy[None]
    if gy.shape != (x.shape[0], w.shape[0]):
        raise ValueError(f"upstream shape {gy.shape} does not match output "
                         f"{(x.shape[0], w.shape[0])}")
    gx = gy @ w
    gw = gy.T @ x
    gb = gy.sum(axis=0)
    return (gx[0] if cache.single else gx), gw, gb


def relu_forward(x):
    """max(0, x); the mask of strictly positive inputs is the backward cache."""
    x = np.asarray(x)
    mask = x > 0
    return np.where(mask, x, 0), mask


def relu_backward(mask, upstream):
    """Zero the upstream gradient wherever the input was <= 0."""
    gy = np.asarray(upstream)
    if np.asarray(mask).shape != gy.shape:
        raise ValueError("mask and upstream shapes differ")
    return np.where(mask, gy, 0)
