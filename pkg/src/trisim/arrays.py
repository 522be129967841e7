"""Vector primitives shared by every other module: norms, the two pair
similarities, and the central-difference gradient oracle used by the tests."""

import math

import numpy as np

# Below this a vector has no usable direction and similarity is undefined.
DEGENERATE_NORM = 1e-12


class DegenerateVectorError(ValueError):
    """A vector is numerically zero where a direction is required."""


def l2_norm(v) -> float:
    """Euclidean norm of ``v`` (any shape, flattened)."""
    v = np.asarray(v).ravel()
    return math.sqrt(float(np.dot(v, v)))


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between ``a`` and ``b``, clipped to [-1, 1]."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na < DEGENERATE_NORM or nb < DEGENERATE_NORM:
        raise DegenerateVectorError("cosine similarity needs two nonzero vectors")
    c = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, c))


def triangular_similarity(a, b) -> float:
    """Half the chord length spanned by the unit-normalized pair, in [0, 1].

    Equals sqrt((1 + cos(a, b)) / 2): 1 for aligned directions, 0 for exactly
    opposite ones, invariant to positive rescaling of either vector.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na < DEGENERATE_NORM or nb < DEGENERATE_NORM:
        raise DegenerateVectorError("triangular similarity needs two nonzero vectors")
    u = a / na + b / nb
    return min(1.0, 0.5 * math.sqrt(float(np.dot(u, u))))


def finite_difference_gradient(f, x, eps=1e-5):
    """Central-difference gradient of scalar-valued ``f`` at ``x``.

    This is the independent oracle every analytic gradient in the project is
    checked against; it never shares code with the backward passes. ``f`` is
    called with a perturbed copy of ``x``, one coordinate at a time.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(x))
        flat[i] = orig - eps
        fm = float(f(x))
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def max_relative_error(approx, exact) -> float:
    """Worst elementwise relative difference, with an absolute floor of 1.

    err_i = |a_i - e_i| / max(1, |a_i|, |e_i|), so tiny entries are compared
    absolutely and large entries relatively.
    """
    approx = np.asarray(approx, dtype=np.float64).ravel()
    exact = np.asarray(exact, dtype=np.float64).ravel()
    if approx.shape != exact.shape:
        raise ValueError(f"shape mismatch: {approx.shape} vs {exact.shape}")
    denom = np.maximum(1.0, np.maximum(np.abs(approx), np.abs(exact)))
    return float(np.max(np.abs(approx - exact) / denom)) if approx.size else 0.0
