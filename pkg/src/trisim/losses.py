"""Pair losses: the triangular loss with its self-generated targets, plain
mean-squared error, and the distance-margin contrastive baseline.

The triangular loss for a pair (a, b) labeled s in {+1, -1} is

    J = 1/2 ||a||^2 + 1/2 ||b||^2 - r ||c|| + r^2,   c = a + s * b,

with r the soft length constraint. Its gradient is a pair of MSE-style
residuals against the self-generated targets r c/||c|| and r s c/||c||, which
is what lets an ordinary single-track optimizer train the siamese system.
"""

from dataclasses import dataclass

import numpy as np

from .arrays import DEGENERATE_NORM, l2_norm


class DegeneratePairError(ValueError):
    """a + s*b vanished, so the pair defines no target direction."""


@dataclass
class PairCost:
    """Cost, per-branch gradients and the targets the gradients point at."""

    cost: float
    grad_a: np.ndarray
    grad_b: np.ndarray
    target_a: np.ndarray
    target_b: np.ndarray


def _as_pair(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty vectors")
    return a, b


def _check_flag(s) -> int:
    s = int(s)
    if s not in (1, -1):
        raise ValueError(f"similarity flag must be +1 or -1, got {s}")
    return s


def triangular_loss(a, b, s, r=1.0) -> PairCost:
    """Triangular loss of one pair with analytic gradients and targets.

    The gradients are computed literally as ``a - target_a`` and
    ``b - target_b`` so that they are bitwise equal to the MSE gradients
    against the self-generated targets.
    """
    a, b = _as_pair(a, b)
    s = _check_flag(s)
    if r <= 0:
        raise ValueError("length constraint r must be positive")
    c = a + s * b
    nc = l2_norm(c)
    if nc < DEGENERATE_NORM:
        raise DegeneratePairError("a = -s*b: pair has no target direction; skip it")
    target_a = (r / nc) * c
    target_b = s * target_a
    cost = 0.5 * float(np.dot(a, a)) + 0.5 * float(np.dot(b, b)) - r * nc + r * r
    return PairCost(cost, a - target_a, b - target_b, target_a, target_b)


def triangular_loss_twopart(a, b, s, r=1.0) -> float:
    """Two-part form of the triangular loss: soft length normalization plus
    the triangle-inequality slack. Exists as a cross-check of the algebra
    behind :func:`triangular_loss`; the two agree to rounding."""
    a, b = _as_pair(a, b)
    s = _check_flag(s)
    if r <= 0:
        raise ValueError("length constraint r must be positive")
    na = l2_norm(a)
    nb = l2_norm(b)
    nc = l2_norm(a + s * b)
    return 0.5 * ((na - r) ** 2 + (nb - r) ** 2) + r * (na + nb - nc)


def mse_loss(a, g):
    """Half squared Euclidean error and its gradient: (1/2 ||a-g||^2, a-g)."""
    a, g = _as_pair(a, g)
    diff = a - g
    return 0.5 * float(np.dot(diff, diff)), diff


def contrastive_loss(a, b, s, margin=1.0) -> PairCost:
    """Euclidean contrastive loss: 1/2 D^2 for similar pairs, 1/2 max(0, m-D)^2
    for dissimilar ones, D = ||a-b||.

    Dissimilar pairs already separated by the margin contribute nothing; a
    dissimilar pair at D = 0 gets the zero subgradient by convention.
    """
    a, b = _as_pair(a, b)
    s = _check_flag(s)
    if margin <= 0:
        raise ValueError("margin must be positive")
    diff = a - b
    if s == 1:
        cost = 0.5 * float(np.dot(diff, diff))
        grad_a = diff
        grad_b = -diff
    else:
        dist = l2_norm(diff)
        if dist >= margin:
            cost = 0.0
            grad_a = np.zeros_like(a)
            grad_b = np.zeros_like(b)
        elif dist < DEGENERATE_NORM:
            cost = 0.5 * margin * margin
            grad_a = np.zeros_like(a)
            grad_b = np.zeros_like(b)
        else:
            gap = margin - dist
            cost = 0.5 * gap * gap
            grad_a = (-gap / dist) * diff
            grad_b = -grad_a
    return PairCost(cost, grad_a, grad_b, a - grad_a, b - grad_b)


def triangular_loss_batch(A, B, s, r=1.0):
    """Vectorized triangular loss over rows of A and B (the training path).

    Returns (costs, grad_a, grad_b, degenerate) where ``degenerate`` marks
    rows with ||a + s*b|| below the usable threshold; those rows carry zero
    cost and zero gradients and must be excluded from averages by the caller.

    Agrees row-for-row with :func:`triangular_loss` (property-tested).
    """
    A = np.asarray(A)
    B = np.asarray(B)
    s = np.asarray(s)
    if A.shape != B.shape or A.ndim != 2:
        raise ValueError(f"A, B must be matching 2-d arrays, got {A.shape} vs {B.shape}")
    if s.shape != (A.shape[0],):
        raise ValueError("one similarity flag per row required")
    C = A + s[:, None] * B
    nc = np.sqrt(np.einsum("ij,ij->i", C, C))
    degenerate = nc < DEGENERATE_NORM
    safe = np.where(degenerate, 1.0, nc)
    TA = (r / safe)[:, None] * C
    TB = s[:, None] * TA
    grad_a = A - TA
    grad_b = B - TB
    costs = (
        0.5 * np.einsum("ij,ij->i", A, A)
        + 0.5 * np.einsum("ij,ij->i", B, B)
        - r * nc
        + r * r
    )
    if degenerate.any():
        grad_a[degenerate] = 0.0
        grad_b[degenerate] = 0.0
        costs = np.where(degenerate, 0.0, costs)
    return costs, grad_a, grad_b, degenerate
