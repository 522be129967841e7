"""Length normalization and the hypersphere unfolding coordinate transform.

A unit vector in d dimensions is rewritten as d-1 angles under the convention

    x_1 = cos(p_1)
    x_2 = sin(p_1) cos(p_2)
    ...
    x_{d-1} = sin(p_1) ... sin(p_{d-2}) cos(p_{d-1})
    x_d     = sin(p_1) ... sin(p_{d-2}) sin(p_{d-1})

with p_1 .. p_{d-2} in [0, pi] and the final (azimuthal) angle in [0, 2pi).
For d = 2 the single angle spans [0, 2pi). Unfolding a sphere this way is a
bijection away from the poles, so the angles give a faithful lower-dimensional
view of points on the unit hypersphere.
"""

import numpy as np

from .arrays import DEGENERATE_NORM, DegenerateVectorError

TWO_PI = 2.0 * np.pi

# Below this residual norm the remaining angles are ill-defined (pole); they
# are set to zero so the transform stays total.
POLE_EPS = 1e-12


def _rows(v):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        return v[None], True
    if v.ndim == 2:
        return v, False
    raise ValueError(f"expected a vector or a matrix of row vectors, got {v.ndim}-d")


def length_normalize(v):
    """Project vector(s) onto the unit sphere: v / ||v||.

    Accepts one vector or a matrix of row vectors. Rows with norm below the
    degeneracy threshold raise; callers exclude such samples.
    """
    rows, single = _rows(v)
    norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
    if np.any(norms < DEGENERATE_NORM):
        bad = int(np.argmax(norms < DEGENERATE_NORM))
        raise DegenerateVectorError(f"row {bad} has norm {norms[bad]:.3e}; "
                                    "cannot normalize")
    out = rows / norms[:, None]
    return out[0] if single else out


def unfold(p):
    """Angles of unit vector(s): d coordinates in, d-1 angles out.

    The first d-2 angles lie in [0, pi]; the last angle is taken by
    two-argument arctangent and mapped to [0, 2pi). At a pole (all remaining
    coordinates zero) the undetermined trailing angles are set to 0.
    """
    rows, single = _rows(p)
    n, d = rows.shape
    if d < 2:
        raise ValueError("unfolding needs dimension >= 2")
    norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
    if np.any(np.abs(norms - 1.0) > 1e-6):
        bad = int(np.argmax(np.abs(norms - 1.0) > 1e-6))
        raise ValueError(f"row {bad} has norm {norms[bad]:.6f}; unfold expects "
                         "unit vectors (apply length_normalize first)")
    # tail[:, k] = ||(x_k, ..., x_d)||, the residual norm entering angle k;
    # for a unit vector this equals the sine product of the earlier angles.
    tail = np.sqrt(np.cumsum(rows[:, ::-1] ** 2, axis=1))[:, ::-1]
    angles = np.zeros((n, d - 1))
    collapsed = np.zeros(n, dtype=bool)  # hit a pole at an earlier level
    for k in range(d - 2):
        collapsed |= tail[:, k] < POLE_EPS
        live = ~collapsed
        safe = np.where(live, tail[:, k], 1.0)
        ratio = np.clip(rows[:, k] / safe, -1.0, 1.0)
        angles[:, k] = np.where(live, np.arccos(ratio), 0.0)
    last_live = ~collapsed & (tail[:, d - 2] >= POLE_EPS)
    last = np.where(last_live,
                    np.mod(np.arctan2(rows[:, -1], rows[:, -2]), TWO_PI), 0.0)
    # mod can round up to exactly 2*pi for tiny negative inputs; wrap it.
    last[last >= TWO_PI] = 0.0
    angles[:, -1] = last
    return angles[0] if single else angles


def fold(q):
    """Unit vector(s) from angles: d-1 angles in, d coordinates out.

    Inverse of :func:`unfold` away from the pole set. Angles outside their
    ranges raise.
    """
    rows, single = _rows(q)
    n, dm1 = rows.shape
    if dm1 < 1:
        raise ValueError("folding needs at least one angle")
    d = dm1 + 1
    if dm1 > 1:
        polar = rows[:, :-1]
        if np.any(polar < 0) or np.any(polar > np.pi):
            raise ValueError("polar angles must lie in [0, pi]")
    azim = rows[:, -1]
    if np.any(azim < 0) or np.any(azim >= TWO_PI):
        raise ValueError("azimuthal angle must lie in [0, 2*pi)")
    if dm1 == 1:
        out = np.stack([np.cos(azim), np.sin(azim)], axis=1)
        return out[0] if single else out
    sines = np.cumprod(np.sin(rows), axis=1)  # sines[:, k] = sin p_1 ... sin p_{k+1}
    out = np.empty((n, d))
    out[:, 0] = np.cos(rows[:, 0])
    for k in range(1, dm1):
        out[:, k] = sines[:, k - 1] * np.cos(rows[:, k])
    out[:, -1] = sines[:, -1]
    return out[0] if single else out
