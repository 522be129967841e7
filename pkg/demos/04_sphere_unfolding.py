"""Unfolding the unit sphere into an angular box, like a world map.

A punctured hypersphere is homeomorphic to a hyperplane, so d-dimensional
unit vectors can be rewritten as d-1 angles without losing class structure.
Here a synthetic 3-d cloud of ten clusters on the sphere becomes a 2-d map
of extent 2*pi x pi.
"""

import os

import numpy as np

from trisim import fold, length_normalize, unfold
from trisim.plotting import map_plot

OUT_DIR = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT_DIR, exist_ok=True)

rng = np.random.default_rng(5)

# ten tight clusters at random directions on the unit sphere
centers = length_normalize(rng.normal(size=(10, 3)))
points = []
labels = []
for cls, center in enumerate(centers):
    cloud = center + rng.normal(0.0, 0.08, (300, 3))
    points.append(length_normalize(cloud))
    labels.append(np.full(300, cls))
points = np.vstack(points)
labels = np.concatenate(labels)

angles = unfold(points)
print(f"unfolded {points.shape[1]}-d sphere points into {angles.shape[1]} "
      f"angles: polar range [{angles[:, 0].min():.3f}, {angles[:, 0].max():.3f}]"
      f" (pi = {np.pi:.3f}), azimuth range [{angles[:, 1].min():.3f}, "
      f"{angles[:, 1].max():.3f}] (2*pi = {2 * np.pi:.3f})")

back = fold(angles)
print(f"round-trip error: {np.max(np.abs(back - points)):.2e}")

out = os.path.join(OUT_DIR, "sphere_map.svg")
map_plot(angles[:, [0, 1]], labels, out, title="unfolded sphere clusters")
print(f"wrote {out}")
