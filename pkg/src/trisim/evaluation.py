"""kNN classification over embedding sets and accuracy reporting.

Neighbor search is a deterministic exhaustive scan: neighbors are ordered by
(distance, training index), the vote is the majority label, and vote ties are
broken by the smaller summed distance, then by the smaller label. Unfolded
coordinates may optionally treat the final (azimuthal) axis as periodic
modulo 2*pi.
"""

from dataclasses import dataclass

import numpy as np

from .manifold import TWO_PI

SPACES = ("raw", "sphere", "unfolded")


@dataclass
class EmbeddingSet:
    """Coordinates, labels, and the tag of the space they live in."""

    points: np.ndarray
    labels: np.ndarray
    space: str = "raw"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.points.ndim != 2:
            raise ValueError("points must be a (n, d) matrix")
        if self.labels.shape != (self.points.shape[0],):
            raise ValueError(f"{self.points.shape[0]} points but "
                             f"{self.labels.shape} labels")
        if self.space not in SPACES:
            raise ValueError(f"unknown space tag {self.space!r}")
        if self.space == "sphere":
            norms = np.sqrt(np.einsum("ij,ij->i", self.points, self.points))
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("sphere-tagged points must have unit norm")


def _distances(train_points, queries, periodic):
    """Squared distances, (n_queries, n_train)."""
    if periodic:
        diff = np.abs(queries[:, None, :] - train_points[None, :, :])
        diff[..., -1] = np.minimum(diff[..., -1], TWO_PI - diff[..., -1])
        return np.einsum("qnd,qnd->qn", diff, diff)
    # ||q - t||^2 = ||q||^2 - 2 q.t + ||t||^2, evaluated with one matmul
    qq = np.einsum("ij,ij->i", queries, queries)
    tt = np.einsum("ij,ij->i", train_points, train_points)
    d2 = qq[:, None] - 2.0 * (queries @ train_points.T) + tt[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def _vote(labels_k, dists_k):
    counts = {}
    sums = {}
    for lab, dist in zip(labels_k, dists_k):
        lab = int(lab)
        counts[lab] = counts.get(lab, 0) + 1
        sums[lab] = sums.get(lab, 0.0) + float(dist)
    return min(counts, key=lambda lab: (-counts[lab], sums[lab], lab))


def knn_predict(train: EmbeddingSet, query, k, periodic=False):
    """Majority label of the k nearest training points to one query row."""
    labels = knn_predict_batch(train, np.asarray(query, dtype=np.float64)[None],
                               k, periodic=periodic)
    return int(labels[0])


def knn_predict_batch(train: EmbeddingSet, queries, k, periodic=False, chunk=512):
    """kNN labels for many query rows at once (same rules as knn_predict)."""
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != train.points.shape[1]:
        raise ValueError(f"queries must be (m, {train.points.shape[1]}), "
                         f"got {queries.shape}")
    n = train.points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    if periodic and train.space != "unfolded":
        raise ValueError("periodic distance only applies to unfolded coordinates")
    out = np.empty(queries.shape[0], dtype=np.int64)
    for lo in range(0, queries.shape[0], chunk):
        hi = min(lo + chunk, queries.shape[0])
        d2 = _distances(train.points, queries[lo:hi], periodic)
        for row in range(hi - lo):
            drow = d2[row]
            # k-th smallest value, then every candidate tied at the boundary,
            # so equal distances resolve by training index, never by partition
            # order.
            boundary = np.partition(drow, k - 1)[k - 1] if k < n else np.inf
            cand = np.nonzero(drow <= boundary)[0]
            order = np.lexsort((cand, drow[cand]))  # distance first, then index
            sel = cand[order][:k]
            out[lo + row] = _vote(train.labels[sel], np.sqrt(drow[sel]))
    return out


def check_same_space(train: EmbeddingSet, query_set: EmbeddingSet):
    """Guard that two sets are comparable before cross-set kNN."""
    if train.space != query_set.space:
        raise ValueError(f"space mismatch: {train.space} vs {query_set.space}")
    if train.points.shape[1] != query_set.points.shape[1]:
        raise ValueError("dimension mismatch between embedding sets")


def accuracy(predictions, labels) -> float:
    """Fraction of positions where prediction equals label."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError(f"length mismatch: {predictions.shape} vs {labels.shape}")
    if predictions.size == 0:
        raise ValueError("empty prediction list")
    return float(np.mean(predictions == labels))
