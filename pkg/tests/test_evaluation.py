import math

import numpy as np
import pytest

from trisim.evaluation import (
    EmbeddingSet,
    accuracy,
    check_same_space,
    knn_predict,
    knn_predict_batch,
)
from trisim.manifold import TWO_PI


def knn_oracle(points, labels, query, k, periodic=False):
    """Independent exhaustive-scan reference: plain python sorting with the
    same published tie rules (distance+index order; majority vote, then
    smaller summed distance, then smaller label)."""
    scored = []
    for idx, row in enumerate(points):
        if periodic:
            diff = [abs(float(a) - float(b)) for a, b in zip(row, query)]
            diff[-1] = min(diff[-1], 2 * math.pi - diff[-1])
            dist = math.sqrt(sum(x * x for x in diff))
        else:
            dist = math.sqrt(sum((float(a) - float(b)) ** 2
                                 for a, b in zip(row, query)))
        scored.append((dist, idx))
    scored.sort()
    counts, sums = {}, {}
    for dist, idx in scored[:k]:
        lab = int(labels[idx])
        counts[lab] = counts.get(lab, 0) + 1
        sums[lab] = sums.get(lab, 0.0) + dist
    return min(counts, key=lambda lab: (-counts[lab], sums[lab], lab))


def test_query_equal_to_training_row():
    train = EmbeddingSet(np.array([[0.0, 0.0], [5.0, 5.0]]), np.array([3, 7]))
    assert knn_predict(train, [5.0, 5.0], k=1) == 7


def test_majority_two_versus_one():
    train = EmbeddingSet(np.array([[0.0], [0.1], [3.0]]), np.array([1, 1, 2]))
    assert knn_predict(train, [0.05], k=3) == 1


def test_vote_tie_smaller_summed_distance_then_label():
    train = EmbeddingSet(np.array([[0.0], [1.0], [2.0], [3.0]]),
                         np.array([4, 4, 2, 2]))
    # query 1.5: labels 4 at distances 1.5, 0.5; labels 2 at 0.5, 1.5 -> sums tie
    assert knn_predict(train, [1.5], k=4) == 2
    # shift: label 2 now closer in sum
    assert knn_predict(train, [1.6], k=4) == 2
    assert knn_predict(train, [1.4], k=4) == 4


def test_matches_oracle_on_random_instances():
    rng = np.random.default_rng(0)
    for case in range(20):
        n = int(rng.integers(5, 200))
        d = int(rng.integers(1, 12))
        k = int(rng.integers(1, min(n, 12)))
        points = rng.normal(size=(n, d))
        labels = rng.integers(0, 10, size=n)
        train = EmbeddingSet(points, labels)
        queries = rng.normal(size=(8, d))
        batch = knn_predict_batch(train, queries, k)
        for qi, q in enumerate(queries):
            assert knn_predict(train, q, k) == batch[qi]
            assert batch[qi] == knn_oracle(points, labels, q, k)


def test_duplicate_distance_ties_resolved_by_index():
    pts = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    train = EmbeddingSet(pts, np.array([5, 3, 3]))
    # both label-5 (index 0) and label-3 (index 1) rows sit at distance 0;
    # k=1 must keep the smaller index
    assert knn_predict(train, [1.0, 0.0], k=1) == 5


def test_periodic_distance_wraps_azimuthal_axis():
    train = EmbeddingSet(np.array([[6.2], [1.0]]), np.array([1, 2]),
                         space="unfolded")
    # |0.05 - 6.2| = 6.15 direct, but 2*pi - 6.15 = 0.133 wrapped
    assert knn_predict(train, [0.05], k=1, periodic=True) == 1
    assert knn_predict(train, [0.05], k=1, periodic=False) == 2
    batch = knn_predict_batch(train, np.array([[0.05]]), 1, periodic=True)
    assert batch[0] == knn_oracle(train.points, train.labels, [0.05], 1,
                                  periodic=True)


def test_periodic_requires_unfolded_space():
    train = EmbeddingSet(np.array([[1.0], [2.0]]), np.array([0, 1]))
    with pytest.raises(ValueError):
        knn_predict(train, [1.0], k=1, periodic=True)


def test_k_and_shape_validation():
    train = EmbeddingSet(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0, 1]))
    with pytest.raises(ValueError):
        knn_predict(train, [1.0, 0.0], k=0)
    with pytest.raises(ValueError):
        knn_predict(train, [1.0, 0.0], k=3)
    with pytest.raises(ValueError):
        knn_predict(train, [1.0, 0.0, 0.0], k=1)


def test_embedding_set_validation():
    with pytest.raises(ValueError):
        EmbeddingSet(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        EmbeddingSet(np.zeros((3, 2)), np.zeros(3), space="nowhere")
    with pytest.raises(ValueError):
        EmbeddingSet(np.array([[2.0, 0.0]]), np.array([1]), space="sphere")
    ok = EmbeddingSet(np.array([[0.6, 0.8]]), np.array([1]), space="sphere")
    assert ok.space == "sphere"


def test_check_same_space():
    a = EmbeddingSet(np.zeros((2, 3)), np.zeros(2), space="raw")
    b = EmbeddingSet(np.eye(2, 3), np.zeros(2), space="sphere")
    c = EmbeddingSet(np.zeros((2, 4)), np.zeros(2), space="raw")
    with pytest.raises(ValueError):
        check_same_space(a, b)
    with pytest.raises(ValueError):
        check_same_space(a, c)
    check_same_space(a, EmbeddingSet(np.zeros((5, 3)), np.zeros(5)))


def test_accuracy_examples():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([1, 2, 3], [4, 5, 6]) == 0.0
    assert accuracy([1, 2], [1, 3]) == 0.5
    with pytest.raises(ValueError):
        accuracy([1], [1, 2])
    with pytest.raises(ValueError):
        accuracy([], [])


def test_accuracy_permutation_invariant():
    rng = np.random.default_rng(1)
    preds = rng.integers(0, 5, size=100)
    labels = rng.integers(0, 5, size=100)
    base = accuracy(preds, labels)
    for _ in range(5):
        perm = rng.permutation(100)
        assert accuracy(preds[perm], labels[perm]) == base


def test_sphere_euclidean_equals_descending_cosine_neighbors():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(300, 5))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    train = EmbeddingSet(pts, rng.integers(0, 10, size=300), space="sphere")
    q = rng.normal(size=5)
    q /= np.linalg.norm(q)
    k = 7
    d2 = np.sum((pts - q) ** 2, axis=1)
    by_euclid = np.lexsort((np.arange(300), d2))[:k]
    cos = pts @ q
    by_cosine = np.lexsort((np.arange(300), -cos))[:k]
    assert set(by_euclid) == set(by_cosine)
