from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpcasynth.cluster import candidate_ks, donor_pool, kmeans, silhouette, tune_k
from rpcasynth.errors import NoDonorsError, ValidationError


def blobs(seed=0):
    rng = np.random.default_rng(seed)
    centers = np.array([[0, 0], [10, 0], [0, 10]], float)
    pts = np.concatenate([c + 0.5 * rng.standard_normal((15, 2)) for c in centers])
    return pts, np.repeat(np.arange(3), 15)


def same_partition(a, b):
    return len(set(zip(a, b))) == len(set(a)) == len(set(b))


def test_blobs_found_and_k_selected():
    pts, truth = blobs()
    res = tune_k(pts, range(2, 7), restarts=10)
    assert res.best_k == 3
    assert same_partition(res.best.assignment, truth)
    assert [row[0] for row in res.table] == [2, 3, 4, 5, 6]


def test_k1_is_the_mean():
    pts, _ = blobs()
    c = kmeans(pts, 1, restarts=3)
    np.testing.assert_allclose(c.centers[0], pts.mean(axis=0))
    assert c.silhouette is None


def test_silhouette_hand_computed():
    pts = np.array([[0.0], [0.1], [10.0], [10.1]])
    fit = kmeans(pts, 2, restarts=5)
    # centers 0.05 and 10.05: outer points are 0.05 from their own center and
    # 10.05 from the other, inner points 0.05 and 9.95
    s, mean = silhouette(pts, fit.assignment, fit.centers)
    np.testing.assert_allclose(np.sort(s), np.sort([10 / 10.05, 9.9 / 9.95] * 2), rtol=1e-12)
    assert mean == pytest.approx((10 / 10.05 + 9.9 / 9.95) / 2, rel=1e-12)


def test_silhouette_edge_values():
    centers = np.array([[0.0], [2.0]])
    s, _ = silhouette(np.array([[1.0], [0.0]]), np.array([0, 0]), centers)
    assert s[0] == 0.0  # equidistant
    assert s[1] == 1.0  # on its own center


def test_wss_history_non_increasing():
    rng = np.random.default_rng(4)
    pts = rng.standard_normal((80, 3))
    for k in (2, 4, 7):
        h = np.array(kmeans(pts, k, restarts=4).wss_history)
        assert np.all(np.diff(h) <= 1e-9 * h[0])


def test_matches_brute_force_optimum():
    rng = np.random.default_rng(7)
    pts = rng.standard_normal((9, 2))
    best = np.inf
    for labels in product(range(2), repeat=9):
        labels = np.array(labels)
        if len(set(labels)) < 2:
            continue
        wss = sum(((pts[labels == c] - pts[labels == c].mean(0)) ** 2).sum() for c in range(2))
        best = min(best, wss)
    assert kmeans(pts, 2, restarts=50).wss == pytest.approx(best, rel=1e-12)


def test_wss_non_increasing_in_k():
    pts, _ = blobs(1)
    wss = [kmeans(pts, k, restarts=20).wss for k in range(1, 7)]
    assert all(b <= a + 1e-9 for a, b in zip(wss, wss[1:]))


def test_deterministic():
    pts, _ = blobs(2)
    a = tune_k(pts, range(2, 6), restarts=5, seed=3)
    b = tune_k(pts, range(2, 6), restarts=5, seed=3)
    assert a.table == b.table
    assert np.array_equal(a.best.assignment, b.best.assignment)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 10_000))
def test_scale_invariance(c, seed):
    pts, _ = blobs(seed % 5)
    a = kmeans(pts, 3, restarts=5, seed=seed)
    b = kmeans(c * pts, 3, restarts=5, seed=seed)
    assert same_partition(a.assignment, b.assignment)
    assert b.silhouette == pytest.approx(a.silhouette, rel=1e-9)


def test_permutation_invariance():
    pts, _ = blobs(3)
    perm = np.random.default_rng(0).permutation(len(pts))
    a = kmeans(pts, 3, restarts=10)
    b = kmeans(pts[perm], 3, restarts=10)
    assert same_partition(a.assignment[perm], b.assignment)
    assert b.wss == pytest.approx(a.wss)


def test_donor_pool_cases():
    from rpcasynth.cluster import Clustering

    c = Clustering(2, np.array([0, 1, 0, 0, 1]), np.zeros((2, 1)), 0.0)
    assert donor_pool(c, 0) == [2, 3]
    assert donor_pool(c, 4) == [1]
    alone = Clustering(2, np.array([0, 1, 1]), np.zeros((2, 1)), 0.0)
    with pytest.raises(NoDonorsError):
        donor_pool(alone, 0)


def test_candidate_ks():
    assert candidate_ks(5, range(2, 9)) == [2, 3, 4]
    assert candidate_ks(2, range(2, 9)) == [1]
    assert candidate_ks(50, [3]) == [3]


def test_k_larger_than_points():
    with pytest.raises(ValidationError):
        kmeans(np.zeros((3, 1)), 2)
