"""kd-tree queries against a linear-scan oracle."""

import numpy as np
import pytest

from rotmesh.errors import EmptyInput
from rotmesh.spatial import KdTree, LEAF_SIZE


def linear_knn(pts, q, k):
    d = np.linalg.norm(pts - q, axis=1)
    order = np.lexsort((np.arange(len(pts)), d))[:k]
    return order, d[order]


def linear_radius(pts, c, rad):
    d = np.linalg.norm(pts - c, axis=1)
    return np.flatnonzero(d <= rad)


def test_single_point():
    t = KdTree([[1.0, 2.0, 3.0]])
    idx, dist = t.knn([1.0, 2.0, 3.0], 1)
    assert list(idx) == [0]
    assert dist[0] == 0.0


def test_empty_raises():
    with pytest.raises(EmptyInput):
        KdTree(np.zeros((0, 3)))


def test_cube_corners():
    corners = np.array(
        [[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)], dtype=float
    )
    t = KdTree(corners)
    idx, dist = t.knn(corners[0], 4)
    # nearest is the corner itself, then its 3 edge-adjacent corners
    assert idx[0] == 0
    assert sorted(idx[1:]) == [1, 2, 4]
    assert np.allclose(dist[1:], 1.0)


def test_knn_matches_linear_scan():
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1, 1, size=(1000, 3))
    t = KdTree(pts)
    for _ in range(100):
        q = rng.uniform(-1.2, 1.2, size=3)
        k = int(rng.integers(1, 40))
        idx, dist = t.knn(q, k)
        oidx, odist = linear_knn(pts, q, k)
        assert np.array_equal(idx, oidx)
        assert np.allclose(dist, odist)


def test_knn_self_included_and_ties_by_index():
    # duplicated points force distance ties
    pts = np.array([[0, 0, 0], [1, 0, 0], [1, 0, 0], [2, 0, 0]], dtype=float)
    t = KdTree(pts)
    idx, dist = t.knn([0.0, 0.0, 0.0], 3)
    assert list(idx) == [0, 1, 2]
    assert np.allclose(dist, [0.0, 1.0, 1.0])


def test_knn_k_exceeds_n():
    pts = np.random.default_rng(1).normal(size=(5, 3))
    t = KdTree(pts)
    idx, dist = t.knn([0.0, 0.0, 0.0], 50)
    assert len(idx) == 5
    assert sorted(idx) == list(range(5))


def test_knn_subset_property():
    rng = np.random.default_rng(13)
    pts = rng.normal(size=(300, 3))
    t = KdTree(pts)
    for _ in range(20):
        q = rng.normal(size=3)
        k = int(rng.integers(1, 20))
        a, _ = t.knn(q, k)
        b, _ = t.knn(q, k + 1)
        assert set(a) <= set(b)


def test_radius_zero_at_indexed_point():
    pts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
    t = KdTree(pts)
    assert list(t.radius_query([1.0, 0.0, 0.0], 0.0)) == [1]


def test_radius_huge_returns_all():
    pts = np.random.default_rng(3).normal(size=(64, 3))
    t = KdTree(pts)
    assert list(t.radius_query([0.0, 0.0, 0.0], 1e9)) == list(range(64))


def test_radius_matches_linear_scan():
    rng = np.random.default_rng(17)
    pts = rng.uniform(-1, 1, size=(800, 3))
    t = KdTree(pts)
    for _ in range(100):
        c = rng.uniform(-1, 1, size=3)
        rad = float(rng.uniform(0, 1.0))
        got = t.radius_query(c, rad)
        assert np.array_equal(got, linear_radius(pts, c, rad))


def test_radius_monotone_in_rad():
    rng = np.random.default_rng(29)
    pts = rng.normal(size=(200, 3))
    t = KdTree(pts)
    c = rng.normal(size=3)
    prev = set()
    for rad in (0.1, 0.3, 0.7, 1.5, 3.0):
        cur = set(t.radius_query(c, rad))
        assert prev <= cur
        prev = cur


def test_leaves_partition_indices():
    rng = np.random.default_rng(31)
    pts = rng.normal(size=(513, 3))
    t = KdTree(pts)
    seen = np.zeros(len(pts), dtype=int)
    for node in range(len(t.split_dim)):
        if t.split_dim[node] < 0:
            for i in range(t.start[node], t.end[node]):
                seen[t.perm[i]] += 1
    assert np.all(seen == 1)


def test_depth_balanced():
    rng = np.random.default_rng(37)
    for n in (50, 1000, 20_000):
        pts = rng.normal(size=(n, 3))
        t = KdTree(pts)
        bound = 2 * np.log2(max(n / LEAF_SIZE, 2)) + 4
        assert t.depth() <= bound


def test_knn_all_matches_single_queries():
    rng = np.random.default_rng(41)
    pts = rng.normal(size=(200, 3))
    t = KdTree(pts)
    idx_all, d2_all = t.knn_all(8)
    for i in range(0, 200, 17):
        idx, dist = t.knn(pts[i], 8)
        assert np.array_equal(idx_all[i], idx)
        assert np.allclose(np.sqrt(d2_all[i]), dist)
        assert idx_all[i, 0] == i  # self comes first at distance 0
