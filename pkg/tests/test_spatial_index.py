import numpy as np
import pytest
from hypothesis import given, strategies as st

from netqual.spatial_index import PointIndex, SpatialIndexError

from conftest import brute_knn


def test_single_point():
    idx = PointIndex([[1.0, 2.0]])
    assert len(idx) == 1
    assert idx.knn((0, 0), 1)[0].id == 0


def test_small_examples():
    idx = PointIndex([[0, 0], [1, 0], [2, 0]])
    assert idx.knn((0, 0), 1) == [(0, 0.0)]
    nb = idx.knn((0.9, 0), 2)
    assert [n.id for n in nb] == [1, 0]
    assert nb[0].dist == pytest.approx(0.1) and nb[1].dist == pytest.approx(0.9)


def test_tie_lower_id_first():
    idx = PointIndex([[1, 0], [-1, 0], [0, 1]])
    assert [n.id for n in idx.knn((0, 0), 3)] == [0, 1, 2]


def test_kth_distance_345():
    idx = PointIndex([[0, 0], [3, 4]])
    assert idx.kth_distance((0, 0), 2) == 5.0
    assert idx.kth_distance((0, 0), 1) == 0.0


@pytest.mark.parametrize("k", [0, 4])
def test_k_out_of_range(k):
    idx = PointIndex([[0, 0], [1, 1], [2, 2]])
    with pytest.raises(SpatialIndexError):
        idx.knn((0, 0), k)


def test_rejects_duplicates_and_empty():
    with pytest.raises(SpatialIndexError):
        PointIndex([[0, 0], [1, 1], [0, 0]])
    with pytest.raises(SpatialIndexError):
        PointIndex(np.empty((0, 2)))


@pytest.mark.parametrize("k", [1, 5, 10])
def test_matches_brute_force_10k(rng, k):
    pts = rng.uniform(-5, 5, size=(10_000, 2))
    idx = PointIndex(pts)
    qs = rng.uniform(-6, 6, size=(100, 2))
    ids, dists = idx.query(qs, k)
    for q, i, d in zip(qs, ids, dists):
        bi, bd = brute_knn(pts, q, k)
        assert np.array_equal(i, bi)
        assert np.array_equal(d, bd)


def test_kth_distance_brute_force(rng):
    pts = rng.uniform(0, 1, size=(1000, 2))
    idx = PointIndex(pts)
    for q in rng.uniform(0, 1, size=(50, 2)):
        assert idx.kth_distance(q, 7) == brute_knn(pts, q, 7)[1][-1]


def test_lattice_ties(rng):
    g = np.arange(12, dtype=float)
    pts = np.array([(x, y) for x in g for y in g])
    pts = pts[rng.permutation(len(pts))]
    idx = PointIndex(pts)
    qs = np.vstack([pts[:40], pts[:40] + 0.5])
    for k in (1, 4, 5, 9, 13):
        ids, dists = idx.query(qs, k)
        for q, i, d in zip(qs, ids, dists):
            bi, bd = brute_knn(pts, q, k)
            assert np.array_equal(i, bi) and np.array_equal(d, bd)


def test_self_query_zero(rng):
    pts = rng.normal(size=(500, 2))
    idx = PointIndex(pts)
    assert np.all(idx.kth_distances(pts, 1) == 0.0)


def test_equirect_scales_longitude():
    idx = PointIndex([[0, 60], [1, 60]], metric="equirect")
    assert idx.kth_distance((0, 60), 2) == pytest.approx(np.cos(np.radians(60)))


@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=2, max_size=60,
                unique=True),
       st.tuples(st.floats(-25, 25), st.floats(-25, 25)))
def test_property_oracle_and_monotone(pts, q):
    pts = np.asarray(pts, dtype=float) / 4.0
    q = np.asarray(q)
    idx = PointIndex(pts)
    prev = -1.0
    for k in range(1, len(pts) + 1):
        ids, d = idx.query(q[None, :], k)
        bi, bd = brute_knn(pts, q, k)
        assert np.array_equal(ids[0], bi) and np.array_equal(d[0], bd)
        assert d[0, -1] >= prev
        prev = d[0, -1]
