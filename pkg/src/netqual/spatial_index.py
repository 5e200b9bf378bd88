"""Exact k-nearest-neighbour queries over sample locations.

Candidates come from a scipy kd-tree; distances are then recomputed with
``sqrt(dx*dx + dy*dy)`` and ordered by (distance, id), so every result is
identical to a linear scan with the same tie rule.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

METRICS = ("planar", "equirect")


class SpatialIndexError(ValueError):
    pass


class Neighbor(NamedTuple):
    id: int
    dist: float


class PointIndex:
    """Immutable kd-tree over (lon, lat) locations.

    Parameters
    ----------
    locations : (n, 2) array
        Point coordinates; row ``i`` has id ``i``.
    metric : {"planar", "equirect"}
        ``planar`` uses raw degrees. ``equirect`` scales longitude by the
        cosine of the mean indexed latitude before measuring distances.
    """

    def __init__(self, locations, metric: str = "planar"):
        xy = np.array(locations, dtype=float, copy=True).reshape(-1, 2)
        if len(xy) == 0:
            raise SpatialIndexError("cannot build an index over zero points")
        if metric not in METRICS:
            raise SpatialIndexError(f"unknown metric {metric!r}")
        if not np.all(np.isfinite(xy)):
            raise SpatialIndexError("non-finite coordinates")
        if len(np.unique(xy, axis=0)) != len(xy):
            raise SpatialIndexError("duplicate coordinates; merge duplicates before indexing")
        self.metric = metric
        self.lon_scale = math.cos(math.radians(float(np.mean(xy[:, 1])))) if metric == "equirect" else 1.0
        self.locations = xy
        self.locations.setflags(write=False)
        self._xy = self._project(xy)
        self._xy.setflags(write=False)
        self._tree = cKDTree(self._xy, balanced_tree=True, compact_nodes=True)

    def __len__(self) -> int:
        return len(self._xy)

    def _project(self, q: np.ndarray) -> np.ndarray:
        if self.lon_scale == 1.0:
            return np.array(q, dtype=float)
        out = np.array(q, dtype=float)
        out[..., 0] *= self.lon_scale
        return out

    def _check_k(self, k: int) -> None:
        if k < 1:
            raise SpatialIndexError(f"k must be >= 1, got {k}")
        if k > len(self):
            raise SpatialIndexError(f"k={k} exceeds index size {len(self)}")

    def query(self, queries, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Batched kNN: ``(ids, dists)``, each of shape (m, k), sorted by (dist, id)."""
        self._check_k(k)
        q = self._project(np.asarray(queries, dtype=float).reshape(-1, 2))
        m = len(q)
        n = len(self)
        if m == 0:
            return np.empty((0, k), dtype=np.int64), np.empty((0, k))
        kk = min(n, 2 * k + 1)
        _, cand = self._tree.query(q, k=kk)
        cand = np.asarray(cand, dtype=np.int64).reshape(m, kk)
        d = self._dist(cand, q)
        order = np.lexsort((cand, d), axis=-1)
        cand = np.take_along_axis(cand, order, axis=1)
        d = np.take_along_axis(d, order, axis=1)
        ids, dists = cand[:, :k].copy(), d[:, :k].copy()
        if kk < n:
            # candidate list is complete only if the worst candidate lies
            # strictly beyond the k-th distance (with slack for tree rounding)
            rk = dists[:, -1]
            unsafe = np.nonzero(d[:, -1] <= rk * (1 + 1e-9) + 1e-300)[0]
            for i in unsafe:
                ids[i], dists[i] = self._exact_row(q[i], rk[i], k)
        return ids, dists

    def _dist(self, cand: np.ndarray, q: np.ndarray) -> np.ndarray:
        p = self._xy[cand]
        dx = p[..., 0] - q[:, None, 0]
        dy = p[..., 1] - q[:, None, 1]
        return np.sqrt(dx * dx + dy * dy)

    def _exact_row(self, q: np.ndarray, radius: float, k: int):
        cand = np.asarray(self._tree.query_ball_point(q, radius * (1 + 1e-6) + 1e-300), dtype=np.int64)
        if len(cand) < k:
            cand = np.arange(len(self))
        d = self._dist(cand[None, :], q[None, :])[0]
        order = np.lexsort((cand, d))[:k]
        return cand[order], d[order]

    def knn(self, q, k: int) -> list[Neighbor]:
        ids, dists = self.query(np.asarray(q, dtype=float).reshape(1, 2), k)
        return [Neighbor(int(i), float(d)) for i, d in zip(ids[0], dists[0])]

    def kth_distance(self, q, k: int) -> float:
        return float(self.query(np.asarray(q, dtype=float).reshape(1, 2), k)[1][0, -1])

    def kth_distances(self, queries, k: int) -> np.ndarray:
        return self.query(queries, k)[1][:, -1]


def build(dataset, metric: str = "planar") -> PointIndex:
    """Index over all point locations of ``dataset``."""
    return PointIndex(dataset.locations, metric=metric)
