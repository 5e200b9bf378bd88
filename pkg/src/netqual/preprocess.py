"""kNN smoothing, train/test splitting and the dense/sparse grid."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .data_model import Dataset
from .spatial_index import PointIndex


class Region(str, enum.Enum):
    DENSE = "dense"
    SPARSE = "sparse"
    ALL = "all"


def knn_average(dataset: Dataset, index: PointIndex, k: int, speeds: bool = True) -> Dataset:
    """Replace each target by the plain mean over its k nearest neighbours.

    The point itself is its own first neighbour (distance 0), so ``k=1`` is
    the identity. All means use the original values. With ``speeds`` the
    download/upload columns are smoothed with the same neighbour sets.
    """
    if len(index) != len(dataset):
        raise ValueError("index was not built over this dataset")
    ids, _ = index.query(dataset.locations, k)
    if k == 1:
        return dataset.with_values()
    score = _row_means(dataset.score[ids])
    if not speeds:
        return dataset.with_values(score=score)
    return dataset.with_values(score=score,
                               download_kbps=_row_means(dataset.download_kbps[ids]),
                               upload_kbps=_row_means(dataset.upload_kbps[ids]))


def _row_means(values: np.ndarray) -> np.ndarray:
    # correctly rounded sums: the result does not depend on neighbour order
    k = values.shape[1]
    return np.fromiter((math.fsum(row) / k for row in values.tolist()), dtype=float, count=len(values))


@dataclass(frozen=True, eq=False)
class Split:
    train_ids: np.ndarray
    test_ids: np.ndarray
    seed: int
    ratio: float

    def __eq__(self, other):
        return (isinstance(other, Split) and self.seed == other.seed and self.ratio == other.ratio
                and np.array_equal(self.train_ids, other.train_ids)
                and np.array_equal(self.test_ids, other.test_ids))


def split(n: int, ratio: float = 0.8, seed: int = 0) -> Split:
    """Uniformly random train/test split with ``round(ratio * n)`` training ids.

    Ids on each side are returned sorted.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    if n < 2:
        raise ValueError("need at least 2 points to split")
    n_train = int(math.floor(ratio * n + 0.5))
    if n_train == 0 or n_train == n:
        raise ValueError(f"ratio {ratio} leaves one side of the split empty for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return Split(np.sort(perm[:n_train]), np.sort(perm[n_train:]), seed, ratio)


@dataclass(frozen=True, eq=False)
class GridSegmentation:
    """Uniform rows x cols grid over a bounding box with dense/sparse cells.

    Rows run along latitude (row 0 at ``lat_min``), columns along longitude.
    Points on the right/top edge fall in the last column/row; points outside
    the box are clamped to the nearest cell.
    """

    bbox: tuple[float, float, float, float]
    rows: int
    cols: int
    counts: np.ndarray
    dense_mask: np.ndarray

    def cell_of(self, lon, lat) -> tuple[np.ndarray, np.ndarray]:
        lon_min, lat_min, lon_max, lat_max = self.bbox
        return (_bin(np.asarray(lat, dtype=float), lat_min, lat_max, self.rows),
                _bin(np.asarray(lon, dtype=float), lon_min, lon_max, self.cols))

    def is_dense(self, lon, lat) -> np.ndarray:
        r, c = self.cell_of(lon, lat)
        return self.dense_mask[r, c]

    def regions(self, lon, lat) -> np.ndarray:
        """Array of ``"dense"``/``"sparse"`` labels."""
        return np.where(self.is_dense(lon, lat), Region.DENSE.value, Region.SPARSE.value)


def _bin(v: np.ndarray, lo: float, hi: float, n: int) -> np.ndarray:
    width = hi - lo
    if width <= 0:
        return np.zeros(np.shape(v), dtype=np.int64)
    idx = np.floor((v - lo) / width * n)
    return np.clip(idx, 0, n - 1).astype(np.int64)


def segment_grid(lon, lat, rows: int = 15, cols: int = 15) -> GridSegmentation:
    """Count points per cell; cells with more than the mean count are dense."""
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    if len(lon) == 0:
        raise ValueError("cannot segment zero points")
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    bbox = (float(lon.min()), float(lat.min()), float(lon.max()), float(lat.max()))
    seg = GridSegmentation(bbox, rows, cols, np.zeros((rows, cols), dtype=np.int64),
                           np.zeros((rows, cols), dtype=bool))
    r, c = seg.cell_of(lon, lat)
    counts = np.zeros((rows, cols), dtype=np.int64)
    np.add.at(counts, (r, c), 1)
    # mean = n / (rows * cols); compare in integers to avoid rounding
    dense = counts * (rows * cols) > len(lon)
    counts.setflags(write=False)
    dense.setflags(write=False)
    return GridSegmentation(bbox, rows, cols, counts, dense)


def segment_dataset(dataset: Dataset, rows: int = 15, cols: int = 15) -> GridSegmentation:
    return segment_grid(dataset.lon, dataset.lat, rows, cols)


def classify_cell(seg: GridSegmentation, point) -> Region:
    lon, lat = point
    return Region.DENSE if bool(seg.is_dense(lon, lat)) else Region.SPARSE


def stratified_downsample(train_ids, dataset: Dataset, seg: GridSegmentation,
                          fraction: float = 0.1, seed: int = 0) -> np.ndarray:
    """Pick ``ceil(fraction * count)`` training ids uniformly from every non-empty cell.

    Returns the chosen ids sorted.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    train_ids = np.asarray(train_ids, dtype=np.int64)
    if fraction == 1.0:
        return np.sort(train_ids)
    r, c = seg.cell_of(dataset.lon[train_ids], dataset.lat[train_ids])
    cell = r * seg.cols + c
    rng = np.random.default_rng(seed)
    chosen = []
    for cid in np.unique(cell):
        members = np.sort(train_ids[cell == cid])
        take = math.ceil(fraction * len(members))
        chosen.append(rng.choice(members, size=take, replace=False))
    return np.sort(np.concatenate(chosen))


def write_split(sp: Split, path) -> None:
    rows = [(int(i), "train") for i in sp.train_ids] + [(int(i), "test") for i in sp.test_ids]
    rows.sort()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "set", "seed", "ratio"])
        for i, label in rows:
            w.writerow([i, label, sp.seed, repr(sp.ratio)])


def read_split(path) -> Split:
    train, test, seed, ratio = [], [], 0, 0.8
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            (train if row["set"] == "train" else test).append(int(row["id"]))
            seed, ratio = int(row["seed"]), float(row["ratio"])
    return Split(np.array(sorted(train), dtype=np.int64), np.array(sorted(test), dtype=np.int64),
                 seed, ratio)


def write_segmentation(seg: GridSegmentation, path) -> None:
    """One line per cell: cell index, grid bbox, count and label."""
    lon_min, lat_min, lon_max, lat_max = seg.bbox
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", "lon_min", "lat_min", "lon_max", "lat_max", "count", "region"])
        for r in range(seg.rows):
            for c in range(seg.cols):
                w.writerow([r, c, repr(lon_min), repr(lat_min), repr(lon_max), repr(lat_max),
                            int(seg.counts[r, c]),
                            Region.DENSE.value if seg.dense_mask[r, c] else Region.SPARSE.value])


def read_segmentation(path) -> GridSegmentation:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty segmentation file")
    nr = max(int(r["row"]) for r in rows) + 1
    nc = max(int(r["col"]) for r in rows) + 1
    counts = np.zeros((nr, nc), dtype=np.int64)
    dense = np.zeros((nr, nc), dtype=bool)
    for r in rows:
        counts[int(r["row"]), int(r["col"])] = int(r["count"])
        dense[int(r["row"]), int(r["col"])] = r["region"] == Region.DENSE.value
    first = rows[0]
    bbox = tuple(float(first[k]) for k in ("lon_min", "lat_min", "lon_max", "lat_max"))
    return GridSegmentation(bbox, nr, nc, counts, dense)
