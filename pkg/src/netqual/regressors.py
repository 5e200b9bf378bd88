"""Gaussian-kernel Nadaraya-Watson regression on k nearest neighbours.

Two bandwidth rules share one prediction path:

* fixed: ``h = c`` everywhere;
* self-tuning: ``h(x) = c * R_k(x)**2`` where ``R_k(x)`` is the distance from
  ``x`` to its k-th nearest training location.

The same ``k`` truncates the kernel sum to the k nearest neighbours. A query
that coincides with a training location counts that location as a neighbour.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .preprocess import GridSegmentation, Region
from .spatial_index import PointIndex

SQRT_2PI = math.sqrt(2.0 * math.pi)

DEFAULT_CS = (0.005, 0.01, 0.02, 0.05, 0.075)
DEFAULT_KS = (5, 10)

# fallback flags recorded per prediction
FLAG_OK = 0
FLAG_DEGENERATE = 1  # h == 0: averaged the zero-distance neighbours
FLAG_UNDERFLOW = 2   # no usable kernel weight: unweighted kNN mean


class Kind(str, enum.Enum):
    FIXED = "fixed"
    SELF_TUNING = "self_tuning"


@dataclass(frozen=True)
class KernelConfig:
    kind: Kind
    c: float
    k: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"c must be a positive finite number, got {self.c}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k}")
        object.__setattr__(self, "k", int(self.k))


@dataclass(frozen=True)
class RegionParams:
    dense: KernelConfig
    sparse: KernelConfig

    def for_region(self, region) -> KernelConfig:
        return self.dense if Region(region) is Region.DENSE else self.sparse


def gaussian_kernel(u):
    return np.exp(-0.5 * np.square(u)) / SQRT_2PI


def bandwidths(config: KernelConfig, kth_dist) -> np.ndarray:
    """Bandwidth for each query given its k-th neighbour distance."""
    kth_dist = np.asarray(kth_dist, dtype=float)
    if config.kind is Kind.FIXED:
        return np.full(kth_dist.shape, config.c)
    return config.c * kth_dist * kth_dist


def bandwidth(config: KernelConfig, train_index: PointIndex, x) -> float:
    """Bandwidth at a single location; 0.0 signals a degenerate self-tuning bandwidth."""
    if config.kind is Kind.FIXED:
        return float(config.c)
    r = train_index.kth_distance(x, config.k)
    return float(config.c * r * r)


def weighted_average(dists: np.ndarray, targets: np.ndarray, h: np.ndarray):
    """Kernel-weighted mean of each row of ``targets``.

    The 1/h and 1/sqrt(2 pi) factors cancel in the ratio and are left out;
    exponents are shifted by their row maximum before ``exp``.

    Returns ``(y_hat, flags)``.
    """
    dists = np.atleast_2d(np.asarray(dists, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    h = np.broadcast_to(np.asarray(h, dtype=float), (len(dists),))
    m = len(dists)
    out = np.empty(m)
    flags = np.zeros(m, dtype=np.int8)

    degenerate = ~(h > 0)
    ok = ~degenerate
    if ok.any():
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            z = dists[ok] / h[ok, None]
            logw = -0.5 * z * z
        top = logw.max(axis=1)
        usable = np.isfinite(top)
        w = np.exp(logw[usable] - top[usable, None])
        rows = np.nonzero(ok)[0]
        out[rows[usable]] = (w * targets[ok][usable]).sum(axis=1) / w.sum(axis=1)
        bad = rows[~usable]
        if len(bad):
            out[bad] = targets[bad].mean(axis=1)
            flags[bad] = FLAG_UNDERFLOW
    for i in np.nonzero(degenerate)[0]:
        zero = dists[i] == 0
        out[i] = targets[i, zero].mean() if zero.any() else targets[i].mean()
        flags[i] = FLAG_DEGENERATE
    return out, flags


def _predict_neighbors(config: KernelConfig, dists, targets):
    return weighted_average(dists, targets, bandwidths(config, dists[:, -1]))


@dataclass(frozen=True, eq=False)
class FittedKernelModel:
    """Training index, targets and per-region configs; immutable once built."""

    index: PointIndex
    targets: np.ndarray
    params: RegionParams
    segmentation: GridSegmentation

    def __post_init__(self):
        t = np.array(self.targets, dtype=float)
        if len(t) != len(self.index):
            raise ValueError("index and targets differ in length")
        t.setflags(write=False)
        object.__setattr__(self, "targets", t)

    def predict(self, X, regions=None):
        """Predict at each row of ``X``.

        Returns ``(y_hat, flags, regions)``; ``regions`` is looked up in the
        segmentation unless given.
        """
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        if regions is None:
            regions = self.segmentation.regions(X[:, 0], X[:, 1])
        regions = np.asarray(regions)
        y = np.empty(len(X))
        flags = np.zeros(len(X), dtype=np.int8)
        for region in (Region.DENSE, Region.SPARSE):
            sel = np.nonzero(regions == region.value)[0]
            if len(sel) == 0:
                continue
            cfg = self.params.for_region(region)
            ids, d = self.index.query(X[sel], cfg.k)
            y[sel], flags[sel] = _predict_neighbors(cfg, d, self.targets[ids])
        return y, flags, regions

    def predict_one(self, x) -> float:
        return float(self.predict(np.asarray(x, dtype=float).reshape(1, 2))[0][0])


def fit(locations, targets, params: RegionParams, segmentation: GridSegmentation,
        metric: str = "planar") -> FittedKernelModel:
    return FittedKernelModel(PointIndex(locations, metric=metric), targets, params, segmentation)


@dataclass
class CVResult:
    params: RegionParams
    # (region, c, k) -> mean validation MSE over the folds that had that region
    table: dict = field(default_factory=dict)


def fold_assignment(n: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, folds)]


def cross_validate(locations, targets, kind, segmentation: GridSegmentation,
                   candidate_cs=DEFAULT_CS, candidate_ks=DEFAULT_KS, folds: int = 5,
                   seed: int = 0, metric: str = "planar") -> CVResult:
    """Pick (c, k) per region by k-fold validation MSE.

    Each region is scored only on validation points that fall in cells of
    that region. Ties go to the smaller k, then the smaller c.
    """
    kind = Kind(kind)
    X = np.asarray(locations, dtype=float).reshape(-1, 2)
    y = np.asarray(targets, dtype=float)
    cs = sorted(set(float(c) for c in candidate_cs))
    ks = sorted(set(int(k) for k in candidate_ks))
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if not cs or not ks:
        raise ValueError("candidate grids must be non-empty")
    parts = fold_assignment(len(X), folds, seed)
    if len(X) - max(len(p) for p in parts) < ks[-1]:
        raise ValueError(f"fold training sides are smaller than k={ks[-1]}")
    regions = segmentation.regions(X[:, 0], X[:, 1])

    sums = {(r, c, k): 0.0 for r in (Region.DENSE, Region.SPARSE) for c in cs for k in ks}
    used = {Region.DENSE: 0, Region.SPARSE: 0}
    for val in parts:
        mask = np.ones(len(X), dtype=bool)
        mask[val] = False
        train = np.nonzero(mask)[0]
        index = PointIndex(X[train], metric=metric)
        ids, d = index.query(X[val], ks[-1])
        yn = y[train][ids]
        yv = y[val]
        for region in (Region.DENSE, Region.SPARSE):
            sel = regions[val] == region.value
            if not sel.any():
                continue
            used[region] += 1
            for k in ks:
                for c in cs:
                    cfg = KernelConfig(kind, c, k)
                    pred, _ = _predict_neighbors(cfg, d[sel, :k], yn[sel, :k])
                    err = pred - yv[sel]
                    sums[(region, c, k)] += float(np.mean(err * err))

    table = {}
    best = {}
    for region in (Region.DENSE, Region.SPARSE):
        if used[region] == 0:
            raise ValueError(f"no validation points in the {region.value} region in any fold")
        for k in ks:
            for c in cs:
                score = sums[(region, c, k)] / used[region]
                table[(region.value, c, k)] = score
                if region not in best or score < best[region][0]:
                    best[region] = (score, c, k)
    params = RegionParams(
        dense=KernelConfig(kind, best[Region.DENSE][1], best[Region.DENSE][2]),
        sparse=KernelConfig(kind, best[Region.SPARSE][1], best[Region.SPARSE][2]))
    return CVResult(params, table)
