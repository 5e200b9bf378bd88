"""Synthetic tile measurements with a dense core and a sparse outer ring."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SynthParams:
    n_dense: int = 4500
    n_sparse: int = 500
    # continental-scale extent in degrees; see scripts/scale_scan.py for how
    # the fixed vs self-tuning comparison shifts with the coordinate scale
    dense_std: float = 3.5
    ring_inner: float = 12.0
    ring_outer: float = 26.0
    center_lon: float = -98.0
    center_lat: float = 39.0
    # noise standard deviation as a fraction of the local download speed
    noise: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_dense < 0 or self.n_sparse < 0 or self.n_dense + self.n_sparse < 1:
            raise ValueError("need at least one point")
        if self.dense_std <= 0 or not 0 <= self.ring_inner < self.ring_outer:
            raise ValueError("invalid cluster/ring geometry")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")


def field_mbps(lon, lat, center_lon: float, center_lat: float, length: float = 1.0):
    """Noise-free (download, upload) speeds in Mbps at the given locations.

    ``length`` stretches the pattern so its shape relative to the point cloud
    does not depend on the coordinate extent.
    """
    x = (np.asarray(lon, dtype=float) - center_lon) / length
    y = (np.asarray(lat, dtype=float) - center_lat) / length
    r2 = x * x + y * y
    down = 45.0 + 110.0 * np.exp(-r2 / 2.0) + 30.0 * np.sin(1.7 * x + 0.4) * np.cos(1.3 * y)
    up = 6.0 + 18.0 * np.exp(-r2 / 1.5) + 5.0 * np.cos(1.1 * x - 0.8 * y)
    return down, up


def generate(p: SynthParams):
    """Return ``(lon, lat, down_kbps, up_kbps, tests, devices)`` arrays."""
    rng = np.random.default_rng(p.seed)
    dense = rng.normal(0.0, p.dense_std, size=(p.n_dense, 2))
    # uniform over the annulus area
    radius = np.sqrt(rng.uniform(p.ring_inner ** 2, p.ring_outer ** 2, size=p.n_sparse))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=p.n_sparse)
    ring = np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    xy = np.vstack([dense, ring])
    lon = p.center_lon + xy[:, 0]
    lat = p.center_lat + xy[:, 1]
    down, up = field_mbps(lon, lat, p.center_lon, p.center_lat, p.ring_outer / 2.6)
    tests = rng.geometric(0.5, size=len(lon))
    devices = np.minimum(tests, 1 + rng.poisson(0.5, size=len(lon)))
    # fewer tests -> noisier tile average
    scale = p.noise / np.sqrt(tests)
    down = np.maximum(down * (1.0 + scale * rng.standard_normal(len(lon))), 0.0)
    up = np.maximum(up * (1.0 + scale * rng.standard_normal(len(lon))), 0.0)
    return lon, lat, down * 1000.0, up * 1000.0, tests, devices


def write(p: SynthParams, path) -> int:
    lon, lat, d, u, t, dv = generate(p)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lon", "lat", "avg_d_kbps", "avg_u_kbps", "tests", "devices"])
        for row in zip(lon.tolist(), lat.tolist(), d.tolist(), u.tolist(), t.tolist(), dv.tolist()):
            w.writerow([repr(row[0]), repr(row[1]), repr(row[2]), repr(row[3]), row[4], row[5]])
    return len(lon)
