"""Regular-grid rasters of a predicted field, written as CSV, PGM and SVG."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def grid_centers(bounds, rows: int, cols: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell-centre coordinates; row 0 is the northern edge.

    Returns ``(lon, lat)`` arrays of shape (rows, cols).
    """
    lon_min, lat_min, lon_max, lat_max = map(float, bounds)
    if not (lon_max > lon_min and lat_max > lat_min):
        raise ValueError(f"degenerate bounds {bounds}")
    if rows < 1 or cols < 1:
        raise ValueError("raster needs at least one row and column")
    lon = lon_min + (np.arange(cols) + 0.5) * (lon_max - lon_min) / cols
    lat = lat_max - (np.arange(rows) + 0.5) * (lat_max - lat_min) / rows
    return np.meshgrid(lon, lat)


def normalize(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Min-max scale to 0..255 (uint8); a constant raster maps to 0."""
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi > lo:
        scaled = np.rint((values - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(values)
    return scaled.astype(np.uint8), lo, hi


def write_matrix_csv(values: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in values.tolist():
            w.writerow([repr(v) for v in row])


def write_pgm(gray: np.ndarray, path) -> None:
    rows, cols = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(gray, dtype=np.uint8).tobytes())


# low -> high: dark blue, teal, yellow
RAMP = np.array([[32, 38, 110], [36, 160, 150], [250, 230, 60]], dtype=float)


def ramp_color(level: int) -> str:
    t = level / 255.0 * (len(RAMP) - 1)
    i = min(int(t), len(RAMP) - 2)
    rgb = RAMP[i] + (t - i) * (RAMP[i + 1] - RAMP[i])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in rgb)


def write_svg(gray: np.ndarray, path, cell: int = 8) -> None:
    rows, cols = gray.shape
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * cell}" '
             f'height="{rows * cell}" shape-rendering="crispEdges">']
    for r in range(rows):
        for c in range(cols):
            parts.append(f'<rect x="{c * cell}" y="{r * cell}" width="{cell}" height="{cell}" '
                         f'fill="{ramp_color(int(gray[r, c]))}"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


def write_raster(values: np.ndarray, stem, bounds) -> list[Path]:
    """Write ``stem``.csv/.pgm/.svg plus a ``stem``.range.txt sidecar."""
    stem = Path(stem)
    gray, lo, hi = normalize(values)
    paths = [stem.with_suffix(s) for s in (".csv", ".pgm", ".svg", ".range.txt")]
    write_matrix_csv(values, paths[0])
    write_pgm(gray, paths[1])
    write_svg(gray, paths[2])
    lon_min, lat_min, lon_max, lat_max = bounds
    paths[3].write_text(
        f"min = {lo!r}\nmax = {hi!r}\nrows = {values.shape[0]}\ncols = {values.shape[1]}\n"
        f"bounds = {lon_min!r},{lat_min!r},{lon_max!r},{lat_max!r}\n", encoding="utf-8")
    return paths


def point_density(lon, lat, grid_lon, grid_lat, bandwidth: float | None = None) -> np.ndarray:
    """Fixed-bandwidth Gaussian density of point locations on a grid (Scott's rule by default)."""
    pts = np.column_stack([lon, lat])
    n = len(pts)
    if bandwidth is None:
        bandwidth = float(np.mean(np.std(pts, axis=0))) * n ** (-1.0 / 6.0) or 1.0
    q = np.column_stack([grid_lon.ravel(), grid_lat.ravel()])
    out = np.empty(len(q))
    for start in range(0, len(q), 512):
        block = q[start:start + 512]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
        out[start:start + 512] = np.exp(-0.5 * d2 / bandwidth ** 2).sum(1)
    out /= n * 2.0 * np.pi * bandwidth ** 2
    return out.reshape(grid_lon.shape)
