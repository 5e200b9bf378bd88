"""Tile measurement records: ingestion, scoring and summaries.

Coordinates are geographic degrees (lon east, lat north). Speeds are kept in
kbps as in the Ookla open data tiles; the composite score is in Mbps units.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

import numpy as np

CRS_NOTE = "geographic degrees (WGS84 lon/lat)"

LONLAT_HEADER = ("lon", "lat", "avg_d_kbps", "avg_u_kbps", "tests", "devices")
QUADKEY_HEADER = ("quadkey", "avg_d_kbps", "avg_u_kbps", "tests", "devices")
CANONICAL_HEADER = LONLAT_HEADER + ("score",)


class DataError(ValueError):
    """Base class for problems with input data."""


class IngestError(DataError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class EmptyDatasetError(DataError):
    pass


class QuadkeyError(DataError):
    pass


@dataclass(frozen=True)
class ScoreRule:
    w_down: float = 1.0
    w_up: float = 1.0
    unit_divisor: float = 1000.0

    def __post_init__(self):
        if self.w_down < 0 or self.w_up < 0 or self.w_down + self.w_up <= 0:
            raise ValueError("score weights must be >= 0 with a positive sum")
        if self.unit_divisor <= 0:
            raise ValueError("unit_divisor must be positive")


def compute_score(download_kbps, upload_kbps, rule: ScoreRule = ScoreRule()):
    """Weighted sum of download and upload speeds, converted to Mbps.

    Works on scalars and numpy arrays alike.
    """
    return (rule.w_down * download_kbps + rule.w_up * upload_kbps) / rule.unit_divisor


@dataclass(frozen=True)
class SamplePoint:
    id: int
    lon: float
    lat: float
    download_kbps: float
    upload_kbps: float
    tests: int
    devices: int
    score: float


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Columnar, immutable collection of tile measurements.

    Point ``i`` has id ``i``; the arrays are read-only.
    """

    lon: np.ndarray
    lat: np.ndarray
    download_kbps: np.ndarray
    upload_kbps: np.ndarray
    tests: np.ndarray
    devices: np.ndarray
    score: np.ndarray
    crs_note: str = field(default=CRS_NOTE)

    def __post_init__(self):
        n = len(self.lon)
        for name in ("lat", "download_kbps", "upload_kbps", "tests", "devices", "score"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has wrong length")
        for name, dtype in (("lon", float), ("lat", float), ("download_kbps", float),
                            ("upload_kbps", float), ("tests", np.int64),
                            ("devices", np.int64), ("score", float)):
            object.__setattr__(self, name, _readonly(np.asarray(getattr(self, name), dtype=dtype)))

    def __len__(self) -> int:
        return len(self.lon)

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def locations(self) -> np.ndarray:
        return np.column_stack([self.lon, self.lat])

    def point(self, i: int) -> SamplePoint:
        return SamplePoint(int(i), float(self.lon[i]), float(self.lat[i]),
                           float(self.download_kbps[i]), float(self.upload_kbps[i]),
                           int(self.tests[i]), int(self.devices[i]), float(self.score[i]))

    @property
    def points(self) -> Iterator[SamplePoint]:
        return (self.point(i) for i in range(len(self)))

    def subset(self, ids) -> "Dataset":
        """Dataset of the selected points, renumbered 0..len(ids)-1."""
        ids = np.asarray(ids, dtype=np.int64)
        return Dataset(self.lon[ids], self.lat[ids], self.download_kbps[ids],
                       self.upload_kbps[ids], self.tests[ids], self.devices[ids],
                       self.score[ids], self.crs_note)

    def with_values(self, score=None, download_kbps=None, upload_kbps=None) -> "Dataset":
        return Dataset(self.lon, self.lat,
                       self.download_kbps if download_kbps is None else download_kbps,
                       self.upload_kbps if upload_kbps is None else upload_kbps,
                       self.tests, self.devices,
                       self.score if score is None else score, self.crs_note)

    def equals(self, other: "Dataset") -> bool:
        cols = ("lon", "lat", "download_kbps", "upload_kbps", "tests", "devices", "score")
        return len(self) == len(other) and all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in cols)


def tile_centroid(quadkey: str) -> tuple[float, float]:
    """Centre (lon, lat) of a Bing/Web-Mercator tile addressed by ``quadkey``."""
    if not quadkey:
        raise QuadkeyError("empty quadkey")
    x = y = 0
    for ch in quadkey:
        if ch not in "0123":
            raise QuadkeyError(f"invalid quadkey digit {ch!r} in {quadkey!r}")
        d = ord(ch) - 48
        x = (x << 1) | (d & 1)
        y = (y << 1) | (d >> 1)
    size = 1 << len(quadkey)
    fx = (x + 0.5) / size
    fy = (y + 0.5) / size
    lon = fx * 360.0 - 180.0
    lat = math.degrees(math.atan(math.sinh(math.pi * (1.0 - 2.0 * fy))))
    return lon, lat


def tile_bounds(quadkey: str) -> tuple[float, float, float, float]:
    """(lon_min, lat_min, lon_max, lat_max) of a quadkey tile."""
    if not quadkey or any(ch not in "0123" for ch in quadkey):
        raise QuadkeyError(f"invalid quadkey {quadkey!r}")
    x = y = 0
    for ch in quadkey:
        d = ord(ch) - 48
        x = (x << 1) | (d & 1)
        y = (y << 1) | (d >> 1)
    size = 1 << len(quadkey)

    def lat_of(fy):
        return math.degrees(math.atan(math.sinh(math.pi * (1.0 - 2.0 * fy))))

    return (x / size * 360.0 - 180.0, lat_of((y + 1) / size),
            (x + 1) / size * 360.0 - 180.0, lat_of(y / size))


def _number(raw: str, name: str, line: int, integer: bool = False):
    try:
        value = int(raw) if integer else float(raw)
    except (TypeError, ValueError):
        if integer:
            # accept "3.0"-style integers written by spreadsheets
            try:
                f = float(raw)
            except (TypeError, ValueError):
                f = math.nan
            if math.isfinite(f) and f == int(f):
                return int(f)
        raise IngestError(line, f"non-numeric {name}: {raw!r}") from None
    if not integer and not math.isfinite(value):
        raise IngestError(line, f"non-finite {name}: {raw!r}")
    return value


def parse_records(source: IO[str] | Iterable[str], rule: ScoreRule = ScoreRule()) -> Dataset:
    """Parse CSV tile records into a de-duplicated :class:`Dataset`.

    Rows that share an exact (lon, lat) are merged: speeds are averaged with
    test-count weights and tests/devices are summed. Points keep the order in
    which their location first appears.
    """
    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyDatasetError("input has no header row") from None
    cols = {name: i for i, name in enumerate(header)}
    if all(c in cols for c in LONLAT_HEADER):
        use_quadkey = False
    elif all(c in cols for c in QUADKEY_HEADER):
        use_quadkey = True
    else:
        raise IngestError(1, "header must contain lon,lat,avg_d_kbps,avg_u_kbps,tests,devices "
                             "or quadkey,avg_d_kbps,avg_u_kbps,tests,devices")

    slot: dict[tuple[float, float], int] = {}
    lon, lat, dsum, usum, tests, devices = [], [], [], [], [], []
    raw: list[tuple[float, float] | None] = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not v.strip() for v in row):
            continue
        if len(row) < len(header):
            raise IngestError(line, f"expected {len(header)} fields, got {len(row)}")
        if use_quadkey:
            try:
                x, y = tile_centroid(row[cols["quadkey"]].strip())
            except QuadkeyError as e:
                raise IngestError(line, str(e)) from None
        else:
            x = _number(row[cols["lon"]], "lon", line)
            y = _number(row[cols["lat"]], "lat", line)
        if not -180.0 <= x <= 180.0:
            raise IngestError(line, f"lon {x} out of range [-180, 180]")
        if not -90.0 <= y <= 90.0:
            raise IngestError(line, f"lat {y} out of range [-90, 90]")
        d = _number(row[cols["avg_d_kbps"]], "avg_d_kbps", line)
        u = _number(row[cols["avg_u_kbps"]], "avg_u_kbps", line)
        if d < 0 or u < 0:
            raise IngestError(line, "negative speed")
        t = _number(row[cols["tests"]], "tests", line, integer=True)
        dv = _number(row[cols["devices"]], "devices", line, integer=True)
        if t < 1 or dv < 1:
            raise IngestError(line, "tests and devices must be >= 1")

        key = (x, y)
        i = slot.get(key)
        if i is None:
            slot[key] = len(lon)
            lon.append(x)
            lat.append(y)
            dsum.append(d * t)
            usum.append(u * t)
            tests.append(t)
            devices.append(dv)
            raw.append((d, u))
        else:
            raw[i] = None
            dsum[i] += d * t
            usum[i] += u * t
            tests[i] += t
            devices[i] += dv

    if not lon:
        raise EmptyDatasetError("no data rows after header")
    t = np.asarray(tests, dtype=np.int64)
    down = np.asarray(dsum) / t
    up = np.asarray(usum) / t
    # unmerged rows keep their speeds bit-exact
    for i, r in enumerate(raw):
        if r is not None:
            down[i], up[i] = r
    return Dataset(np.asarray(lon), np.asarray(lat), down, up, t,
                   np.asarray(devices, dtype=np.int64), compute_score(down, up, rule))


def read_dataset(path, rule: ScoreRule = ScoreRule()) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_records(fh, rule)


def write_csv(dataset: Dataset, out: IO[str]) -> None:
    """Write the canonical lon/lat CSV form (floats in shortest round-trip repr)."""
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CANONICAL_HEADER)
    for p in dataset.points:
        w.writerow([repr(p.lon), repr(p.lat), repr(p.download_kbps), repr(p.upload_kbps),
                    p.tests, p.devices, repr(p.score)])


def to_csv_string(dataset: Dataset) -> str:
    buf = io.StringIO()
    write_csv(dataset, buf)
    return buf.getvalue()


def summarize(dataset: Dataset, ddof: int = 0) -> dict:
    """Count and score statistics; population stddev unless ``ddof`` says otherwise."""
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot summarize an empty dataset")
    s = dataset.score
    return {
        "n": len(dataset),
        "mean": float(np.mean(s)),
        "min": float(np.min(s)),
        "max": float(np.max(s)),
        "stddev": float(np.std(s, ddof=ddof)) if len(s) > ddof else 0.0,
    }
