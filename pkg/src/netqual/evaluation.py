"""Error metrics, service tiers and per-region reports."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .preprocess import GridSegmentation, Region

PREDICTION_HEADER = ("id", "lon", "lat", "y_true", "y_pred", "region", "fallback_flag")
TIER_HEADER = ("id", "lon", "lat", "region", "true_tier", "pred_tier")

SERVED_DOWN, SERVED_UP = 100.0, 20.0
UNDERSERVED_DOWN, UNDERSERVED_UP = 25.0, 3.0


class SchemaError(ValueError):
    pass


class ServiceTier(enum.IntEnum):
    UNSERVED = 0
    UNDERSERVED = 1
    SERVED = 2


@dataclass(frozen=True)
class MetricsReport:
    region: Region
    n: int
    mae: float
    mse: float
    mne: float
    accuracy: float | None = None


def metrics(y_true, y_pred) -> tuple[float, float, float]:
    """(mean absolute, mean squared, maximum absolute) error."""
    t = np.asarray(y_true, dtype=float).ravel()
    p = np.asarray(y_pred, dtype=float).ravel()
    if len(t) != len(p):
        raise ValueError(f"length mismatch: {len(t)} vs {len(p)}")
    if len(t) == 0:
        raise ValueError("no values to evaluate")
    e = np.abs(p - t)
    return float(e.mean()), float(np.mean(e * e)), float(e.max())


def classify_service(download_mbps: float, upload_mbps: float) -> ServiceTier:
    if download_mbps < 0 or upload_mbps < 0:
        raise ValueError("speeds must be non-negative")
    if download_mbps >= SERVED_DOWN and upload_mbps >= SERVED_UP:
        return ServiceTier.SERVED
    if download_mbps >= UNDERSERVED_DOWN and upload_mbps >= UNDERSERVED_UP:
        return ServiceTier.UNDERSERVED
    return ServiceTier.UNSERVED


def classify_service_array(download_mbps, upload_mbps) -> np.ndarray:
    d = np.asarray(download_mbps, dtype=float)
    u = np.asarray(upload_mbps, dtype=float)
    if np.any(d < 0) or np.any(u < 0):
        raise ValueError("speeds must be non-negative")
    tiers = np.full(np.shape(d), int(ServiceTier.UNSERVED), dtype=np.int64)
    tiers[(d >= UNDERSERVED_DOWN) & (u >= UNDERSERVED_UP)] = ServiceTier.UNDERSERVED
    tiers[(d >= SERVED_DOWN) & (u >= SERVED_UP)] = ServiceTier.SERVED
    return tiers


def tier_shares(tiers) -> dict[ServiceTier, float]:
    tiers = np.asarray(tiers)
    return {t: float(np.mean(tiers == t)) for t in ServiceTier}


def classification_accuracy(true_tiers, pred_tiers, region_labels) -> dict[Region, float]:
    """Fraction of exact tier matches per region present and overall."""
    t = np.asarray(true_tiers)
    p = np.asarray(pred_tiers)
    r = np.asarray(region_labels)
    if not len(t) == len(p) == len(r):
        raise ValueError("tier and region vectors differ in length")
    out = {}
    for region in (Region.DENSE, Region.SPARSE):
        sel = r == region.value
        if sel.any():
            out[region] = float(np.mean(t[sel] == p[sel]))
    if len(t):
        out[Region.ALL] = float(np.mean(t == p))
    return out


def region_reports(y_true, y_pred, regions, accuracy: dict | None = None) -> list[MetricsReport]:
    """Dense, Sparse and All reports; regions with no rows are left out."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    regions = np.asarray(regions)
    accuracy = accuracy or {}
    reports = []
    for region in (Region.DENSE, Region.SPARSE, Region.ALL):
        sel = np.ones(len(regions), dtype=bool) if region is Region.ALL else regions == region.value
        if not sel.any():
            continue
        mae, mse, mne = metrics(y_true[sel], y_pred[sel])
        reports.append(MetricsReport(region, int(sel.sum()), mae, mse, mne, accuracy.get(region)))
    return reports


def write_predictions(path, ids, lon, lat, y_true, y_pred, regions, flags, var=None) -> None:
    header = PREDICTION_HEADER + (("var",) if var is not None else ())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(ids)):
            row = [int(ids[i]), repr(float(lon[i])), repr(float(lat[i])), repr(float(y_true[i])),
                   repr(float(y_pred[i])), str(regions[i]), int(flags[i])]
            if var is not None:
                row.append(repr(float(var[i])))
            w.writerow(row)


def read_predictions(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header[:len(PREDICTION_HEADER)]) != PREDICTION_HEADER:
            raise SchemaError(f"{path}: header must start with {','.join(PREDICTION_HEADER)}")
        rows = list(reader)
    try:
        cols = {name: [r[i] for r in rows] for i, name in enumerate(header)}
        out = {
            "id": np.asarray(cols["id"], dtype=np.int64),
            "lon": np.asarray(cols["lon"], dtype=float),
            "lat": np.asarray(cols["lat"], dtype=float),
            "y_true": np.asarray(cols["y_true"], dtype=float),
            "y_pred": np.asarray(cols["y_pred"], dtype=float),
            "region": np.asarray(cols["region"], dtype=str),
            "fallback_flag": np.asarray(cols["fallback_flag"], dtype=np.int64),
        }
        if "var" in cols:
            out["var"] = np.asarray(cols["var"], dtype=float)
    except (ValueError, IndexError) as e:
        raise SchemaError(f"{path}: {e}") from None
    bad = set(out["region"]) - {Region.DENSE.value, Region.SPARSE.value}
    if bad:
        raise SchemaError(f"{path}: unknown region labels {sorted(bad)}")
    return out


def write_tiers(path, ids, lon, lat, regions, true_tiers, pred_tiers) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIER_HEADER)
        for i in range(len(ids)):
            w.writerow([int(ids[i]), repr(float(lon[i])), repr(float(lat[i])), str(regions[i]),
                        ServiceTier(int(true_tiers[i])).name.lower(),
                        ServiceTier(int(pred_tiers[i])).name.lower()])


def read_tiers(path) -> dict[str, np.ndarray]:
    names = {t.name.lower(): int(t) for t in ServiceTier}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TIER_HEADER:
            raise SchemaError(f"{path}: header must be {','.join(TIER_HEADER)}")
        rows = list(reader)
    try:
        return {
            "id": np.asarray([r["id"] for r in rows], dtype=np.int64),
            "region": np.asarray([r["region"] for r in rows], dtype=str),
            "true_tier": np.asarray([names[r["true_tier"]] for r in rows], dtype=np.int64),
            "pred_tier": np.asarray([names[r["pred_tier"]] for r in rows], dtype=np.int64),
        }
    except (KeyError, ValueError) as e:
        raise SchemaError(f"{path}: {e}") from None


def evaluate_run(predictions_path, segmentation: GridSegmentation | None = None,
                 tiers_path=None) -> list[MetricsReport]:
    """Per-region reports for a prediction CSV.

    Regions come from ``segmentation`` when given, else from the file's own
    ``region`` column. Accuracy is attached when a tier CSV is supplied.
    """
    pred = read_predictions(predictions_path)
    regions = pred["region"]
    if segmentation is not None:
        regions = segmentation.regions(pred["lon"], pred["lat"])
    accuracy = None
    if tiers_path is not None:
        tiers = read_tiers(tiers_path)
        tier_regions = tiers["region"]
        if segmentation is not None:
            lookup = dict(zip(pred["id"].tolist(), regions.tolist()))
            tier_regions = np.asarray([lookup[i] for i in tiers["id"].tolist()])
        accuracy = classification_accuracy(tiers["true_tier"], tiers["pred_tier"], tier_regions)
    return region_reports(pred["y_true"], pred["y_pred"], regions, accuracy)


def format_report(reports: Iterable[MetricsReport], title: str = "") -> str:
    reports = list(reports)
    with_acc = any(r.accuracy is not None for r in reports)
    head = f"{'region':<8}{'n':>8}{'mae':>14}{'mse':>16}{'mne':>14}"
    if with_acc:
        head += f"{'accuracy':>10}"
    lines = [title] if title else []
    lines.append(head)
    for r in reports:
        line = f"{r.region.value:<8}{r.n:>8}{r.mae:>14.4f}{r.mse:>16.4f}{r.mne:>14.4f}"
        if with_acc:
            line += f"{r.accuracy:>10.4f}" if r.accuracy is not None else f"{'-':>10}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def write_report_csv(path, reports: Iterable[MetricsReport]) -> None:
    """``region,n,mae,mse,mne`` plus ``accuracy`` when any report carries one."""
    reports = list(reports)
    with_acc = any(r.accuracy is not None for r in reports)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "n", "mae", "mse", "mne"] + (["accuracy"] if with_acc else []))
        for r in reports:
            row = [r.region.value, r.n, repr(r.mae), repr(r.mse), repr(r.mne)]
            if with_acc:
                row.append("" if r.accuracy is None else repr(r.accuracy))
            w.writerow(row)
