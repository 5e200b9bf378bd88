"""End-to-end experiment: ingest, smooth, segment, split, tune, predict, evaluate."""

from __future__ import annotations

import configparser
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import gp_baseline, regressors
from .config import ExperimentConfig
from .data_model import Dataset, ScoreRule, read_dataset
from .evaluation import (MetricsReport, classification_accuracy, classify_service_array,
                         format_report, region_reports, write_predictions, write_report_csv,
                         write_tiers)
from .preprocess import (GridSegmentation, Split, knn_average, read_split, segment_dataset,
                         split, stratified_downsample, write_segmentation, write_split)
from .regressors import Kind, KernelConfig, RegionParams
from .spatial_index import PointIndex

log = logging.getLogger(__name__)

KERNEL_KINDS = {"fbkr": Kind.FIXED, "stbkr": Kind.SELF_TUNING}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass
class Prepared:
    raw: Dataset
    data: Dataset
    segmentation: GridSegmentation
    split: Split


@dataclass
class RunResult:
    prepared: Prepared
    reports: dict[str, list[MetricsReport]] = field(default_factory=dict)
    kernel_params: dict[str, RegionParams] = field(default_factory=dict)
    gp_hyper: dict[str, gp_baseline.GPHyperparams] = field(default_factory=dict)


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as e:  # noqa: BLE001 - re-raised with the stage name
                raise StageError(name, e) from e
        return inner
    return wrap


@_stage("ingest")
def _ingest(cfg: ExperimentConfig) -> Dataset:
    return read_dataset(cfg.input, ScoreRule(cfg.w_down, cfg.w_up))


@_stage("smooth")
def _smooth(cfg: ExperimentConfig, raw: Dataset) -> Dataset:
    return knn_average(raw, PointIndex(raw.locations, cfg.metric), cfg.smooth_k,
                       speeds=cfg.smooth_speeds)


def prepare(cfg: ExperimentConfig, split_override: Split | None = None) -> Prepared:
    raw = _ingest(cfg)
    data = _smooth(cfg, raw)
    seg = _stage("segment")(segment_dataset)(data, cfg.grid_rows, cfg.grid_cols)
    sp = split_override or _stage("split")(split)(len(data), cfg.split_ratio, cfg.split_seed)
    return Prepared(raw, data, seg, sp)


def _targets(data: Dataset, which: str) -> np.ndarray:
    # speeds are modelled in Mbps so every target shares the score's scale
    if which == "score":
        return np.asarray(data.score)
    if which == "download":
        return data.download_kbps / 1000.0
    return data.upload_kbps / 1000.0


def tune_kernel(cfg: ExperimentConfig, prep: Prepared, method: str):
    train = prep.split.train_ids
    X = prep.data.locations[train]
    y = prep.data.score[train]
    kind = KERNEL_KINDS[method]
    if len(cfg.candidate_cs) == 1 and len(cfg.candidate_ks) == 1:
        cfgk = KernelConfig(kind, cfg.candidate_cs[0], cfg.candidate_ks[0])
        return regressors.CVResult(RegionParams(cfgk, cfgk), {})
    return _stage(f"tune:{method}")(regressors.cross_validate)(
        X, y, kind, prep.segmentation, cfg.candidate_cs, cfg.candidate_ks,
        cfg.cv_folds, cfg.cv_seed, cfg.metric)


def kernel_model(cfg: ExperimentConfig, prep: Prepared, params: RegionParams, target="score"):
    train = prep.split.train_ids
    return regressors.fit(prep.data.locations[train], _targets(prep.data, target)[train],
                          params, prep.segmentation, cfg.metric)


def gp_training_ids(cfg: ExperimentConfig, prep: Prepared) -> np.ndarray:
    if cfg.gp_full:
        return prep.split.train_ids
    return stratified_downsample(prep.split.train_ids, prep.data, prep.segmentation,
                                 cfg.gp_fraction, cfg.gp_seed)


def gp_model(cfg: ExperimentConfig, prep: Prepared, target="score", hyper=None):
    ids = gp_training_ids(cfg, prep)
    X = prep.data.locations[ids]
    y = _targets(prep.data, target)[ids]
    if hyper is not None:
        return gp_baseline.build_model(X, y, hyper)
    return gp_baseline.fit(X, y, restarts=cfg.gp_restarts, seed=cfg.gp_seed,
                           max_iter=cfg.gp_max_iter)


def run(cfg: ExperimentConfig, write: bool = True) -> RunResult:
    """Run every configured method and, with ``write``, emit the artifacts."""
    cfg.validate()
    prep = prepare(cfg)
    out = Path(cfg.output_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
        config_mod.save(cfg, out / "config.ini")
        write_split(prep.split, out / "split.csv")
        write_segmentation(prep.segmentation, out / "segmentation.csv")

    test = prep.split.test_ids
    Xt = prep.data.locations[test]
    regions = prep.segmentation.regions(Xt[:, 0], Xt[:, 1])
    result = RunResult(prep)
    params_ini = configparser.ConfigParser(interpolation=None)
    text = []

    for method in cfg.methods:
        var = None
        if method in KERNEL_KINDS:
            cv = tune_kernel(cfg, prep, method)
            params = cv.params
            result.kernel_params[method] = params
            params_ini[method] = {
                "kind": params.dense.kind.value,
                "dense_c": repr(params.dense.c), "dense_k": str(params.dense.k),
                "sparse_c": repr(params.sparse.c), "sparse_k": str(params.sparse.k)}
            if write and cv.table:
                _write_cv_table(out / f"cv_{method}.csv", cv.table)

            def predictor(target):
                model = kernel_model(cfg, prep, params, target)
                y, flags, _ = model.predict(Xt, regions)
                return y, flags
        else:
            model = _stage("fit:gp")(gp_model)(cfg, prep)
            result.gp_hyper["score"] = model.hyper
            params_ini["gp"] = _gp_section(model)
            y, var, clamped = model.predict(Xt)

            def predictor(target, _score=(y, clamped)):
                if target == "score":
                    return _score[0], _score[1].astype(np.int8)
                m = _stage(f"fit:gp:{target}")(gp_model)(cfg, prep, target)
                result.gp_hyper[target] = m.hyper
                params_ini[f"gp_{target}"] = _gp_section(m)
                return m.predict(Xt)[0], np.zeros(len(Xt), dtype=np.int8)

        y_pred, flags = _stage(f"predict:{method}")(predictor)("score")
        accuracy = None
        if cfg.classify:
            d_pred, _ = _stage(f"predict:{method}")(predictor)("download")
            u_pred, _ = _stage(f"predict:{method}")(predictor)("upload")
            true_t = classify_service_array(_targets(prep.data, "download")[test],
                                            _targets(prep.data, "upload")[test])
            pred_t = classify_service_array(np.maximum(d_pred, 0), np.maximum(u_pred, 0))
            accuracy = classification_accuracy(true_t, pred_t, regions)
            if write:
                write_tiers(out / f"tiers_{method}.csv", test, Xt[:, 0], Xt[:, 1], regions,
                            true_t, pred_t)
        reports = region_reports(prep.data.score[test], y_pred, regions, accuracy)
        result.reports[method] = reports
        text.append(format_report(reports, title=f"[{method}]"))
        if write:
            write_predictions(out / f"predictions_{method}.csv", test, Xt[:, 0], Xt[:, 1],
                              prep.data.score[test], y_pred, regions, flags, var)
            write_report_csv(out / f"report_{method}.csv", reports)
        log.info("%s done", method)

    if write:
        with open(out / "params.ini", "w", encoding="utf-8") as fh:
            params_ini.write(fh)
        (out / "report.txt").write_text("\n".join(text), encoding="utf-8")
    return result


def _gp_section(model: gp_baseline.GPModel) -> dict[str, str]:
    h = model.hyper
    return {"sigma2": repr(h.sigma2), "theta1": repr(h.theta1), "theta2": repr(h.theta2),
            "noise2": repr(h.noise2), "lml": repr(model.lml), "m": str(len(model.X))}


def _write_cv_table(path, table: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["region", "c", "k", "mean_mse"])
        for (region, c, k), mse in table.items():
            w.writerow([region, repr(c), k, repr(mse)])


def load_run(run_dir):
    """Rebuild the prepared data and fitted parameters saved by :func:`run`."""
    run_dir = Path(run_dir)
    cfg = config_mod.load(run_dir / "config.ini")
    # the snapshot already holds resolved paths
    prep = prepare(cfg, split_override=read_split(run_dir / "split.csv"))
    params = configparser.ConfigParser(interpolation=None)
    params.read(run_dir / "params.ini", encoding="utf-8")
    return cfg, prep, params


def model_from_params(cfg, prep: Prepared, params: configparser.ConfigParser, method: str):
    if method not in params:
        raise KeyError(f"no fitted parameters for method {method!r}")
    sec = params[method]
    if method in KERNEL_KINDS:
        kind = Kind(sec["kind"])
        rp = RegionParams(KernelConfig(kind, float(sec["dense_c"]), int(sec["dense_k"])),
                          KernelConfig(kind, float(sec["sparse_c"]), int(sec["sparse_k"])))
        return kernel_model(cfg, prep, rp)
    hyper = gp_baseline.GPHyperparams(float(sec["sigma2"]), float(sec["theta1"]),
                                      float(sec["theta2"]), float(sec["noise2"]))
    return gp_model(cfg, prep, hyper=hyper)
