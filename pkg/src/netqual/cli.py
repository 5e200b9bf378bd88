"""Command-line entry point: ``netqual {ingest,synth,run,heatmap,report}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import evaluation, heatmap, pipeline, synth
from .config import ConfigError, ExperimentConfig
from .data_model import DataError, ScoreRule, read_dataset, summarize, write_csv
from .gp_baseline import ConditioningError
from .preprocess import read_segmentation
from .spatial_index import SpatialIndexError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("netqual")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, pipeline.StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_USAGE
    if isinstance(exc, (ConditioningError, ArithmeticError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, SpatialIndexError, ValueError, KeyError, OSError)):
        return EXIT_DATA
    return EXIT_NUMERIC


def cmd_ingest(args) -> int:
    rule = ScoreRule(args.w_down, args.w_up)
    data = read_dataset(args.input, rule)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            write_csv(data, fh)
    s = summarize(data)
    print(f"n = {s['n']}")
    for key in ("mean", "min", "max", "stddev"):
        print(f"{key} = {s[key]:.6f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    p = synth.SynthParams(n_dense=args.n_dense, n_sparse=args.n_sparse, dense_std=args.dense_std,
                          ring_inner=args.ring_inner, ring_outer=args.ring_outer,
                          center_lon=args.center_lon, center_lat=args.center_lat,
                          noise=args.noise, seed=args.seed)
    n = synth.write(p, args.out)
    print(f"wrote {n} points to {args.out}")
    return EXIT_OK


RUN_FLAGS = list(config_mod.FIELDS)


def _config_from_args(args) -> ExperimentConfig:
    cfg = config_mod.load(args.config) if args.config else ExperimentConfig()
    overrides = {name: getattr(args, name) for name in RUN_FLAGS if getattr(args, name, None) is not None}
    return config_mod.from_mapping(overrides, cfg).validate()


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    cfg.input = str(Path(cfg.input).resolve())
    cfg.output_dir = str(Path(cfg.output_dir).resolve())
    pipeline.run(cfg)
    print((Path(cfg.output_dir) / "report.txt").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    cfg, prep, params = pipeline.load_run(args.run_dir)
    bounds = tuple(args.bounds) if args.bounds else prep.segmentation.bbox
    glon, glat = heatmap.grid_centers(bounds, args.rows, args.cols)
    out_dir = Path(args.out_dir or args.run_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.method == "density":
        values = heatmap.point_density(prep.raw.lon, prep.raw.lat, glon, glat)
    else:
        model = pipeline.model_from_params(cfg, prep, params, args.method)
        q = np.column_stack([glon.ravel(), glat.ravel()])
        values = model.predict(q)[0].reshape(glon.shape)
    for p in heatmap.write_raster(values, out_dir / f"heatmap_{args.method}", bounds):
        print(p)
    return EXIT_OK


def cmd_report(args) -> int:
    seg = read_segmentation(args.segmentation) if args.segmentation else None
    reports = evaluation.evaluate_run(args.predictions, seg, args.tiers)
    print(evaluation.format_report(reports), end="")
    if args.csv:
        evaluation.write_report_csv(args.csv, reports)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netqual", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse and de-duplicate a tile CSV, print a summary")
    p.add_argument("input")
    p.add_argument("--out", help="write the canonical CSV here")
    p.add_argument("--w-down", type=float, default=1.0)
    p.add_argument("--w-up", type=float, default=1.0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic dense-core/sparse-ring dataset")
    d = synth.SynthParams()
    p.add_argument("--out", required=True)
    p.add_argument("--n-dense", type=int, default=d.n_dense)
    p.add_argument("--n-sparse", type=int, default=d.n_sparse)
    p.add_argument("--dense-std", type=float, default=d.dense_std)
    p.add_argument("--ring-inner", type=float, default=d.ring_inner)
    p.add_argument("--ring-outer", type=float, default=d.ring_outer)
    p.add_argument("--center-lon", type=float, default=d.center_lon)
    p.add_argument("--center-lat", type=float, default=d.center_lat)
    p.add_argument("--noise", type=float, default=d.noise)
    p.add_argument("--seed", type=int, default=d.seed)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run the experiment described by a config file")
    p.add_argument("--config", help="INI file with an [experiment] section")
    for name in RUN_FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, metavar="VALUE")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("heatmap", help="rasterise a fitted model from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--method", default="stbkr", choices=("gp", "fbkr", "stbkr", "density"))
    p.add_argument("--rows", type=int, default=50)
    p.add_argument("--cols", type=int, default=50)
    p.add_argument("--bounds", type=float, nargs=4,
                   metavar=("LON_MIN", "LAT_MIN", "LON_MAX", "LAT_MAX"))
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("report", help="per-region metrics for a prediction CSV")
    p.add_argument("predictions")
    p.add_argument("--segmentation", help="segmentation.csv to recompute regions from")
    p.add_argument("--tiers", help="tiers CSV to add classification accuracy")
    p.add_argument("--csv", help="also write region,n,mae,mse,mne[,accuracy] here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code
        code = _exit_code(exc)
        print(f"netqual {args.command}: error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return code


if __name__ == "__main__":
    sys.exit(main())
