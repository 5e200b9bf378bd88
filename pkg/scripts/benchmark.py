"""Synthetic benchmark: sparse-region MSE/MNE of FBKR vs STBKR over seeds.

Runs the same pipeline as ``netqual run`` on ``netqual synth`` output with the
generator defaults (4,500 dense + 500 sparse points). Pass ``--with-gp`` to add
the GP baseline; it costs roughly 45 s per seed on one core.

    python scripts/benchmark.py --seeds 10 --out bench
"""

import argparse
import time
from pathlib import Path

from netqual import pipeline, synth
from netqual.config import ExperimentConfig
from netqual.preprocess import Region


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--out", default="bench", help="directory for data and run artifacts")
    ap.add_argument("--with-gp", action="store_true")
    args = ap.parse_args()

    methods = ("gp", "fbkr", "stbkr") if args.with_gp else ("fbkr", "stbkr")
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    wins = {"mse": 0, "mne": 0}
    t0 = time.perf_counter()
    print(f"{'seed':>4} " + " ".join(f"{m + ' ' + s:>12}" for m in methods for s in ("mse", "mne")))
    for seed in range(args.seeds):
        data = root / f"synth_{seed}.csv"
        synth.write(synth.SynthParams(seed=seed), data)
        cfg = ExperimentConfig(input=str(data), output_dir=str(root / f"run_{seed}"),
                               methods=methods, classify=False)
        res = pipeline.run(cfg)
        sp = {m: next(r for r in res.reports[m] if r.region is Region.SPARSE) for m in methods}
        wins["mse"] += sp["stbkr"].mse < sp["fbkr"].mse
        wins["mne"] += sp["stbkr"].mne < sp["fbkr"].mne
        print(f"{seed:>4} " + " ".join(f"{getattr(sp[m], s):>12.3f}"
                                       for m in methods for s in ("mse", "mne")))
    n = args.seeds
    print(f"STBKR beats FBKR on sparse MSE in {wins['mse']}/{n} seeds, "
          f"on sparse MNE in {wins['mne']}/{n} ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
