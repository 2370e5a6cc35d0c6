"""Write the plot-ready CSV for each standard sweep.

    python scripts/sweeps.py convergence rx_region --trials 100 --outdir results

Every sweep gets ``<outdir>/<name>.csv`` and ``<name>_summary.csv``.
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from flexbeam.harness import ExperimentConfig, axis_config, run_and_write

BASE = ExperimentConfig(timing=True)

# name -> (config, axis used for the summary)
SWEEPS = {
    "convergence": (replace(BASE, methods=("wmmse", "fwmmse"), snr_db=(-5.0, 5.0),
                     regions=((6.0, 3.0), (4.0, 2.0))), "iterations"),
    "snr": (replace(BASE, snr_db=tuple(range(-10, 21, 5)), regions=((6.0, 3.0), (4.0, 2.0))), "snr"),
    "rx_region": (axis_config(replace(BASE, methods=("wmmse", "fwmmse"), snr_db=(5.0,), L=(5, 10),
                                 regions=((2.0, 1.0),)), "ur", [1.0 + 0.5 * i for i in range(7)]), "ur"),
    "tx_region": (axis_config(replace(BASE, methods=("wmmse", "fwmmse"), snr_db=(5.0,), regions=((2.0, 1.0),)),
                         "ut", [2.0 + 0.5 * i for i in range(9)]), "ut"),
    "paths": (replace(BASE, methods=("wmmse", "fwmmse"), snr_db=(5.0,), L=tuple(range(1, 22, 4)),
                     regions=((6.0, 3.0),)), "paths"),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("sweeps", nargs="*", default=sorted(SWEEPS), choices=sorted(SWEEPS))
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in args.sweeps:
        cfg, axis = SWEEPS[name]
        cfg = replace(cfg, trials=args.trials, base_seed=args.seed, threads=args.threads,
                      out=str(outdir / f"{name}.csv"))
        _, summary = run_and_write(cfg, per_iteration=(axis == "iterations"))
        print(f"{name}: {len(summary)} summary rows -> {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
