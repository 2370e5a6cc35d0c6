"""Naive vs fast RLS-SOMP timing on the default sizes.

    python scripts/bench.py --out results/bench.csv
"""
import argparse
import json
import sys
from pathlib import Path

from flexbeam.harness import DEFAULT_BENCH_SIZES, bench_somp, cost_trend, format_bench, write_bench


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/bench.csv")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    results = bench_somp(DEFAULT_BENCH_SIZES, seed=args.seed, repeats=args.repeats)
    trend = cost_trend(results)
    print(format_bench(results, trend))
    write_bench(results, out)
    out.with_name(out.stem + "_trend.json").write_text(json.dumps(trend, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
