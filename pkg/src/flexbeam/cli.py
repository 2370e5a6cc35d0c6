"""Command line entry point.

Exit codes: 0 success, 1 configuration error, 2 solver error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

import numpy as np

from .errors import ConfigurationError, SolverError
from .harness import (AXES, DEFAULT_BENCH_SIZES, ExperimentConfig, axis_config, bench_somp,
                      check_writable, cost_trend, format_bench, run_and_write, summary_path,
                      write_bench)
from .selftest import run_selftest

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would collide with solver errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _sizes(text):
    out = []
    for chunk in text.split(";"):
        parts = chunk.split(",")
        if len(parts) != 4:
            raise argparse.ArgumentTypeError(f"size {chunk!r} is not m,G,M,N")
        out.append(tuple(int(p) for p in parts))
    return out


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flexbeam", description="WMMSE / F-WMMSE Monte-Carlo experiments.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment config; flags override its values")
        sp.add_argument("--seed", type=_u64, help="base seed (trial t uses seed ^ t)")
        sp.add_argument("--trials", type=int, help="Monte-Carlo trials (default 100)")
        sp.add_argument("--out", help="raw CSV path; the summary goes to <stem>_summary.csv")
        sp.add_argument("--somp", choices=("naive", "fast"), help="RLS-SOMP implementation")
        sp.add_argument("--threads", type=int, help="worker processes for trials")
        sp.add_argument("--iterations", type=int, help="solver iterations (default 25)")
        sp.add_argument("--no-timing", action="store_true",
                        help="write wall_ms as 0 so repeated runs give identical bytes")

    common(sub.add_parser("run", help="run one experiment config"))
    sw = sub.add_parser("sweep", help="run along one axis")
    common(sw)
    sw.add_argument("--axis", required=True, choices=AXES)
    sw.add_argument("--values", type=_float_list,
                    help="comma-separated axis values; default keeps the config's grid")

    b = sub.add_parser("bench", help="time naive vs fast RLS-SOMP")
    b.add_argument("--seed", type=_u64, default=0)
    b.add_argument("--out", help="timing CSV path")
    b.add_argument("--zeta", type=float, default=1.0)
    b.add_argument("--repeats", type=int, default=7)
    b.add_argument("--sizes", type=_sizes, help="semicolon-separated m,G,M,N tuples")

    st = sub.add_parser("selftest", help="run the built-in numerical checks")
    st.add_argument("--seed", type=_u64, default=0)
    return p


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    overrides = {"base_seed": args.seed, "trials": args.trials, "out": args.out,
                 "somp_mode": args.somp, "threads": args.threads, "iterations": args.iterations}
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if args.no_timing:
        cfg = replace(cfg, timing=False)
    return cfg


def _print_summary(summary):
    for s in summary:
        print(f"{s['method']:>7} snr={s['snr_db']:g} L={s['L']} Ut={s['Ut']:g} Ur={s['Ur']:g} "
              f"it={s['iteration']}: {s['mean']:.4f} +/- {s['stderr']:.4f} (n={s['n']})")


def _cmd_run(args):
    cfg = load_config(args)
    _, summary = run_and_write(cfg)
    _print_summary(summary)
    if cfg.out:
        print(f"wrote {cfg.out} and {summary_path(cfg.out)}")
    return EXIT_OK


def _cmd_sweep(args):
    cfg = load_config(args)
    if args.values is not None:
        cfg = axis_config(cfg, args.axis, args.values)
    _, summary = run_and_write(cfg, per_iteration=(args.axis == "iterations"))
    if args.axis == "iterations" and args.values is not None:
        keep = {int(v) for v in args.values}
        summary = [s for s in summary if s["iteration"] in keep]
    _print_summary(summary)
    return EXIT_OK


def _cmd_bench(args):
    if args.out:
        check_writable(args.out)
    results = bench_somp(args.sizes or DEFAULT_BENCH_SIZES, args.zeta, args.seed, args.repeats)
    trend = cost_trend(results)
    print(format_bench(results, trend))
    if args.out:
        write_bench(results, args.out)
        with open(summary_path(args.out).with_suffix(".json"), "w", encoding="utf-8") as fh:
            json.dump(trend, fh, indent=2)
    return EXIT_OK


def _cmd_selftest(args):
    results = run_selftest(args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_SOLVER


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "bench": _cmd_bench, "selftest": _cmd_selftest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
