"""Monte-Carlo experiment engine, CSV output and the SOMP benchmark.

A trial samples one scenario per path count from the seed
``base_seed ^ trial``, then every method sees the identical scenario at
every SNR and region point.  Rows come back in a fixed order
(trial, L, SNR, region, method, iteration) whatever the worker count.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dictionary import grid_size
from .errors import ConfigurationError, SolverError
from .fwmmse import FwmmseConfig, run_fwmmse
from .metrics import sum_rate
from .rls_somp import rls_somp, rls_somp_fast
from .scenario import ScenarioConfig, assemble_channel, sample_scenario, upa_positions
from .wmmse import mmse_baseline, run_wmmse

logger = logging.getLogger(__name__)

METHODS = ("mmse", "wmmse", "fwmmse")
AXES = ("snr", "ur", "ut", "paths", "iterations")
CSV_HEADER = ("trial", "method", "snr_db", "L", "Ut", "Ur", "iteration", "sum_rate", "wall_ms", "seed")
SUMMARY_HEADER = ("method", "snr_db", "L", "Ut", "Ur", "iteration", "n", "mean", "stderr")


@dataclass
class ExperimentConfig:
    """One experiment manifest; see the README for the JSON schema."""

    methods: tuple = ("mmse", "wmmse", "fwmmse")
    K: int = 4
    Nt: int = 16
    Nr: int = 4
    D: int = 4
    sigma2: float = 1.0
    snr_db: tuple = (10.0,)
    L: tuple = (10,)
    regions: tuple = ((6.0, 3.0),)
    iterations: int = 25
    trials: int = 100
    base_seed: int = 0
    out: str | None = None
    somp_mode: str = "fast"
    threads: int = 1
    timing: bool = True

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.snr_db = tuple(float(s) for s in np.atleast_1d(self.snr_db))
        self.L = tuple(int(v) for v in np.atleast_1d(self.L))
        try:
            self.regions = tuple((float(ut), float(ur)) for ut, ur in self.regions)
        except (TypeError, ValueError) as exc:
            raise ConfigurationError("regions must be a list of [Ut, Ur] pairs") from exc

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        """Raises ``OSError`` if unreadable, :class:`ConfigurationError` if malformed."""
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["regions"] = [list(r) for r in self.regions]
        return out

    def validate(self) -> "ExperimentConfig":
        if not self.methods:
            raise ConfigurationError("no methods selected")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        if int(self.trials) < 1:
            raise ConfigurationError("trials must be >= 1")
        if int(self.iterations) < 1:
            raise ConfigurationError("iterations must be >= 1")
        if int(self.threads) < 1:
            raise ConfigurationError("threads must be >= 1")
        if not 0 <= int(self.base_seed) < 2**64:
            raise ConfigurationError("base_seed must fit in an unsigned 64-bit integer")
        if self.somp_mode not in ("fast", "naive"):
            raise ConfigurationError(f"unknown SOMP mode {self.somp_mode!r}")
        if not (self.snr_db and self.L and self.regions):
            raise ConfigurationError("snr_db, L and regions must be nonempty")
        for s in self.snr_db:
            if not math.isfinite(s):
                raise ConfigurationError(f"SNR {s} is not finite")
        for Ut, Ur in self.regions:
            grid_size(Ut)
            grid_size(Ur)
        for L in self.L:
            self.scenario_config(self.snr_db[0], L, *self.regions[0]).validate()
        return self

    def scenario_config(self, snr_db, L, Ut, Ur) -> ScenarioConfig:
        return ScenarioConfig.from_snr_db(snr_db, K=self.K, Nt=self.Nt, Nr=self.Nr, D=self.D, L=L,
                                          sigma2=self.sigma2, Ut=Ut, Ur=Ur)

    def trial_seed(self, trial: int) -> int:
        return int(self.base_seed) ^ int(trial)


@dataclass
class ExperimentRecord:
    trial: int
    method: str
    snr_db: float
    L: int
    Ut: float
    Ur: float
    iteration: int
    sum_rate: float
    wall_ms: float
    seed: int
    error: str | None = field(default=None, compare=False)

    def row(self) -> list:
        return [self.trial, self.method, repr(float(self.snr_db)), self.L, repr(float(self.Ut)),
                repr(float(self.Ur)), self.iteration, repr(float(self.sum_rate)),
                repr(float(self.wall_ms)), self.seed]


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, 1e3 * (time.perf_counter() - t0)


def _method_rates(method, scenario, config: ExperimentConfig):
    """Per-iteration sum rates of one method and its solver wall time in ms."""
    T = int(config.iterations)
    if method == "fwmmse":
        fcfg = FwmmseConfig(iterations=T, somp_mode=config.somp_mode)
        (_, trace), ms = _timed(run_fwmmse, scenario, fcfg)
        return trace.sum_rate, ms
    channels = assemble_channel(scenario, upa_positions(scenario.Nt),
                                [upa_positions(scenario.Nr)] * scenario.K)
    if method == "wmmse":
        (_, trace), ms = _timed(run_wmmse, scenario, channels, T)
        return trace.sum_rate, ms
    state, ms = _timed(mmse_baseline, scenario, channels)
    # one-shot method, repeated so every method has a row per iteration
    return [sum_rate(channels, state.F, scenario)] * T, ms


def run_trial(config: ExperimentConfig, trial: int) -> list[ExperimentRecord]:
    """All rows of one trial; methods share each sampled scenario."""
    seed = config.trial_seed(trial)
    T = int(config.iterations)
    rows = []
    for L in config.L:
        base = sample_scenario(config.scenario_config(config.snr_db[0], L, *config.regions[0]), seed)
        for snr in config.snr_db:
            P = config.sigma2 * 10.0 ** (snr / 10.0)
            fixed_cache = {}
            for Ut, Ur in config.regions:
                scenario = base.with_power(P).with_regions(Ut, Ur)
                for method in config.methods:
                    # fixed-array methods do not see the region, solve them once
                    key = method if method != "fwmmse" else (method, Ut, Ur)
                    if key not in fixed_cache:
                        try:
                            fixed_cache[key] = (*_method_rates(method, scenario, config), None)
                        except (SolverError, np.linalg.LinAlgError) as exc:
                            logger.warning("trial %d %s failed: %s", trial, method, exc)
                            fixed_cache[key] = ([math.nan] * T, math.nan, str(exc))
                    rates, ms, err = fixed_cache[key]
                    ms = ms if config.timing else 0.0
                    rows.extend(ExperimentRecord(trial, method, snr, L, Ut, Ur, it + 1, r, ms, seed, err)
                                for it, r in enumerate(rates))
    return rows


def _run_trial_star(args):
    return run_trial(*args)


def run_experiment(config: ExperimentConfig) -> list[ExperimentRecord]:
    config.validate()
    trials = range(int(config.trials))
    if int(config.threads) == 1:
        chunks = [run_trial(config, t) for t in trials]
    else:
        with ProcessPoolExecutor(max_workers=int(config.threads)) as pool:
            # map preserves submission order, which fixes the row order
            chunks = list(pool.map(_run_trial_star, [(config, t) for t in trials]))
    return [r for chunk in chunks for r in chunk]


def check_writable(path) -> Path:
    """Raise ``OSError`` now rather than after hours of simulation."""
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise FileNotFoundError(f"output directory {parent} does not exist")
    if path.is_dir():
        raise IsADirectoryError(f"output path {path} is a directory")
    if not os.access(parent, os.W_OK) or (path.exists() and not os.access(path, os.W_OK)):
        raise PermissionError(f"cannot write {path}")
    return path


def summary_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + "_summary" + (path.suffix or ".csv"))


def write_records(records, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.row())
    return path


def read_records(path) -> list[ExperimentRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ConfigurationError(f"{path}: unexpected header {reader.fieldnames}")
        return [ExperimentRecord(int(d["trial"]), d["method"], float(d["snr_db"]), int(d["L"]),
                                 float(d["Ut"]), float(d["Ur"]), int(d["iteration"]),
                                 float(d["sum_rate"]), float(d["wall_ms"]), int(d["seed"]))
                for d in reader]


def summarize(records, per_iteration: bool = False) -> list[dict]:
    """Mean and standard error over trials for every axis point.

    Only the last iteration is kept unless ``per_iteration``.  Failed trials
    (nan rates) are dropped and ``n`` counts the rest.  The standard error
    is ``std(ddof=1) / sqrt(n)``, nan for ``n < 2``.
    """
    last = max((r.iteration for r in records), default=0)
    groups: dict[tuple, list] = {}
    for r in records:
        if not per_iteration and r.iteration != last:
            continue
        key = (r.method, r.snr_db, r.L, r.Ut, r.Ur, r.iteration)
        groups.setdefault(key, []).append(r.sum_rate)
    out = []
    for key, vals in groups.items():
        x = np.asarray(vals, dtype=float)
        x = x[np.isfinite(x)]
        n = x.size
        mean = float(x.mean()) if n else math.nan
        se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        out.append(dict(zip(SUMMARY_HEADER, (*key, n, mean, se))))
    return out


def write_summary(summary, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for s in summary:
            w.writerow([s["method"], repr(s["snr_db"]), s["L"], repr(s["Ut"]), repr(s["Ur"]),
                        s["iteration"], s["n"], repr(s["mean"]), repr(s["stderr"])])
    return path


def axis_config(config: ExperimentConfig, axis: str, values) -> ExperimentConfig:
    """Copy of ``config`` with the grid along ``axis`` replaced by ``values``.

    ``ur``/``ut`` vary one side and hold the other at the first configured
    region; ``iterations`` runs the longest count once and keeps all
    iterations.
    """
    values = list(values)
    if not values:
        raise ConfigurationError("axis values must be nonempty")
    if axis == "snr":
        return replace(config, snr_db=tuple(values))
    if axis == "paths":
        return replace(config, L=tuple(int(v) for v in values))
    Ut0, Ur0 = config.regions[0]
    if axis == "ur":
        return replace(config, regions=tuple((Ut0, float(v)) for v in values))
    if axis == "ut":
        return replace(config, regions=tuple((float(v), Ur0) for v in values))
    if axis == "iterations":
        return replace(config, iterations=int(max(values)))
    raise ConfigurationError(f"unknown axis {axis!r}; choose from {', '.join(AXES)}")


def run_and_write(config: ExperimentConfig, per_iteration: bool = False):
    """Run ``config`` and write the raw and summary CSVs to ``config.out``."""
    config.validate()
    out = check_writable(config.out) if config.out else None
    if out is not None:
        check_writable(summary_path(out))
    records = run_experiment(config)
    summary = summarize(records, per_iteration)
    if out is not None:
        write_records(records, out)
        write_summary(summary, summary_path(out))
    if records and not any(math.isfinite(r.sum_rate) for r in records):
        raise SolverError(f"every trial failed; first error: {records[0].error}")
    return records, summary


def sweep(config: ExperimentConfig, axis: str, values=None):
    """Run along one axis; ``values=None`` keeps the configured grid for that axis."""
    if values is not None:
        config = axis_config(config, axis, values)
    elif axis not in AXES:
        raise ConfigurationError(f"unknown axis {axis!r}; choose from {', '.join(AXES)}")
    return run_and_write(config, per_iteration=(axis == "iterations"))


# --- SOMP benchmark ------------------------------------------------------

# Shapes modeled on the two sparse fits: m = K*D or K*L rows, M = D or K*D
# target columns.
DEFAULT_BENCH_SIZES = (
    (8, 16, 1, 4),
    (16, 256, 4, 16), (16, 576, 4, 16), (16, 1024, 4, 16),
    (16, 256, 16, 16), (16, 576, 16, 16), (16, 1024, 16, 16),
    (40, 256, 16, 16), (40, 576, 16, 16), (40, 1024, 16, 16),
    (64, 256, 16, 32), (64, 576, 16, 32), (64, 1024, 16, 32),
    (64, 1024, 16, 64), (64, 1024, 4, 64),
    (64, 1024, 16, 1),
)
BENCH_HEADER = ("m", "G", "M", "N", "zeta", "seed", "naive_ms", "fast_ms", "speedup",
                "naive_step_ms", "fast_step_ms", "max_abs_diff")


@dataclass
class BenchResult:
    m: int
    G: int
    M: int
    N: int
    zeta: float
    seed: int
    naive_ms: float
    fast_ms: float
    max_abs_diff: float

    @property
    def speedup(self) -> float:
        return self.naive_ms / self.fast_ms

    def row(self) -> list:
        return [self.m, self.G, self.M, self.N, repr(self.zeta), self.seed, repr(self.naive_ms),
                repr(self.fast_ms), repr(self.speedup), repr(self.naive_ms / self.N),
                repr(self.fast_ms / self.N), repr(self.max_abs_diff)]


def bench_instance(m, G, M, N, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    D = (rng.standard_normal((m, G)) + 1j * rng.standard_normal((m, G))) / np.sqrt(2 * m)
    Y = (rng.standard_normal((m, M)) + 1j * rng.standard_normal((m, M))) / np.sqrt(2)
    return Y, D


def _best_ms(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, 1e3 * best


def bench_somp(sizes=DEFAULT_BENCH_SIZES, zeta: float = 1.0, seed: int = 0, repeats: int = 7,
               tol: float = 1e-8) -> list[BenchResult]:
    """Time both solvers on identical instances, best of ``repeats``.

    Instance ``i`` uses seed ``seed + i``.  A support or coefficient
    mismatch beyond ``tol`` raises :class:`SolverError` naming that seed.
    """
    results = []
    for i, (m, G, M, N) in enumerate(sizes):
        s = int(seed) + i
        Y, D = bench_instance(m, G, M, N, s)
        ref, _ = _best_ms(lambda: rls_somp(Y, D, zeta, N), 1)  # warm caches
        # alternate the two solvers so drift in machine load hits both
        naive_ms = fast_ms = math.inf
        for _ in range(repeats):
            ref, t = _best_ms(lambda: rls_somp(Y, D, zeta, N), 1)
            naive_ms = min(naive_ms, t)
            sol, t = _best_ms(lambda: rls_somp_fast(Y, D, zeta, N), 1)
            fast_ms = min(fast_ms, t)
        if ref.Lambda != sol.Lambda:
            raise SolverError(f"bench instance seed={s} (m={m}, G={G}, M={M}, N={N}): supports differ")
        diff = float(np.max(np.abs(ref.X - sol.X)))
        if not diff <= tol:
            raise SolverError(f"bench instance seed={s}: coefficients differ by {diff:.3e}")
        results.append(BenchResult(m, G, M, N, float(zeta), s, naive_ms, fast_ms, diff))
    return results


def cost_trend(results) -> list[dict]:
    """Log-log slope of per-step time against ``G`` for each fixed ``(m, M, N)``.

    A per-step cost linear in ``G`` gives a slope near 1.
    """
    groups: dict[tuple, list] = {}
    for r in results:
        groups.setdefault((r.m, r.M, r.N), []).append(r)
    out = []
    for (m, M, N), rs in sorted(groups.items()):
        Gs = sorted({r.G for r in rs})
        if len(Gs) < 2:
            continue
        logG = np.log([r.G for r in rs])
        slope_n = np.polyfit(logG, np.log([r.naive_ms / r.N for r in rs]), 1)[0]
        slope_f = np.polyfit(logG, np.log([r.fast_ms / r.N for r in rs]), 1)[0]
        out.append(dict(m=m, M=M, N=N, G_values=Gs, naive_slope=float(slope_n),
                        fast_slope=float(slope_f)))
    return out


def write_bench(results, path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_HEADER)
        for r in results:
            w.writerow(r.row())
    return path


def format_bench(results, trend) -> str:
    lines = [f"{'m':>4} {'G':>5} {'M':>3} {'N':>3} {'naive ms':>9} {'fast ms':>9} {'speedup':>7} {'|dX|':>9}"]
    for r in results:
        lines.append(f"{r.m:4d} {r.G:5d} {r.M:3d} {r.N:3d} {r.naive_ms:9.3f} {r.fast_ms:9.3f} "
                     f"{r.speedup:7.2f} {r.max_abs_diff:9.1e}")
    if trend:
        lines.append("per-step cost vs G (log-log slope):")
        for t in trend:
            lines.append(f"  m={t['m']} M={t['M']} N={t['N']} G={t['G_values']}: "
                         f"naive {t['naive_slope']:.2f}, fast {t['fast_slope']:.2f}")
    return "\n".join(lines)
