"""Quick numerical self-checks that need no test runner.

Each check draws a handful of random instances and compares two
independent computations of the same quantity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fwmmse import FwmmseConfig, run_fwmmse
from .metrics import sum_rate
from .rls_somp import rls_somp, rls_somp_fast
from .scenario import ScenarioConfig, assemble_channel, sample_scenario, upa_positions
from .wmmse import (combiner_rls_form, precoder_rls_form, run_wmmse, update_combiner,
                    update_precoder, update_weight)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def _fixed(sc):
    return assemble_channel(sc, upa_positions(sc.Nt), [upa_positions(sc.Nr)] * sc.K)


SMALL = ScenarioConfig(K=2, Nt=16, Nr=4, D=2, L=5, P=10 ** 0.5, Ut=2.0, Ur=1.0)


def check_fast_somp(n=20, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n):
        m, G, M = int(rng.integers(4, 33)), int(rng.integers(16, 257)), int(rng.integers(1, 9))
        N = int(rng.integers(1, min(m, G) + 1))
        D = rng.standard_normal((m, G)) + 1j * rng.standard_normal((m, G))
        Y = rng.standard_normal((m, M)) + 1j * rng.standard_normal((m, M))
        zeta = (0.01, 1.0, 100.0)[i % 3]
        a, b = rls_somp(Y, D, zeta, N), rls_somp_fast(Y, D, zeta, N)
        if a.Lambda != b.Lambda:
            return CheckResult("fast RLS-SOMP", False, f"support mismatch on instance {i}")
        worst = max(worst, float(np.max(np.abs(a.X - b.X))))
    return CheckResult("fast RLS-SOMP", worst <= 1e-8, f"max |dX| = {worst:.1e} over {n} instances")


def check_ridge_forms(n=20, seed=0):
    worst = 0.0
    for s in range(n):
        sc = sample_scenario(SMALL, seed + s)
        ch = _fixed(sc)
        F = np.random.default_rng(s).standard_normal((sc.Nt, sc.K * sc.D)) + 0j
        W = [update_combiner(ch, F, k, sc.sigma2[k], sc.P) for k in range(sc.K)]
        for k in range(sc.K):
            worst = max(worst, _rel(combiner_rls_form(ch, F, k, sc.sigma2[k], sc.P), W[k]))
        B = [update_weight(ch, F, W[k], k) for k in range(sc.K)]
        worst = max(worst, _rel(precoder_rls_form(ch, W, B, sc), update_precoder(ch, W, B, sc)))
    return CheckResult("ridge forms of the W and F updates", worst <= 1e-10, f"max rel err = {worst:.1e}")


def check_descent(n=5, seed=0):
    worst = 0.0
    for s in range(n):
        sc = sample_scenario(SMALL, seed + s)
        _, tr = run_wmmse(sc, _fixed(sc), 25)
        obj = np.asarray(tr.objective)
        worst = max(worst, float(np.max((obj[1:] - obj[:-1]) / np.abs(obj[:-1]))))
    return CheckResult("WMMSE objective descent", worst <= 1e-8, f"max relative increase = {worst:.1e}")


def check_matched_filter(n=10, seed=0):
    cfg = ScenarioConfig(K=1, Nt=4, Nr=1, D=1, L=5, P=10.0, Ut=1.0, Ur=0.5)
    worst = 0.0
    for s in range(n):
        sc = sample_scenario(cfg, seed + s)
        ch = _fixed(sc)
        h = ch.H[0].ravel()
        oracle = np.log2(1 + sc.P * np.vdot(h, h).real / sc.sigma2[0])
        _, tr = run_wmmse(sc, ch, 50)
        worst = max(worst, abs(tr.sum_rate[-1] - oracle))
    return CheckResult("single-user matched filter", worst <= 1e-3, f"max gap = {worst:.1e} bit/s/Hz")


def check_reduction(n=3, seed=0):
    worst = 0.0
    for s in range(n):
        sc = sample_scenario(SMALL, seed + s)
        _, tw = run_wmmse(sc, _fixed(sc), 10)
        _, tf = run_fwmmse(sc, FwmmseConfig(iterations=10))
        worst = max(worst, float(np.max(np.abs(np.subtract(tw.sum_rate, tf.sum_rate)))))
    return CheckResult("F-WMMSE on UPA-only grids equals WMMSE", worst <= 1e-8,
                       f"max rate gap = {worst:.1e}")


def check_scale_invariance(seed=0):
    sc = sample_scenario(SMALL, seed)
    ch = _fixed(sc)
    F = np.random.default_rng(seed).standard_normal((sc.Nt, sc.K * sc.D)) + 0j
    gap = abs(sum_rate(ch, F, sc) - sum_rate(ch, 7.3 * F, sc))
    return CheckResult("sum-rate scale invariance", gap <= 1e-10, f"gap = {gap:.1e}")


CHECKS = (check_fast_somp, check_ridge_forms, check_descent, check_matched_filter,
          check_reduction, check_scale_invariance)


def run_selftest(seed: int = 0) -> list[CheckResult]:
    out = []
    for check in CHECKS:
        try:
            out.append(check(seed=seed))
        except Exception as exc:  # report, keep going
            out.append(CheckResult(check.__name__, False, f"raised {type(exc).__name__}: {exc}"))
    return out
