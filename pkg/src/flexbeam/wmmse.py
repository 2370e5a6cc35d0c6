"""Fixed-antenna baselines: WMMSE block-coordinate descent and one-shot MMSE.

The loop follows the classical order combiner -> weight -> precoder, with a
single power normalization after the last iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import SolverError
from .metrics import (BeamformingState, objective_at, power, psd_sqrt,
                      streams_per_user, sum_rate, user_block)
from .rls_somp import rls_solve
from .scenario import ChannelSet, Scenario

DEFAULT_ITERATIONS = 25


@dataclass
class SolverTrace:
    sum_rate: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    gamma1: list = field(default_factory=list)
    gamma2: list = field(default_factory=list)
    best_iteration: int | None = None
    best_sum_rate: float = -np.inf

    def record(self, rate, objective, gamma1, gamma2):
        self.sum_rate.append(float(rate))
        self.objective.append(float(objective))
        self.gamma1.append(list(map(float, gamma1)))
        self.gamma2.append(float(gamma2))
        if rate > self.best_sum_rate:
            self.best_sum_rate = float(rate)
            self.best_iteration = len(self.sum_rate)


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """PCG64 generator for an independent sub-stream of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(stream,))))


def init_precoder(scenario: Scenario, seed: int) -> np.ndarray:
    """I.i.d. complex Gaussian ``Nt x KD`` precoder scaled to ``Tr(FF^H) = P``."""
    rng = stream_rng(seed, 1)
    shape = (scenario.Nt, scenario.K * scenario.D)
    F = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return normalize_precoder(F, scenario.P)


def normalize_precoder(F: np.ndarray, P: float) -> np.ndarray:
    tr = power(F)
    if not tr > 0:
        raise SolverError("cannot normalize an all-zero precoder")
    return F * np.sqrt(P / tr)


def combiner_gamma(F, sigma2, P) -> float:
    return sigma2 / P * power(F)


def mmse_combiner(Hk: np.ndarray, F: np.ndarray, Fk: np.ndarray, gamma1: float) -> np.ndarray:
    """``(Hk F F^H Hk^H + gamma1 I)^{-1} Hk Fk``."""
    G = Hk @ F
    A = G @ G.conj().T
    A[np.diag_indices(A.shape[0])] += gamma1
    return linalg.solve(A, Hk @ Fk, assume_a="pos")


def update_combiner(channels: ChannelSet, F, k, sigma2, P) -> np.ndarray:
    D = streams_per_user(F, channels.K)
    return mmse_combiner(channels.H[k], F, user_block(F, k, D), combiner_gamma(F, sigma2, P))


def combiner_rls_form(channels: ChannelSet, F, k, sigma2, P) -> np.ndarray:
    """Same combiner as a ridge fit of the user indicator ``I_k (KD x D)``."""
    K = channels.K
    D = streams_per_user(F, K)
    target = np.zeros((K * D, D), dtype=complex)
    target[k * D:(k + 1) * D] = np.eye(D)
    Phi = F.conj().T @ channels.H[k].conj().T
    return rls_solve(Phi, target, combiner_gamma(F, sigma2, P))


def weight_from(Hk: np.ndarray, Fk: np.ndarray, Wk: np.ndarray, iteration=None) -> np.ndarray:
    """``(I - Fk^H Hk^H Wk)^{-1}``; ``Hk`` may be any effective channel."""
    D = Fk.shape[1]
    M = np.eye(D, dtype=complex) - Fk.conj().T @ Hk.conj().T @ Wk
    try:
        return np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise SolverError("singular weight update", iteration=iteration, step="B-update") from exc


def update_weight(channels: ChannelSet, F, W, k, iteration=None) -> np.ndarray:
    D = streams_per_user(F, channels.K)
    return weight_from(channels.H[k], user_block(F, k, D), W, iteration)


def precoder_gamma(W, B, scenario: Scenario) -> float:
    return float(sum(
        scenario.alpha[k] * scenario.sigma2[k] / scenario.P
        * np.real(np.trace(W[k] @ B[k] @ W[k].conj().T))
        for k in range(scenario.K)
    ))


def update_precoder(channels: ChannelSet, W, B, scenario: Scenario, iteration=None) -> np.ndarray:
    """First-order optimal precoder for fixed ``W`` and ``B`` (not normalized)."""
    gamma2 = precoder_gamma(W, B, scenario)
    if not gamma2 > 0:
        raise SolverError("precoder regularizer is zero (all combiners vanish)",
                          iteration=iteration, step="F-update")
    Nt = channels.H.shape[2]
    A = gamma2 * np.eye(Nt, dtype=complex)
    rhs = []
    for k in range(scenario.K):
        HW = channels.H[k].conj().T @ W[k]  # Nt x D
        A = A + scenario.alpha[k] * HW @ B[k] @ HW.conj().T
        rhs.append(scenario.alpha[k] * HW @ B[k])
    A = 0.5 * (A + A.conj().T)
    return linalg.solve(A, np.hstack(rhs), assume_a="pos")


def stacked_system(channels: ChannelSet, W, B, alpha):
    """``(H_tilde, B_tilde^{1/2})`` of the ridge form of the precoder update."""
    rows, roots = [], []
    for k in range(len(W)):
        Bs = np.sqrt(alpha[k]) * psd_sqrt(B[k])
        rows.append(Bs @ W[k].conj().T @ channels.H[k])
        roots.append(Bs)
    return np.vstack(rows), linalg.block_diag(*roots)


def precoder_rls_form(channels: ChannelSet, W, B, scenario: Scenario) -> np.ndarray:
    Ht, Bt = stacked_system(channels, W, B, scenario.alpha)
    return rls_solve(Ht, Bt, precoder_gamma(W, B, scenario))


def run_wmmse(scenario: Scenario, channels: ChannelSet, iterations: int = DEFAULT_ITERATIONS,
              seed: int | None = None, F0: np.ndarray | None = None):
    """Classical WMMSE on fixed channels.

    Returns the final :class:`BeamformingState` (precoder scaled to ``P``)
    and a :class:`SolverTrace` with the sum rate and objective after every
    sweep.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    F = init_precoder(scenario, scenario.seed if seed is None else seed) if F0 is None else F0
    trace = SolverTrace()
    W = B = None
    for it in range(1, iterations + 1):
        gamma1 = [combiner_gamma(F, scenario.sigma2[k], scenario.P) for k in range(scenario.K)]
        W = [update_combiner(channels, F, k, scenario.sigma2[k], scenario.P)
             for k in range(scenario.K)]
        B = [update_weight(channels, F, W[k], k, it) for k in range(scenario.K)]
        gamma2 = precoder_gamma(W, B, scenario)
        F = update_precoder(channels, W, B, scenario, it)
        trace.record(sum_rate(channels, F, scenario), objective_at(channels, F, W, B, scenario),
                     gamma1, gamma2)
    F = normalize_precoder(F, scenario.P)
    return BeamformingState(F=F, W=W, B=B), trace


def mmse_baseline(scenario: Scenario, channels: ChannelSet) -> BeamformingState:
    """One-shot regularized zero-forcing with unit weights.

    Each user's receive directions are the ``D`` leading left singular
    vectors of its channel; the precoder is the first-order optimal one for
    those combiners with ``B_k = I``, and the combiners are then refitted as
    MMSE receivers.  An all-zero channel makes the precoder vanish and raises
    :class:`SolverError`.
    """
    D = scenario.D
    W0 = [np.linalg.svd(channels.H[k])[0][:, :D] for k in range(scenario.K)]
    eye = [np.eye(D, dtype=complex) for _ in range(scenario.K)]
    F = normalize_precoder(update_precoder(channels, W0, eye, scenario), scenario.P)
    W = [update_combiner(channels, F, k, scenario.sigma2[k], scenario.P) for k in range(scenario.K)]
    B = [update_weight(channels, F, W[k], k) for k in range(scenario.K)]
    return BeamformingState(F=F, W=W, B=B)
