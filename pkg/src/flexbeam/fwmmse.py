"""Flexible WMMSE: joint beamforming and on-grid antenna placement.

Each iteration fits every user's combiner as a row-sparse ridge problem
over its receive codebook (the selected rows are the antennas, the row
indices their positions), refreshes the weights on the moved channels, then
fits the precoder the same way over the transmit codebook.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .dictionary import ScenarioDictionaries, grid_size
from .errors import ConfigurationError, SolverError
from .metrics import BeamformingState, objective_at, power, psd_sqrt, sum_rate
from .rls_somp import solve_somp
from .scenario import Scenario, assemble_channel, manifold_matrix, upa_positions
from .wmmse import (DEFAULT_ITERATIONS, SolverTrace, init_precoder, normalize_precoder,
                    precoder_gamma, weight_from)


@dataclass(frozen=True)
class FwmmseConfig:
    """``Ut``/``Ur`` of ``None`` take the regions stored on the scenario."""

    iterations: int = DEFAULT_ITERATIONS
    Ut: float | None = None
    Ur: float | None = None
    somp_mode: str = "fast"
    record_trace: bool = True

    def validate(self):
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        for U in (self.Ut, self.Ur):
            if U is not None:
                grid_size(U)
        if self.somp_mode not in ("fast", "naive"):
            raise ConfigurationError(f"unknown SOMP mode {self.somp_mode!r}")


def user_indicator(K: int, D: int, k: int) -> np.ndarray:
    out = np.zeros((K * D, D), dtype=complex)
    out[k * D:(k + 1) * D] = np.eye(D)
    return out


def build_phi_r(F, A_T_k, Sigma_k, G_R_k) -> np.ndarray:
    """Receive sensing matrix ``F^H A_T Sigma^H G_R`` (KD x G_r)."""
    return (F.conj().T @ A_T_k) @ (Sigma_k.conj().T @ G_R_k)


def build_phi_t(B, W, A_R, Sigma, G_T, alpha) -> np.ndarray:
    """Transmit sensing matrix ``blkdiag(sqrt(a_k) B_k^{1/2} W_k^H A_R,k Sigma_k) G_T``."""
    K = len(W)
    L = Sigma[0].shape[0]
    if G_T.shape[0] != K * L:
        raise ValueError(f"stacked dictionary has {G_T.shape[0]} rows, expected {K * L}")
    blocks = []
    for k in range(K):
        Psi_k = np.sqrt(alpha[k]) * psd_sqrt(B[k]) @ W[k].conj().T @ A_R[k] @ Sigma[k]
        blocks.append(Psi_k @ G_T[k * L:(k + 1) * L])
    return np.vstack(blocks)


def update_rx(F, A_T, Sigma, scenario: Scenario, dicts: ScenarioDictionaries, mode="fast"):
    """Sparse combiner fit for every user.

    Returns lists ``W``, ``Lambda_R``, ``A_R`` (Nr x L manifolds at the
    chosen positions) and ``q`` (chosen positions).
    """
    K, D = scenario.K, scenario.D
    W, Lam, A_R, q = [], [], [], []
    for k in range(K):
        gamma1 = scenario.sigma2[k] / scenario.P * power(F)
        Phi = build_phi_r(F, A_T[k], Sigma[k], dicts.rx[k].atoms)
        sol = solve_somp(user_indicator(K, D, k), Phi, gamma1, scenario.Nr, mode)
        W.append(sol.X)
        Lam.append(list(sol.Lambda))
        A_R.append(dicts.rx[k].manifold(sol.Lambda))
        q.append(dicts.rx[k].positions(sol.Lambda))
    return W, Lam, A_R, q


def update_weight_f(F_k, A_T_k, Sigma_k, A_R_k, W_k, iteration=None) -> np.ndarray:
    """``(I - F_k^H A_T Sigma^H A_R^H W_k)^{-1}`` on the moved receive array."""
    H_eff = A_R_k @ Sigma_k @ A_T_k.conj().T
    return weight_from(H_eff, F_k, W_k, iteration)


def update_tx(B, W, A_R, Sigma, scenario: Scenario, dicts: ScenarioDictionaries, mode="fast"):
    """Sparse precoder fit over the transmit codebook.

    Returns ``F`` (Nt x KD, rows in selection order), ``Lambda_T``, the
    per-user transmit manifolds at the chosen positions and the positions.
    """
    gamma2 = precoder_gamma(W, B, scenario)
    if not gamma2 > 0:
        raise SolverError("precoder regularizer is zero", step="F-update")
    Phi = build_phi_t(B, W, A_R, Sigma, dicts.tx.atoms, scenario.alpha)
    target = linalg.block_diag(*[np.sqrt(scenario.alpha[k]) * psd_sqrt(B[k])
                                 for k in range(scenario.K)])
    sol = solve_somp(target, Phi, gamma2, scenario.Nt, mode)
    L = scenario.L
    sel = dicts.tx.manifold(sol.Lambda)  # Nt x KL
    A_T = [sel[:, k * L:(k + 1) * L] for k in range(scenario.K)]
    return sol.X, list(sol.Lambda), A_T, dicts.tx.positions(sol.Lambda)


def run_fwmmse(scenario: Scenario, config: FwmmseConfig | None = None, seed: int | None = None,
               F0: np.ndarray | None = None):
    """Run F-WMMSE and return ``(state, trace)``.

    The precoder starts random (same generator stream as
    :func:`flexbeam.wmmse.init_precoder`) on a fixed half-wavelength UPA.
    The trace records the sum rate after every transmit update, evaluated on
    channels rebuilt from the current positions.  The state is the last
    iterate with ``F`` scaled to ``P``.
    """
    config = config or FwmmseConfig()
    config.validate()
    dicts = ScenarioDictionaries.build(scenario, config.Ut, config.Ur)
    K, D, L = scenario.K, scenario.D, scenario.L
    F = init_precoder(scenario, scenario.seed if seed is None else seed) if F0 is None else F0
    p = upa_positions(scenario.Nt)
    A_T = [manifold_matrix(p, scenario.aod[k]) for k in range(K)]
    Sigma = [np.diag(scenario.beta[k]) / np.sqrt(L) for k in range(K)]
    trace = SolverTrace()
    W = B = q = Lam_R = Lam_T = None

    for it in range(1, config.iterations + 1):
        gamma1 = [scenario.sigma2[k] / scenario.P * power(F) for k in range(K)]
        try:
            W, Lam_R, A_R, q = update_rx(F, A_T, Sigma, scenario, dicts, config.somp_mode)
        except (np.linalg.LinAlgError, SolverError) as exc:
            raise SolverError(f"receive update failed: {exc}", iteration=it, step="rx-update") from exc
        B = [update_weight_f(F[:, k * D:(k + 1) * D], A_T[k], Sigma[k], A_R[k], W[k], it)
             for k in range(K)]
        gamma2 = precoder_gamma(W, B, scenario)
        try:
            F, Lam_T, A_T, p = update_tx(B, W, A_R, Sigma, scenario, dicts, config.somp_mode)
        except (np.linalg.LinAlgError, SolverError) as exc:
            raise SolverError(f"transmit update failed: {exc}", iteration=it, step="tx-update") from exc
        if config.record_trace or it == config.iterations:
            channels = assemble_channel(scenario, p, q)
            trace.record(sum_rate(channels, F, scenario),
                         objective_at(channels, F, W, B, scenario), gamma1, gamma2)

    F = normalize_precoder(F, scenario.P)
    state = BeamformingState(F=F, W=W, B=B, p=p, q=q, Lambda_T=Lam_T, Lambda_R=Lam_R)
    return state, trace
