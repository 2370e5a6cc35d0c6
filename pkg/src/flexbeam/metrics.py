"""Rates, equivalent MSE matrices and the weighted-sum-MSE objective.

The power constraint is folded into the noise term: every formula uses
``(sigma2_k / P) * Tr(F F^H)`` in place of ``sigma2_k``, which makes the rate
and the objective invariant to the scale of ``F``.

Precoders ``F`` are ``Nt x KD`` with user ``k`` owning columns
``k*D:(k+1)*D``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import ChannelSet

LN2 = np.log(2.0)


@dataclass
class BeamformingState:
    F: np.ndarray
    W: list
    B: list
    p: np.ndarray | None = None
    q: list | None = None
    Lambda_T: list | None = None
    Lambda_R: list = field(default_factory=list)


def user_block(F: np.ndarray, k: int, D: int) -> np.ndarray:
    return F[:, k * D:(k + 1) * D]


def streams_per_user(F: np.ndarray, K: int) -> int:
    D, rem = divmod(F.shape[1], K)
    if rem:
        raise ValueError(f"precoder width {F.shape[1]} is not a multiple of K={K}")
    return D


def power(F: np.ndarray) -> float:
    return float(np.real(np.vdot(F, F)))


def hermitian_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """Hermitian square root with eigenvalues clamped at zero."""
    w, V = np.linalg.eigh(hermitian_part(A))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def logdet_hpd(A: np.ndarray) -> float:
    """Natural log-determinant of a Hermitian positive-definite matrix."""
    L = np.linalg.cholesky(hermitian_part(A))
    return 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))


def interference_plus_noise(channels: ChannelSet, F, k, sigma2, P, literal=False):
    """``sum_{i != k} H F_i F_i^H H^H + (sigma2/P) Tr(FF^H) I``.

    ``H`` is ``H_k`` for every interferer; ``literal=True`` uses ``H_i``
    instead, as the rate formula is printed in some references.
    """
    K = channels.K
    D = streams_per_user(F, K)
    Hk = channels.H[k]
    C = (sigma2 / P) * power(F) * np.eye(Hk.shape[0], dtype=complex)
    for i in range(K):
        if i == k:
            continue
        Hi = channels.H[i] if literal else Hk
        G = Hi @ user_block(F, i, D)
        C = C + G @ G.conj().T
    return C


def user_rate(channels: ChannelSet, F, k, sigma2, P, literal=False) -> float:
    """Rate of user ``k`` in bits/s/Hz with the power-normalized noise term."""
    K = channels.K
    D = streams_per_user(F, K)
    C = interference_plus_noise(channels, F, k, sigma2, P, literal)
    S = channels.H[k] @ user_block(F, k, D)
    # log det(I + S S^H C^-1) = log det(C + S S^H) - log det(C)
    val = logdet_hpd(C + S @ S.conj().T) - logdet_hpd(C)
    return max(val, 0.0) / LN2


def sum_rate(channels: ChannelSet, F, scenario, literal=False) -> float:
    return float(sum(
        scenario.alpha[k] * user_rate(channels, F, k, scenario.sigma2[k], scenario.P, literal)
        for k in range(scenario.K)
    ))


def equivalent_mse(channels: ChannelSet, F, W, k, sigma2, P) -> np.ndarray:
    K = channels.K
    D = streams_per_user(F, K)
    A = W.conj().T @ channels.H[k]  # D x Nt
    E = np.eye(D, dtype=complex) - A @ user_block(F, k, D)
    out = E @ E.conj().T
    for j in range(K):
        if j == k:
            continue
        T = A @ user_block(F, j, D)
        out = out + T @ T.conj().T
    out = out + (sigma2 / P) * power(F) * (W.conj().T @ W)
    return hermitian_part(out)


def wmmse_objective(B, E_tilde, alpha) -> float:
    """``sum_k alpha_k (Tr(B_k E_k) - ln det B_k)``."""
    total = 0.0
    for Bk, Ek, ak in zip(B, E_tilde, alpha):
        total += ak * (float(np.real(np.trace(Bk @ Ek))) - logdet_hpd(Bk))
    return total


def objective_at(channels: ChannelSet, F, W, B, scenario) -> float:
    E = [equivalent_mse(channels, F, W[k], k, scenario.sigma2[k], scenario.P)
         for k in range(scenario.K)]
    return wmmse_objective(B, E, scenario.alpha)
