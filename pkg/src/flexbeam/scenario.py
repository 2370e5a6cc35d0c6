"""Random geometric multipath scenarios and array manifolds.

All coordinates are in wavelength units, so every phase term is
``2*pi*(phi*x + theta*z)`` with no carrier constant.  Virtual angles are
direction cosines in [-1, 1] stored as ``(theta, phi)`` pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "ScenarioConfig",
    "Scenario",
    "ChannelSet",
    "sample_scenario",
    "array_angle_manifold",
    "array_position_manifold",
    "manifold_matrix",
    "assemble_channel",
    "upa_positions",
    "check_positions",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ScenarioConfig:
    """Dimensions, power and movable-region sizes of one problem instance.

    ``P`` is the linear transmit power; with unit noise it equals the SNR.
    """

    K: int = 4
    Nt: int = 16
    Nr: int = 4
    D: int = 4
    L: int = 10
    P: float = 10.0
    sigma2: float = 1.0
    Ut: float = 6.0
    Ur: float = 3.0

    @classmethod
    def from_snr_db(cls, snr_db: float, **kwargs) -> "ScenarioConfig":
        sigma2 = kwargs.get("sigma2", 1.0)
        return cls(P=sigma2 * 10.0 ** (snr_db / 10.0), **kwargs)

    def validate(self) -> None:
        for name in ("K", "Nt", "Nr", "D", "L"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if not self.D <= self.Nr:
            raise ConfigurationError(f"D <= Nr violated (D={self.D}, Nr={self.Nr})")
        if not self.Nr < self.Nt:
            raise ConfigurationError(f"Nr < Nt violated (Nr={self.Nr}, Nt={self.Nt})")
        if not (self.P > 0 and np.isfinite(self.P)):
            raise ConfigurationError("P must be positive and finite")
        if not self.sigma2 > 0:
            raise ConfigurationError("sigma2 must be positive")
        if not (self.Ut > 0 and self.Ur > 0):
            raise ConfigurationError("movable regions must be positive")


@dataclass(frozen=True)
class Scenario:
    """A sampled problem instance.

    ``aod`` and ``aoa`` have shape ``(K, L, 2)`` holding ``(theta, phi)``;
    ``beta`` has shape ``(K, L)``.
    """

    K: int
    Nt: int
    Nr: int
    D: int
    L: int
    P: float
    sigma2: np.ndarray
    alpha: np.ndarray
    aod: np.ndarray
    aoa: np.ndarray
    beta: np.ndarray
    Ut: float
    Ur: float
    seed: int

    def with_power(self, P: float) -> "Scenario":
        return replace(self, P=float(P))

    def with_regions(self, Ut: float, Ur: float) -> "Scenario":
        return replace(self, Ut=float(Ut), Ur=float(Ur))


@dataclass(frozen=True)
class ChannelSet:
    """Per-user factored channels ``H[k] = A_R[k] @ Sigma[k] @ A_T[k]^H``.

    Shapes: ``A_T (K, Nt, L)``, ``A_R (K, Nr, L)``, ``Sigma (K, L, L)``,
    ``H (K, Nr, Nt)``.
    """

    A_T: np.ndarray
    A_R: np.ndarray
    Sigma: np.ndarray
    H: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.H is None:
            H = self.A_R @ self.Sigma @ np.conj(np.swapaxes(self.A_T, 1, 2))
            object.__setattr__(self, "H", H)

    @property
    def K(self) -> int:
        return self.H.shape[0]


def _as_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ConfigurationError("seed must fit in an unsigned 64-bit integer")
    return seed


def sample_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    """Draw angles uniform on [-1, 1] and gains ``beta ~ CN(0, 1)``.

    The generator is numpy's PCG64 seeded with ``seed``; identical
    ``(config, seed)`` pairs give bit-identical scenarios.
    """
    config.validate()
    seed = _as_seed(seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    K, L = config.K, config.L
    aod = rng.uniform(-1.0, 1.0, size=(K, L, 2))
    aoa = rng.uniform(-1.0, 1.0, size=(K, L, 2))
    beta = (rng.standard_normal((K, L)) + 1j * rng.standard_normal((K, L))) / np.sqrt(2.0)
    return Scenario(
        K=K,
        Nt=config.Nt,
        Nr=config.Nr,
        D=config.D,
        L=L,
        P=float(config.P),
        sigma2=np.full(K, float(config.sigma2)),
        alpha=np.ones(K),
        aod=aod,
        aoa=aoa,
        beta=beta,
        Ut=float(config.Ut),
        Ur=float(config.Ur),
        seed=seed,
    )


def array_angle_manifold(positions, theta: float, phi: float) -> np.ndarray:
    """Steering vector ``exp(+j 2 pi (phi x_n + theta z_n))`` over antennas."""
    if abs(theta) > 1 or abs(phi) > 1:
        raise ConfigurationError("virtual angles must lie in [-1, 1]")
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    return np.exp(1j * TWO_PI * (phi * pos[:, 0] + theta * pos[:, 1]))


def array_position_manifold(x: float, z: float, angles) -> np.ndarray:
    """Per-path phase vector ``exp(-j 2 pi (phi_l x + theta_l z))`` at one position.

    Note the sign is the conjugate of :func:`array_angle_manifold`.
    """
    ang = np.asarray(angles, dtype=float).reshape(-1, 2)
    return np.exp(-1j * TWO_PI * (ang[:, 1] * x + ang[:, 0] * z))


def manifold_matrix(positions, angles) -> np.ndarray:
    """``N x L`` matrix whose column ``l`` is the angle manifold of path ``l``."""
    pos = np.asarray(positions, dtype=float).reshape(-1, 2)
    ang = np.asarray(angles, dtype=float).reshape(-1, 2)
    phase = np.outer(pos[:, 0], ang[:, 1]) + np.outer(pos[:, 1], ang[:, 0])
    return np.exp(1j * TWO_PI * phase)


def check_positions(positions, count: int, region: float | None = None) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != 2:
        raise ValueError("positions must have shape (N, 2)")
    if pos.shape[0] != count:
        raise ValueError(f"expected {count} antenna positions, got {pos.shape[0]}")
    if region is not None and (pos.min() < 0 or pos.max() > region):
        raise ConfigurationError(f"positions leave the movable region [0, {region}]")
    return pos


def assemble_channel(scenario: Scenario, p, q) -> ChannelSet:
    """Build every user's channel for BS positions ``p`` and user positions ``q[k]``."""
    p = check_positions(p, scenario.Nt)
    if len(q) != scenario.K:
        raise ValueError(f"expected {scenario.K} user position sets, got {len(q)}")
    A_T = np.stack([manifold_matrix(p, scenario.aod[k]) for k in range(scenario.K)])
    A_R = np.stack(
        [manifold_matrix(check_positions(q[k], scenario.Nr), scenario.aoa[k])
         for k in range(scenario.K)]
    )
    Sigma = np.stack([np.diag(scenario.beta[k]) for k in range(scenario.K)])
    Sigma = Sigma / np.sqrt(scenario.L)
    return ChannelSet(A_T=A_T, A_R=A_R, Sigma=Sigma)


def upa_positions(n: int, spacing: float = 0.5) -> np.ndarray:
    """Square ``sqrt(n) x sqrt(n)`` array anchored at the origin, x varying fastest."""
    side = int(round(np.sqrt(n)))
    if n < 1 or side * side != n:
        raise ConfigurationError(f"UPA size must be a perfect square, got {n}")
    j, i = np.divmod(np.arange(n), side)
    return np.column_stack([i * spacing, j * spacing]).astype(float)
