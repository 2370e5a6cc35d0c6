"""Position codebooks over half-wavelength grids.

Atom ``g`` of a dictionary is the array-position manifold of grid point
``g``; picking a set of atoms is the same as placing antennas there.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .scenario import TWO_PI, Scenario

GRID_SPACING = 0.5


@dataclass(frozen=True)
class PositionDictionary:
    """Candidate positions ``grid (G, 2)`` and their atoms (rows x G)."""

    grid: np.ndarray
    atoms: np.ndarray
    side: float
    sqrtG: int

    @property
    def G(self) -> int:
        return self.grid.shape[0]

    def positions(self, support) -> np.ndarray:
        return self.grid[np.asarray(support, dtype=int)]

    def manifold(self, support) -> np.ndarray:
        """Angle-manifold matrix of the antennas placed on ``support``.

        Equals ``atoms[:, support]^H``.
        """
        return np.conj(self.atoms[:, np.asarray(support, dtype=int)]).T


def grid_size(U: float) -> int:
    n = 2.0 * U
    sqrtG = int(round(n))
    if U <= 0 or abs(n - sqrtG) > 1e-9:
        raise ConfigurationError(f"region side {U} is not a positive multiple of 0.5 wavelengths")
    return sqrtG


def build_grid(U: float) -> np.ndarray:
    """``(2U)^2`` points ``(i/2, j/2)`` with ``0 <= i, j < 2U``, x fastest."""
    sqrtG = grid_size(U)
    j, i = np.divmod(np.arange(sqrtG * sqrtG), sqrtG)
    return np.column_stack([i * GRID_SPACING, j * GRID_SPACING]).astype(float)


def _atoms(grid: np.ndarray, angles: np.ndarray) -> np.ndarray:
    # L x G, entry (l, g) = exp(-j 2 pi (phi_l x_g + theta_l z_g))
    phase = np.outer(angles[:, 1], grid[:, 0]) + np.outer(angles[:, 0], grid[:, 1])
    return np.exp(-1j * TWO_PI * phase)


def _check_grid(grid) -> tuple[np.ndarray, int]:
    grid = np.asarray(grid, dtype=float).reshape(-1, 2)
    if grid.shape[0] == 0:
        raise ConfigurationError("empty position grid")
    sqrtG = int(round(np.sqrt(grid.shape[0])))
    return grid, sqrtG


def build_rx_dictionary(scenario: Scenario, k: int, grid) -> PositionDictionary:
    """``L x G_r`` codebook of user ``k`` over its arrival angles."""
    grid, sqrtG = _check_grid(grid)
    return PositionDictionary(grid, _atoms(grid, scenario.aoa[k]), sqrtG * GRID_SPACING, sqrtG)


def build_tx_dictionary(scenario: Scenario, grid) -> PositionDictionary:
    """``KL x G_t`` codebook, user blocks of ``L`` rows stacked in user order."""
    grid, sqrtG = _check_grid(grid)
    atoms = np.vstack([_atoms(grid, scenario.aod[k]) for k in range(scenario.K)])
    return PositionDictionary(grid, atoms, sqrtG * GRID_SPACING, sqrtG)


@dataclass(frozen=True)
class ScenarioDictionaries:
    tx: PositionDictionary
    rx: tuple

    @classmethod
    def build(cls, scenario: Scenario, Ut: float | None = None, Ur: float | None = None):
        Ut = scenario.Ut if Ut is None else Ut
        Ur = scenario.Ur if Ur is None else Ur
        tx_grid = build_grid(Ut)
        rx_grid = build_grid(Ur)
        if tx_grid.shape[0] < scenario.Nt:
            raise ConfigurationError(
                f"transmit grid has {tx_grid.shape[0]} points, fewer than Nt={scenario.Nt}")
        if rx_grid.shape[0] < scenario.Nr:
            raise ConfigurationError(
                f"receive grid has {rx_grid.shape[0]} points, fewer than Nr={scenario.Nr}")
        rx = tuple(build_rx_dictionary(scenario, k, rx_grid) for k in range(scenario.K))
        return cls(tx=build_tx_dictionary(scenario, tx_grid), rx=rx)

    def tx_block(self, k: int, L: int) -> np.ndarray:
        return self.tx.atoms[k * L:(k + 1) * L]
