"""Sum-rate beamforming with movable antennas.

WMMSE and MMSE baselines on fixed arrays, and F-WMMSE, which picks antenna
positions on half-wavelength grids through regularized simultaneous OMP.
"""
from .errors import ConfigurationError, SolverError
from .fwmmse import FwmmseConfig, run_fwmmse
from .rls_somp import rls_somp, rls_somp_fast, solve_somp
from .scenario import Scenario, ScenarioConfig, assemble_channel, sample_scenario, upa_positions
from .wmmse import mmse_baseline, run_wmmse

__version__ = "0.1.0"
