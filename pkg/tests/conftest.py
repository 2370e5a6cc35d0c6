import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flexbeam.scenario import ScenarioConfig, assemble_channel, sample_scenario, upa_positions

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SMALL = ScenarioConfig(K=2, Nt=16, Nr=4, D=2, L=5, P=10 ** 0.5, Ut=3.0, Ur=1.5)


def fixed_channels(scenario):
    """Channels of the half-wavelength UPAs on both sides."""
    return assemble_channel(scenario, upa_positions(scenario.Nt),
                            [upa_positions(scenario.Nr)] * scenario.K)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def rel(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_scenario():
    return sample_scenario(SMALL, 7)
