import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, strategies as st

from flexbeam.errors import ConfigurationError
from flexbeam.scenario import (ScenarioConfig, array_angle_manifold, array_position_manifold,
                               assemble_channel, manifold_matrix, sample_scenario, upa_positions)

angle = st.floats(-1, 1)
coord = st.floats(0, 8)


def test_same_seed_is_bit_identical():
    cfg = ScenarioConfig()
    a, b = sample_scenario(cfg, 99), sample_scenario(cfg, 99)
    for name in ("aod", "aoa", "beta"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert not np.array_equal(a.beta, sample_scenario(cfg, 100).beta)


def test_main_setup_shapes():
    sc = sample_scenario(ScenarioConfig(K=4, Nt=16, Nr=4, D=4, L=10), 0)
    assert (sc.K, sc.Nt, sc.Nr, sc.D, sc.L) == (4, 16, 4, 4, 10)
    assert sc.aod.shape == sc.aoa.shape == (4, 10, 2)
    assert sc.beta.shape == (4, 10)
    assert np.all(sc.sigma2 > 0) and np.all(sc.alpha > 0) and sc.P > 0


def test_angles_uniform_on_unit_interval():
    sc = sample_scenario(ScenarioConfig(K=10, L=500), 3)
    ang = np.concatenate([sc.aod.ravel(), sc.aoa.ravel()])
    assert ang.size >= 10_000
    assert abs(ang.mean()) < 0.05
    assert ang.min() >= -1 and ang.max() <= 1


@pytest.mark.parametrize("kw, text", [
    (dict(D=5, Nr=4), "D <= Nr"),
    (dict(Nr=16, Nt=16), "Nr < Nt"),
    (dict(K=0), "K must be"),
])
def test_invalid_dimensions_name_the_inequality(kw, text):
    with pytest.raises(ConfigurationError, match=text):
        sample_scenario(ScenarioConfig(**kw), 0)


def test_seed_must_fit_u64():
    with pytest.raises(ConfigurationError):
        sample_scenario(ScenarioConfig(), 2**64)
    sample_scenario(ScenarioConfig(), 2**64 - 1)


def test_angle_manifold_simple_values():
    assert np.allclose(array_angle_manifold([[0, 0]], 0.3, -0.7), [1])
    assert np.allclose(array_angle_manifold([[0.5, 0]], 0.0, 1.0), [-1])
    with pytest.raises(ConfigurationError):
        array_angle_manifold([[0, 0]], 1.2, 0.0)


def test_angle_manifold_matches_per_entry_loop(rng):
    pos = rng.uniform(0, 3, size=(8, 2))
    theta, phi = rng.uniform(-1, 1, 2)
    ref = [np.exp(2j * np.pi * (phi * x + theta * z)) for x, z in pos]
    assert np.max(np.abs(array_angle_manifold(pos, theta, phi) - ref)) < 1e-14


def test_position_manifold_simple_values(rng):
    ang = rng.uniform(-1, 1, size=(6, 2))
    assert np.allclose(array_position_manifold(0, 0, ang), np.ones(6))
    assert np.allclose(array_position_manifold(1.3, 0.4, [[0, 0]]), [1])


@given(coord, coord, angle, angle)
def test_position_manifold_is_conjugate_of_angle_manifold(x, z, theta, phi):
    a = array_angle_manifold([[x, z]], theta, phi)[0]
    b = array_position_manifold(x, z, [[theta, phi]])[0]
    assert abs(b - np.conj(a)) < 1e-12


def _unit_scenario(**kw):
    base = sample_scenario(ScenarioConfig(K=1, Nt=2, Nr=1, D=1, L=1), 0)
    return replace(base, **kw)


def test_single_unit_path_at_origin():
    sc = _unit_scenario(Nt=1, aod=np.zeros((1, 1, 2)), aoa=np.zeros((1, 1, 2)),
                        beta=np.ones((1, 1), dtype=complex))
    ch = assemble_channel(sc, [[0, 0]], [[[0, 0]]])
    assert np.allclose(ch.H[0], [[1]])


def test_single_path_norm(rng):
    sc = sample_scenario(ScenarioConfig(K=3, Nt=9, Nr=4, D=2, L=1), 5)
    ch = assemble_channel(sc, rng.uniform(0, 3, (9, 2)), [rng.uniform(0, 2, (4, 2)) for _ in range(3)])
    for k in range(3):
        assert np.isclose(np.linalg.norm(ch.H[k]), abs(sc.beta[k, 0]) * np.sqrt(4 * 9), rtol=1e-12)


def test_path_sum_matches_factored_form(rng):
    sc = sample_scenario(ScenarioConfig(K=2, Nt=9, Nr=4, D=2, L=5), 11)
    p = rng.uniform(0, 3, (9, 2))
    q = [rng.uniform(0, 2, (4, 2)) for _ in range(2)]
    ch = assemble_channel(sc, p, q)
    for k in range(2):
        H = np.zeros((4, 9), dtype=complex)
        for l in range(5):
            ar = array_angle_manifold(q[k], *sc.aoa[k, l])
            at = array_angle_manifold(p, *sc.aod[k, l])
            H += sc.beta[k, l] * np.outer(ar, at.conj()) / np.sqrt(5)
        assert np.linalg.norm(ch.H[k] - H) < 1e-12 * np.linalg.norm(H)
        recon = ch.A_R[k] @ ch.Sigma[k] @ ch.A_T[k].conj().T
        assert np.linalg.norm(ch.H[k] - recon) < 1e-12 * np.linalg.norm(ch.H[k])
    assert np.max(np.abs(np.abs(ch.A_T) - 1)) < 1e-12
    assert np.max(np.abs(np.abs(ch.A_R) - 1)) < 1e-12


def test_position_count_mismatch(small_scenario):
    with pytest.raises(ValueError):
        assemble_channel(small_scenario, upa_positions(4), [upa_positions(4)] * 2)
    with pytest.raises(ValueError):
        assemble_channel(small_scenario, upa_positions(16), [upa_positions(4)])


def test_upa_positions():
    assert {tuple(p) for p in upa_positions(4)} == {(0, 0), (0.5, 0), (0, 0.5), (0.5, 0.5)}
    assert upa_positions(16).max() == pytest.approx(1.5)
    with pytest.raises(ConfigurationError):
        upa_positions(3)


def test_angle_position_duality(small_scenario):
    pos = upa_positions(16)
    ang = small_scenario.aod[0]
    A = manifold_matrix(pos, ang)  # N x L
    rows = np.array([array_position_manifold(x, z, ang) for x, z in pos])
    assert np.allclose(rows, A.conj(), atol=1e-13)
