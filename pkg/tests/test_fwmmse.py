import itertools

import numpy as np
import pytest
from dataclasses import replace
from scipy import linalg

from flexbeam.dictionary import ScenarioDictionaries, build_grid
from flexbeam.errors import ConfigurationError, SolverError
from flexbeam.fwmmse import (FwmmseConfig, build_phi_r, build_phi_t, run_fwmmse, update_rx, update_tx,
                             update_weight_f, user_indicator)
from flexbeam.metrics import equivalent_mse, power, psd_sqrt, sum_rate
from flexbeam.rls_somp import rls_solve, rls_somp
from flexbeam.scenario import (ScenarioConfig, assemble_channel, manifold_matrix, sample_scenario,
                               upa_positions)
from flexbeam.wmmse import (init_precoder, precoder_gamma, run_wmmse, update_combiner, update_precoder,
                            update_weight)

from conftest import SMALL, crandn, fixed_channels, rel


def factors(sc, p=None):
    p = upa_positions(sc.Nt) if p is None else p
    A_T = [manifold_matrix(p, sc.aod[k]) for k in range(sc.K)]
    Sigma = [np.diag(sc.beta[k]) / np.sqrt(sc.L) for k in range(sc.K)]
    return A_T, Sigma


def test_config_validation():
    FwmmseConfig().validate()
    for bad in (dict(iterations=0), dict(Ut=1.3), dict(somp_mode="slow")):
        with pytest.raises(ConfigurationError):
            FwmmseConfig(**bad).validate()


def test_phi_r_origin_column_and_rank(small_scenario, rng):
    sc = small_scenario
    dicts = ScenarioDictionaries.build(sc)
    A_T, Sigma = factors(sc)
    F = crandn(rng, 16, 4)
    Phi = build_phi_r(F, A_T[0], Sigma[0], dicts.rx[0].atoms)
    assert np.allclose(Phi[:, 0], F.conj().T @ A_T[0] @ Sigma[0].conj().T @ np.ones(sc.L))
    sc1 = sample_scenario(replace(SMALL, L=1), 3)
    A1, S1 = factors(sc1)
    Phi1 = build_phi_r(F, A1[0], S1[0], ScenarioDictionaries.build(sc1).rx[0].atoms)
    assert np.linalg.matrix_rank(Phi1, tol=1e-10) <= 1
    with pytest.raises(ValueError):
        build_phi_r(F, A_T[0][:8], Sigma[0], dicts.rx[0].atoms)


def test_phi_r_columns_are_single_antenna_channels(small_scenario, rng):
    sc = replace(small_scenario, Nr=1, D=1)
    dicts = ScenarioDictionaries.build(sc)
    A_T, Sigma = factors(sc)
    F = crandn(rng, 16, 2)
    for k in range(sc.K):
        Phi = build_phi_r(F, A_T[k], Sigma[k], dicts.rx[k].atoms)
        for g, pos in enumerate(dicts.rx[k].grid):
            ch = assemble_channel(sc, upa_positions(16), [[pos]] * sc.K)
            assert np.allclose(Phi[:, g], (F.conj().T @ ch.H[k].conj().T).ravel(), atol=1e-12)


def test_single_point_receive_grid():
    sc = sample_scenario(ScenarioConfig(K=2, Nt=4, Nr=1, D=1, L=3, Ur=0.5, Ut=1.0), 1)
    dicts = ScenarioDictionaries.build(sc)
    A_T, Sigma = factors(sc)
    F = init_precoder(sc, 0)
    W, Lam, A_R, q = update_rx(F, A_T, Sigma, sc, dicts)
    for k in range(2):
        assert Lam[k] == [0] and np.array_equal(q[k], [[0.0, 0.0]])
        Phi = build_phi_r(F, A_T[k], Sigma[k], dicts.rx[k].atoms)
        gamma1 = power(F) / sc.P
        assert np.allclose(W[k], rls_solve(Phi[:, [0]], user_indicator(2, 1, k), gamma1))


def test_full_receive_grid_reproduces_fixed_combiner(small_scenario, rng):
    sc = small_scenario
    dicts = ScenarioDictionaries.build(sc, Ur=1.0)  # G_r = 4 = Nr
    A_T, Sigma = factors(sc)
    F = crandn(rng, 16, 4)
    W, Lam, A_R, q = update_rx(F, A_T, Sigma, sc, dicts)
    ch = fixed_channels(sc)
    for k in range(2):
        assert sorted(Lam[k]) == [0, 1, 2, 3]
        W_fixed = update_combiner(ch, F, k, 1.0, sc.P)
        assert rel(W[k], W_fixed[Lam[k]]) < 1e-10


def test_receive_fit_beats_fixed_array_mostly():
    cfg = ScenarioConfig.from_snr_db(10.0)
    wins = total = 0
    for s in range(100):
        sc = sample_scenario(cfg, s)
        dicts = ScenarioDictionaries.build(sc)
        A_T, Sigma = factors(sc)
        F = init_precoder(sc, s)
        W, _, _, q = update_rx(F, A_T, Sigma, sc, dicts)
        moved = assemble_channel(sc, upa_positions(16), q)
        ch = fixed_channels(sc)
        for k in range(sc.K):
            e_moved = np.trace(equivalent_mse(moved, F, W[k], k, 1.0, sc.P)).real
            W0 = update_combiner(ch, F, k, 1.0, sc.P)
            e_fixed = np.trace(equivalent_mse(ch, F, W0, k, 1.0, sc.P)).real
            wins += e_moved <= e_fixed
            total += 1
    assert wins >= 0.8 * total


def test_weight_update_reductions(small_scenario, rng):
    sc = small_scenario
    A_T, Sigma = factors(sc)
    ch = fixed_channels(sc)
    F = crandn(rng, 16, 4)
    A_R = manifold_matrix(upa_positions(4), sc.aoa[0])
    assert np.allclose(update_weight_f(F[:, :2], A_T[0], Sigma[0], A_R, np.zeros((4, 2))), np.eye(2))
    W = update_combiner(ch, F, 0, 1.0, sc.P)
    assert np.allclose(update_weight_f(F[:, :2], A_T[0], Sigma[0], A_R, W), update_weight(ch, F, W, 0))


def test_weight_hermitian_with_exact_sparse_combiner(small_scenario, rng):
    sc = small_scenario
    dicts = ScenarioDictionaries.build(sc)
    A_T, Sigma = factors(sc)
    F = crandn(rng, 16, 4)
    W, _, A_R, _ = update_rx(F, A_T, Sigma, sc, dicts)
    for k in range(2):
        B = update_weight_f(F[:, 2 * k:2 * k + 2], A_T[k], Sigma[k], A_R[k], W[k])
        assert np.linalg.norm(B - B.conj().T) <= 1e-9 * np.linalg.norm(B)


def test_weight_update_singular_raises():
    # W chosen so that F_k^H H^H W = I exactly
    A_T, A_R, Sigma = np.ones((1, 1)), np.ones((1, 1)), np.ones((1, 1))
    with pytest.raises(SolverError, match="iteration 4"):
        update_weight_f(np.ones((1, 1)), A_T, Sigma, A_R, np.ones((1, 1)), iteration=4)


def test_phi_t_trivial_cases(rng):
    sc = sample_scenario(ScenarioConfig(K=1, Nt=4, Nr=1, D=1, L=3), 0)
    dicts = ScenarioDictionaries.build(sc, Ut=2.0)
    A_R = [manifold_matrix(upa_positions(1), sc.aoa[0])]
    Sigma = [np.diag(sc.beta[0]) / np.sqrt(3)]
    W, B = [crandn(rng, 1, 1)], [np.array([[2.0]])]
    Phi = build_phi_t(B, W, A_R, Sigma, dicts.tx.atoms, sc.alpha)
    assert np.allclose(Phi, np.sqrt(2.0) * W[0].conj().T @ A_R[0] @ Sigma[0] @ dicts.tx.atoms)
    assert np.allclose(build_phi_t(B, [np.zeros((1, 1))], A_R, Sigma, dicts.tx.atoms, sc.alpha), 0)
    with pytest.raises(ValueError):
        build_phi_t(B, W, A_R, Sigma, dicts.tx.atoms[:2], sc.alpha)


def test_phi_t_columns_are_stacked_single_antenna_channels(small_scenario, rng):
    sc = replace(small_scenario, alpha=np.array([0.7, 1.6]))
    dicts = ScenarioDictionaries.build(sc)
    q = [upa_positions(4)] * 2
    A_R = [manifold_matrix(q[k], sc.aoa[k]) for k in range(2)]
    _, Sigma = factors(sc)
    W = [crandn(rng, 4, 2) for _ in range(2)]
    B = [(lambda A: A @ A.conj().T + np.eye(2))(crandn(rng, 2, 2)) for _ in range(2)]
    Phi = build_phi_t(B, W, A_R, Sigma, dicts.tx.atoms, sc.alpha)
    for g in range(0, dicts.tx.G, 7):
        one = replace(sc, Nt=1)
        ch = assemble_channel(one, [dicts.tx.grid[g]], q)
        col = np.vstack([np.sqrt(sc.alpha[k]) * psd_sqrt(B[k]) @ W[k].conj().T @ ch.H[k] for k in range(2)])
        assert np.allclose(Phi[:, [g]], col, atol=1e-12)


def test_full_transmit_grid_reproduces_fixed_precoder(small_scenario, rng):
    sc = small_scenario
    dicts = ScenarioDictionaries.build(sc, Ut=2.0)  # G_t = 16 = Nt
    ch = fixed_channels(sc)
    F0 = crandn(rng, 16, 4)
    W = [update_combiner(ch, F0, k, 1.0, sc.P) for k in range(2)]
    B = [update_weight(ch, F0, W[k], k) for k in range(2)]
    A_R = [ch.A_R[k] for k in range(2)]
    _, Sigma = factors(sc)
    F, Lam, A_T, p = update_tx(B, W, A_R, Sigma, sc, dicts)
    assert sorted(Lam) == list(range(16))
    assert rel(F, update_precoder(ch, W, B, sc)[Lam]) < 1e-10
    assert np.allclose(p, upa_positions(16)[Lam])


def test_single_user_transmit_fit_is_flexible_rzf(rng):
    sc = sample_scenario(ScenarioConfig(K=1, Nt=4, Nr=1, D=1, L=4, P=5.0, Ut=2.0), 2)
    dicts = ScenarioDictionaries.build(sc)
    A_R = [manifold_matrix(upa_positions(1), sc.aoa[0])]
    _, Sigma = factors(sc)
    W, B = [crandn(rng, 1, 1)], [np.array([[1.8]])]
    F, Lam, _, _ = update_tx(B, W, A_R, Sigma, sc, dicts)
    # divide the scalar sqrt(B) out of both target and sensing matrix
    h = W[0].conj().T @ A_R[0] @ Sigma[0] @ dicts.tx.atoms
    ref = rls_somp(np.ones((1, 1)), h, precoder_gamma(W, B, sc) / 1.8, 4)
    assert Lam == ref.Lambda and np.allclose(F, ref.X, atol=1e-12)


def test_transmit_support_is_valid():
    sc = sample_scenario(ScenarioConfig.from_snr_db(10.0), 0)
    state, _ = run_fwmmse(sc, FwmmseConfig(iterations=3))
    assert len(set(state.Lambda_T)) == 16
    d = min(np.hypot(*(a - b)) for a, b in itertools.combinations(state.p, 2))
    assert d >= 0.5 - 1e-12
    assert state.p.min() >= 0 and state.p.max() <= 6.0
    for k in range(4):
        assert len(set(state.Lambda_R[k])) == 4
        assert state.q[k].min() >= 0 and state.q[k].max() <= 3.0
        assert set(map(tuple, state.q[k])) <= set(map(tuple, build_grid(3.0)))


def test_reduces_to_wmmse_on_upa_only_grids():
    for s in range(3):
        sc = sample_scenario(replace(SMALL, Ut=2.0, Ur=1.0), s)
        ch = fixed_channels(sc)
        for T in (1, 4, 10):
            sw, tw = run_wmmse(sc, ch, T)
            sf, tf = run_fwmmse(sc, FwmmseConfig(iterations=T))
            assert np.max(np.abs(np.subtract(tw.sum_rate, tf.sum_rate))) < 1e-8
            assert rel(sf.F, sw.F[sf.Lambda_T]) < 1e-8


def test_trace_matches_rebuilt_channels_and_power():
    sc = sample_scenario(ScenarioConfig.from_snr_db(5.0), 4)
    state, tr = run_fwmmse(sc, FwmmseConfig(iterations=6))
    ch = assemble_channel(sc, state.p, state.q)
    assert abs(sum_rate(ch, state.F, sc) - tr.sum_rate[-1]) <= 1e-10 * tr.sum_rate[-1]
    assert abs(power(state.F) - sc.P) <= 1e-9 * sc.P
    assert len(tr.sum_rate) == 6 and tr.best_sum_rate == max(tr.sum_rate)


def test_naive_and_fast_modes_agree():
    sc = sample_scenario(ScenarioConfig.from_snr_db(10.0), 8)
    _, a = run_fwmmse(sc, FwmmseConfig(iterations=5, somp_mode="fast"))
    _, b = run_fwmmse(sc, FwmmseConfig(iterations=5, somp_mode="naive"))
    assert np.allclose(a.sum_rate, b.sum_rate, rtol=1e-9)


def test_failure_reports_iteration_and_step(small_scenario, monkeypatch):
    import flexbeam.fwmmse as fw

    def boom(*a, **k):
        raise np.linalg.LinAlgError("singular")
    monkeypatch.setattr(fw, "solve_somp", boom)
    with pytest.raises(SolverError, match=r"iteration 1, rx-update"):
        run_fwmmse(small_scenario, FwmmseConfig(iterations=2))


def test_single_path_gain_is_small():
    cfg = ScenarioConfig.from_snr_db(5.0, L=1)
    fw, wm = [], []
    for s in range(50):
        sc = sample_scenario(cfg, s)
        fw.append(run_fwmmse(sc)[1].sum_rate[-1])
        wm.append(run_wmmse(sc, fixed_channels(sc))[1].sum_rate[-1])
    assert abs(np.mean(fw) - np.mean(wm)) <= 0.05 * np.mean(wm)
