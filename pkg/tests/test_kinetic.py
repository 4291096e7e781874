"""Kinetic Brownian motion: sphere constraint, drift, autocorrelation."""

import numpy as np
import pytest

from kineticdyson import hermitian as hm
from kineticdyson.kinetic import (
    KineticState,
    SimConfig,
    default_initial,
    default_initial_batch,
    kbm_step,
    radial_drift_rate,
    simulate_kbm,
    simulate_kbm_ensemble,
)
from kineticdyson.noise import NoiseStream, batch_hermitian_increments


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(d=1, dt=1e-3, t_max=1.0)
    with pytest.raises(ValueError):
        SimConfig(d=2, dt=0.0, t_max=1.0)
    with pytest.raises(ValueError):
        SimConfig(d=2, dt=1e-3, t_max=1.0, scheme="bogus")
    with pytest.raises(ValueError):
        SimConfig(d=2, dt=1e-3, t_max=1.0, gap_floor=-1.0)


def test_default_initial_examples():
    state = default_initial(2, NoiseStream(0))
    assert np.allclose(state.h, np.diag([0.0, 1.0]))
    assert abs(hm.hs_norm(state.hdot) - 1.0) <= 1e-12
    vals, _ = hm.jacobi_eigh(state.h)
    assert hm.min_gap(vals) == pytest.approx(1.0)


def test_zero_noise_step_fixes_velocity():
    """With dw = 0 the radial drift is cancelled by renormalization, so the
    velocity is exactly unchanged and the position advances by hdot dt."""
    cfg = SimConfig(d=3, dt=1e-3, t_max=1.0)
    state = default_initial(3, NoiseStream(1))
    dw = np.zeros((3, 3), dtype=complex)
    new = kbm_step(state, dw, cfg)
    assert np.allclose(new.hdot, state.hdot, atol=1e-14)
    assert np.allclose(new.h, state.h + state.hdot * cfg.dt, atol=1e-15)
    assert new.t == pytest.approx(cfg.dt)


@pytest.mark.parametrize("scheme", ["ito_euler_project", "stratonovich_heun"])
def test_unit_norm_after_steps(scheme):
    cfg = SimConfig(d=2, dt=1e-3, t_max=0.05, scheme=scheme, record_stride=1)
    rec = simulate_kbm_ensemble(cfg, 16, master_seed=3)
    dev = np.abs(hm.hs_norm(rec.frames["hdot"]) - 1.0)
    assert float(np.max(dev)) <= 1e-12


def test_unit_speed_bound():
    cfg = SimConfig(d=2, dt=1e-3, t_max=0.5, record_stride=10)
    rec = simulate_kbm_ensemble(cfg, 8, master_seed=4)
    for it, t in enumerate(rec.times):
        disp = hm.hs_norm(rec.frames["h"][it] - rec.frames["h"][0])
        assert np.all(disp <= t * (1.0 + 1e-9))


def test_horizon_zero_keeps_initial_only():
    cfg = SimConfig(d=2, dt=1e-3, t_max=0.0)
    rec = simulate_kbm(default_initial(2, NoiseStream(5)), cfg,
                       NoiseStream(5))
    assert rec.times.shape == (1,)
    assert np.allclose(rec.frames["h"][0], np.diag([0.0, 1.0]))


def test_same_seed_bit_identical():
    cfg = SimConfig(d=3, dt=1e-3, t_max=0.02, record_stride=1)
    a = simulate_kbm_ensemble(cfg, 4, master_seed=12)
    b = simulate_kbm_ensemble(cfg, 4, master_seed=12)
    assert np.array_equal(a.frames["h"], b.frames["h"])
    assert np.array_equal(a.frames["hdot"], b.frames["hdot"])


def test_single_path_matches_ensemble_row():
    cfg = SimConfig(d=2, dt=1e-3, t_max=0.02, record_stride=1)
    ens = simulate_kbm_ensemble(cfg, 3, master_seed=13)
    one = simulate_kbm(
        KineticState(h=ens.frames["h"][0, 1].copy(),
                     hdot=ens.frames["hdot"][0, 1].copy()),
        cfg, NoiseStream(13, path_index=1))
    assert np.array_equal(one.frames["h"], ens.frames["h"][:, 1])


def test_ito_drift_magnitude():
    """Short-time drift regression: E[<Hdot_dt - Hdot_0, Hdot_0>]/dt must
    approach -(d^2-1)/2 (the radial rate) within MC error."""
    d, dt, n = 3, 1e-4, 100_000
    state = default_initial_batch(d, 77, 0, n)
    cfg = SimConfig(d=d, dt=dt, t_max=dt)
    dw = batch_hermitian_increments(77, 0, 0, n, d, dt)
    new = kbm_step(state, dw, cfg)
    inc = hm.hs_inner(new.hdot - state.hdot, state.hdot)
    slope = inc.mean() / dt
    se = inc.std(ddof=1) / (np.sqrt(n) * dt)
    assert abs(slope + radial_drift_rate(d)) <= 3.0 * se + 0.05


def test_velocity_autocorrelation():
    """E<Hdot_0, Hdot_t> decays as exp(-(d^2-1) t / 2): the degree-one
    spherical-harmonic rate on the d^2-sphere, d=2, 1e4 paths."""
    d, dt, n = 2, 1e-3, 10_000
    cfg = SimConfig(d=d, dt=dt, t_max=1.0, record_stride=100)
    rec = simulate_kbm_ensemble(cfg, n, master_seed=21)
    rate = radial_drift_rate(d)
    hdot0 = rec.frames["hdot"][0]
    for it, t in enumerate(rec.times):
        if t == 0.0:
            continue
        corr = hm.hs_inner(hdot0, rec.frames["hdot"][it])
        expect = np.exp(-rate * t)
        se = corr.std(ddof=1) / np.sqrt(n)
        assert abs(corr.mean() - expect) <= 3.0 * se + 5e-3 * expect + 2e-3


def test_position_derivative_ratio():
    """||H_{t+dt} - H_t|| / dt approaches ||Hdot|| = 1 as dt shrinks."""
    for dt, tol in ((1e-2, 2e-2), (1e-3, 2e-3), (1e-4, 2e-4)):
        cfg = SimConfig(d=2, dt=dt, t_max=10 * dt, record_stride=1)
        rec = simulate_kbm_ensemble(cfg, 4, master_seed=22)
        steps = np.diff(rec.frames["h"], axis=0)
        ratio = hm.hs_norm(steps) / dt
        assert np.max(np.abs(ratio - 1.0)) <= tol


def test_scheme_agreement_shrinks_with_dt():
    """Ito-project and Stratonovich-Heun paths driven by the same noise
    agree, with sup distance shrinking as dt does."""
    seps = []
    for dt in (2e-3, 5e-4):
        sup = 0.0
        n_steps = int(round(0.25 / dt))
        cfg_i = SimConfig(d=2, dt=dt, t_max=0.25)
        cfg_s = SimConfig(d=2, dt=dt, t_max=0.25, scheme="stratonovich_heun")
        state_i = default_initial_batch(2, 31, 0, 8)
        state_s = KineticState(h=state_i.h.copy(), hdot=state_i.hdot.copy())
        for k in range(n_steps):
            dw = batch_hermitian_increments(31, k, 0, 8, 2, dt)
            state_i = kbm_step(state_i, dw, cfg_i)
            state_s = kbm_step(state_s, dw, cfg_s)
            sup = max(sup, float(np.max(hm.hs_norm(state_i.hdot
                                                   - state_s.hdot))))
        seps.append(sup)
    assert seps[1] < seps[0]
    assert seps[1] <= 0.1


def test_nonfinite_state_raises():
    cfg = SimConfig(d=2, dt=1e-3, t_max=1.0)
    state = default_initial(2, NoiseStream(1))
    bad = np.full((2, 2), np.nan, dtype=complex)
    with np.errstate(invalid="ignore"):
        with pytest.raises(Exception):
            kbm_step(KineticState(h=bad, hdot=state.hdot), bad, cfg)
