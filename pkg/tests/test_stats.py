"""Estimator self-calibration and the A/B experiment machinery."""

import numpy as np
import pytest
from scipy import stats as sps

from kineticdyson.hermitian import hs_norm
from kineticdyson.kinetic import SimConfig
from kineticdyson.spectral import phi, simulate_spectral_ensemble
from kineticdyson.stats import (
    ab_initial_pair,
    drift_regression,
    ks_critical_value,
    ks_statistic,
    ks_two_sample,
    min_gap_report,
    nonmarkov_ab_test,
    offdiag_pair_matrix,
    realized_qv,
)

RNG = np.random.default_rng(99)


def test_drift_regression_exact():
    dt = 1e-3
    inc = np.full(2000, 2.5 * dt)
    slope, se = drift_regression(inc, dt)
    assert slope == pytest.approx(2.5)
    assert se == pytest.approx(0.0)


def test_drift_regression_noisy():
    dt = 1e-3
    n = 50_000
    inc = 2.5 * dt + RNG.normal(0.0, np.sqrt(dt), size=n)
    slope, se = drift_regression(inc, dt)
    assert abs(slope - 2.5) <= 3 * se


def test_drift_regression_empty():
    with pytest.raises(ValueError):
        drift_regression(np.array([]), 1e-3)


def test_realized_qv_deterministic_path():
    assert realized_qv(np.zeros(100)) == pytest.approx(0.0)


def test_realized_qv_of_brownian_motion():
    dm = RNG.normal(0.0, np.sqrt(1e-3), size=(1000, 200))
    qv = realized_qv(dm)
    assert abs(qv.mean() - 1.0) <= 0.1
    # covariation of independent BMs is near zero
    dn = RNG.normal(0.0, np.sqrt(1e-3), size=(1000, 200))
    cov = realized_qv(dm, dn)
    assert abs(cov.mean()) <= 0.05


def test_ks_identical_samples():
    x = RNG.normal(size=500)
    stat, ok = ks_two_sample(x, x)
    assert stat == pytest.approx(0.0)
    assert ok


def test_ks_separated_gaussians_fail():
    a = RNG.normal(0.0, 1.0, size=1000)
    b = RNG.normal(3.0, 1.0, size=1000)
    stat, ok = ks_two_sample(a, b)
    assert not ok
    assert stat > 0.5


def test_ks_split_halves_pass_rate():
    """Split halves of one ensemble pass at roughly the nominal rate."""
    passes = 0
    for rep in range(200):
        x = RNG.normal(size=1000)
        _, ok = ks_two_sample(x[:500], x[500:])
        passes += bool(ok)
    assert passes >= 190  # nominal 99 percent at alpha = 0.01


def test_ks_statistic_matches_scipy():
    for _ in range(10):
        a = RNG.normal(size=RNG.integers(200, 500))
        b = RNG.normal(0.2, 1.1, size=RNG.integers(200, 500))
        mine = ks_statistic(a, b)
        ref = sps.ks_2samp(a, b, method="asymp").statistic
        assert mine == pytest.approx(ref, abs=1e-12)


def test_ks_critical_value_magnitude():
    # c(0.01) = 1.6276 for equal samples of 2000
    crit = ks_critical_value(2000, 2000, alpha=0.01)
    assert crit == pytest.approx(1.6276 * np.sqrt(2 / 2000), rel=1e-3)


def test_ab_initial_pair_properties():
    a, at = ab_initial_pair(3)
    assert np.allclose(np.diag(a), np.diag(at))
    assert hs_norm(a) == pytest.approx(np.sqrt(2.0))
    assert hs_norm(at) == pytest.approx(np.sqrt(2.0))
    lam = np.array([3.0, 2.0, 1.0])
    assert not np.allclose(phi(lam, a), phi(lam, at))
    a2, at2 = ab_initial_pair(2)
    assert np.allclose(phi(np.array([1.0, 0.0]), a2),
                       phi(np.array([1.0, 0.0]), at2))


def test_offdiag_pair_matrix_hermitian():
    m = offdiag_pair_matrix(4, 1, 3, 0.5 + 0.2j)
    assert np.allclose(m, m.conj().T)


def test_nonmarkov_ab_report_shapes():
    report = nonmarkov_ab_test(np.array([3.0, 2.0, 1.0]), horizon=0.01,
                               n_paths=2000, dt=1e-3, master_seed=7)
    assert report.measured.shape == (3,)
    assert np.allclose(report.predicted, [2.0, -4.0, 2.0])
    assert np.all(report.stderr > 0)
    # h-stability fields populated
    assert report.drift_h.shape == (3,)
    assert report.drift_half.shape == (3,)


def test_nonmarkov_ab_test_odd_horizon_rejected():
    with pytest.raises(ValueError):
        nonmarkov_ab_test(np.array([3.0, 2.0, 1.0]), horizon=0.001,
                          n_paths=100, dt=2e-4, master_seed=7)


def test_ab_test_is_deterministic():
    """The report is a pure function of (seed, config): identical reruns."""
    kwargs = dict(horizon=0.01, n_paths=500, dt=1e-3, master_seed=42)
    a = nonmarkov_ab_test(np.array([3.0, 2.0, 1.0]), **kwargs)
    b = nonmarkov_ab_test(np.array([3.0, 2.0, 1.0]), **kwargs)
    assert np.array_equal(a.measured, b.measured)
    assert np.array_equal(a.stderr, b.stderr)


def test_min_gap_report():
    cfg = SimConfig(d=2, dt=1e-3, t_max=0.02, record_stride=1)
    rec = simulate_spectral_ensemble(cfg, 4, master_seed=11)
    report = min_gap_report(rec)
    assert report["n_paths"] == 4
    assert report["n_stops"] == 0
    assert report["min_gap"] > 0
    assert report["gap_floor"] == pytest.approx(1e-3)
