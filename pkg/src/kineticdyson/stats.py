"""Ensemble estimators and the Markovianity A/B experiment.

Plain Monte Carlo machinery: drift regression (sample mean of one-step
increments over dt), realized quadratic (co)variation, a two-sample
Kolmogorov-Smirnov test with the distribution-free asymptotic critical
value, and the short-time drift experiment that exhibits the d >= 3
non-Markovianity of the eigenvalue-velocity pair.

The A/B experiment launches two eigenvalue-velocity ensembles whose initial
data share the same spectrum and the same velocity diagonal (both zero) but
arrange the off-diagonal mass on different index pairs:

    A  : unit entries at (1,2) and (2,1),
    At : unit entries at (2,3) and (3,2),

the d = 3 pair that yields different drift fields phi(Lam, A) at equal
(Lam, diag A).  The measured short-time drift of each velocity entry is
compared against the closed-form prediction phi(Lam0, A) - phi(Lam0, At).
The drift estimator is Richardson-extrapolated between the horizon h and
h/2 (both read from the same paths), which cancels the O(h) bias of the
plain E[lamdot(h)]/h quotient and doubles as the h-stability check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hermitian import hs_norm
from .lambda_a import LambdaAState, simulate_lambda_a_ensemble
from .spectral import phi

__all__ = [
    "drift_regression",
    "realized_qv",
    "ks_statistic",
    "ks_critical_value",
    "ks_two_sample",
    "offdiag_pair_matrix",
    "ab_initial_pair",
    "ABTestReport",
    "nonmarkov_ab_test",
    "min_gap_report",
]


def drift_regression(increments, dt):
    """Estimate a drift as mean(increment)/dt with its standard error.

    ``increments`` are one-step changes of an observable sampled across an
    ensemble (any shape; the first axis is the sample axis).  Returns
    (slope, stderr), arrays when the observable is vector-valued.
    """
    inc = np.asarray(increments, dtype=np.float64)
    if inc.size == 0:
        raise ValueError("drift_regression needs at least one sample")
    n = inc.shape[0]
    slope = inc.mean(axis=0) / dt
    stderr = inc.std(axis=0, ddof=1) / (np.sqrt(n) * dt) if n > 1 \
        else np.zeros_like(slope)
    return slope, stderr


def realized_qv(dm, dn=None):
    """Realized quadratic variation sum(dm^2), or covariation sum(dm dn).

    Increment arrays have the step axis first; per-path results are returned
    for batched input of shape (n_steps, n_paths).
    """
    dm = np.asarray(dm, dtype=np.float64)
    if dn is None:
        return np.sum(dm * dm, axis=0)
    return np.sum(dm * np.asarray(dn, dtype=np.float64), axis=0)


def ks_statistic(a, b):
    """Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_statistic needs nonempty samples")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_critical_value(n_a, n_b, alpha=0.01):
    """Asymptotic two-sample critical value c(alpha) sqrt((n+m)/(n m)).

    c(alpha) = sqrt(-ln(alpha/2)/2); at alpha = 0.01 this is about 1.628.
    """
    c = np.sqrt(-0.5 * np.log(alpha / 2.0))
    return float(c * np.sqrt((n_a + n_b) / (n_a * n_b)))


def ks_two_sample(a, b, alpha=0.01):
    """KS statistic plus a pass flag at the given significance.

    "Pass" means the samples are NOT distinguished at level alpha (the
    statistic stays below the asymptotic critical value).
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    stat = ks_statistic(a, b)
    return stat, stat <= ks_critical_value(a.size, b.size, alpha)


def offdiag_pair_matrix(d, i, j, value=1.0):
    """Hermitian matrix with value at (i, j), conjugate at (j, i), else 0."""
    a = np.zeros((d, d), dtype=np.complex128)
    a[i, j] = value
    a[j, i] = np.conj(value)
    return a


def ab_initial_pair(d):
    """The two velocity matrices of the A/B experiment for dimension d.

    For d >= 3: unit mass on the (1,2) pair versus the (2,3) pair (indices
    1-based), embedded in the top-left block for d > 3.  For d = 2, where
    no such discrimination exists, the pair differs only by the phase of
    the off-diagonal entry; the predicted drift difference is then zero in
    every entry (the negative control).
    """
    if d == 2:
        return (offdiag_pair_matrix(2, 0, 1, 1.0),
                offdiag_pair_matrix(2, 0, 1, 1.0j))
    if d < 2:
        raise ValueError("d must be >= 2")
    return (offdiag_pair_matrix(d, 0, 1), offdiag_pair_matrix(d, 1, 2))


@dataclass
class ABTestReport:
    """Outcome of the short-time drift A/B experiment.

    ``measured``/``stderr`` hold the Richardson-extrapolated drift
    difference per velocity entry; ``drift_h`` and ``drift_half`` keep the
    plain quotients at the two horizons for the h-stability check.
    """

    lam0: np.ndarray
    horizon: float
    n_paths: int
    predicted: np.ndarray
    measured: np.ndarray
    stderr: np.ndarray
    drift_h: np.ndarray
    drift_half: np.ndarray

    @property
    def deviation_in_se(self):
        return np.abs(self.measured - self.predicted) / self.stderr

    @property
    def significance_in_se(self):
        return np.abs(self.measured) / self.stderr

    def matches_prediction(self, n_se=3.0):
        return bool(np.all(self.deviation_in_se <= n_se))

    def separates_from_zero(self, n_se=5.0):
        """True when every entry with a nonzero prediction is at least
        n_se standard errors away from zero."""
        nonzero = np.abs(self.predicted) > 0.0
        return bool(np.all(self.significance_in_se[nonzero] >= n_se))


def _endpoint_velocity_drifts(lam0, a0, horizon, dt, n_paths, master_seed,
                              path_start):
    """Per-entry Richardson drift of the velocity diagonal for one start."""
    n_steps = int(round(horizon / dt))
    half = n_steps // 2
    if 2 * half != n_steps:
        raise ValueError("horizon must be an even number of steps")
    d = lam0.shape[-1]
    init = LambdaAState(
        lam=np.broadcast_to(lam0, (n_paths, d)).copy(),
        a=np.broadcast_to(a0, (n_paths, d, d)).copy(),
        a_norm=float(hs_norm(a0)),
    )
    rec = simulate_lambda_a_ensemble(init, dt, n_steps, master_seed,
                                     path_start=path_start,
                                     record_steps=[0, half, n_steps])
    idx = np.arange(d)
    v_half = rec.frames["a"][1][:, idx, idx].real
    v_full = rec.frames["a"][2][:, idx, idx].real
    rich = (4.0 * v_half - v_full) / horizon
    return {
        "rich_mean": rich.mean(axis=0),
        "rich_se": rich.std(axis=0, ddof=1) / np.sqrt(n_paths),
        "drift_h": v_full.mean(axis=0) / horizon,
        "drift_half": v_half.mean(axis=0) / (0.5 * horizon),
    }


def nonmarkov_ab_test(lam0, horizon, n_paths, dt, master_seed, pair=None):
    """Short-time drift A/B experiment for the eigenvalue-velocity pair.

    Runs two independent ensembles from (lam0, A) and (lam0, At) with
    identical spectra and velocity diagonals, and reports the per-entry
    drift difference of the velocity diagonal against the closed-form
    prediction phi(lam0, A) - phi(lam0, At).

    The initial matrices are used exactly as constructed (Hilbert-Schmidt
    norm sqrt(2) for the unit off-diagonal pairs); each ensemble preserves
    its own initial norm along the path.
    """
    lam0 = np.asarray(lam0, dtype=np.float64)
    d = lam0.shape[-1]
    if pair is None:
        pair = ab_initial_pair(d)
    a_mat, at_mat = pair
    predicted = phi(lam0, a_mat) - phi(lam0, at_mat)

    res_a = _endpoint_velocity_drifts(lam0, a_mat, horizon, dt, n_paths,
                                      master_seed, path_start=0)
    res_b = _endpoint_velocity_drifts(lam0, at_mat, horizon, dt, n_paths,
                                      master_seed, path_start=n_paths)
    measured = res_a["rich_mean"] - res_b["rich_mean"]
    stderr = np.sqrt(res_a["rich_se"] ** 2 + res_b["rich_se"] ** 2)
    return ABTestReport(
        lam0=lam0, horizon=horizon, n_paths=n_paths, predicted=predicted,
        measured=measured, stderr=stderr,
        drift_h=res_a["drift_h"] - res_b["drift_h"],
        drift_half=res_a["drift_half"] - res_b["drift_half"],
    )


def min_gap_report(record):
    """Summarize the no-collision monitor of a spectral record.

    Returns a dict with the number of gap-floor stops, the stop events, the
    smallest per-path minimum gap seen, and the floor in force.
    """
    stops = [e for e in record.events if e[1] == "gap_floor_stop"]
    gaps = record.stats.get("min_gap")
    return {
        "n_paths": record.n_paths,
        "n_stops": len(stops),
        "stop_events": stops,
        "min_gap": float(np.min(gaps)) if gaps is not None else None,
        "gap_floor": record.stats.get("gap_floor"),
    }
