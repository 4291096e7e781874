"""Acceptance suite: one check per release criterion, fixed seeds and
tolerances.

Each ``check_*`` function runs a pinned desk-scale experiment and returns a
:class:`CheckResult`; :func:`run_all` executes them in order and prints one
PASS/FAIL line per criterion.  The checks are deterministic (all randomness
flows through the counter-based streams with the seeds pinned here), so a
failure is reproducible bit for bit.

The criteria, in brief:

 1. frame transport keeps U* H U diagonal (residual <= 1e-4) and its
    diagonal matches the independent Jacobi eigensolver to 1e-6;
 2. the eigenvalue-velocity simulator driven by conjugated noise couples
    pathwise to the frame transport at strong order ~1 in dt;
 3. realized quadratic (co)variations of the d = 2 martingales match the
    closed-form brackets within 5 percent;
 4. d = 2 control: the drift field factors through (Lam, diag A) to 1e-12
    and the A/B experiment shows no drift difference;
 5. d = 3: the A/B experiment separates the two off-diagonal arrangements
    by the predicted drift difference (phi gap), many standard errors from
    zero;
 6. the closed-form second derivative of the drift field along the
    sphere-preserving perturbation matches central finite differences;
 7. the skew-product r^2 drift (k - n r^2) and squared diffusion
    4 (1 - r^2) r^2 hold at pinned radii, and skew-product marginals match
    direct projection by KS;
 8. the Green-Kubo quadrature equals 4/(d^2 (d^2 - 1)) and the measured
    effective diffusivity matches within 10 percent for d = 2, 3;
 9. the L = 30 rescaled eigenvalue marginals and gap pass KS against the
    scaled Dyson reference; the L = 1 control fails the gap test;
10. no-collision monitor: at most 1 gap-floor stop per 1000 paths;
11. byte-identical CSV output regardless of thread count.
"""

from __future__ import annotations

import filecmp
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hermitian import hs_norm, jacobi_eigh, min_gap, symmetrize
from .homogenize import (
    compare_to_dyson,
    dyson_reference,
    effective_diffusivity,
    greenkubo_sigma_sq,
    homogenize_ensemble,
    rescale,
    sigma_sq_closed_form,
)
from .kinetic import SimConfig, simulate_kbm_ensemble
from .lambda_a import (
    LambdaAState,
    d2_initial_batch,
    simulate_d2_ensemble,
    simulate_lambda_a_ensemble,
)
from .noise import batch_hermitian_increments, batch_normals
from .spectral import (
    perturbed_a,
    phi,
    phi_d2,
    phi_perturbation_second_derivative,
    simulate_spectral_ensemble,
)
from .sphere import SkewProductState, simulate_skew_ensemble, \
    simulate_sphere_ensemble, skew_product_step, project
from .stats import drift_regression, ks_two_sample, min_gap_report, \
    nonmarkov_ab_test

__all__ = ["CheckResult", "run_all", "ALL_CHECKS"]


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    seconds: float
    detail: str


def _result(criterion, name, passed, t0, detail):
    return CheckResult(criterion=criterion, name=name, passed=bool(passed),
                       seconds=time.time() - t0, detail=detail)


def check_01_diagonalization_fidelity():
    """d=3, dt=1e-4, horizon 1, 100 paths: sup off-diagonal residual of
    U* H U at most 1e-4 and sorted diagonal within 1e-6 of the Jacobi
    eigensolver at every recorded frame."""
    t0 = time.time()
    cfg = SimConfig(d=3, dt=1e-4, t_max=1.0, record_stride=10)
    rec = simulate_spectral_ensemble(cfg, 100, master_seed=101,
                                     record_h=True)
    resid_sup = float(np.max(rec.stats["resid_sup"]))
    h = rec.frames["h"].reshape(-1, 3, 3)
    oracle, _ = jacobi_eigh(h)
    lam_sorted = np.sort(rec.frames["lam"].reshape(-1, 3), axis=-1)
    eig_err = float(np.max(np.abs(lam_sorted - oracle)))
    passed = resid_sup <= 1e-4 and eig_err <= 1e-6
    return _result(1, "diagonalization_fidelity", passed, t0,
                   f"sup residual {resid_sup:.3e} (<=1e-4), "
                   f"oracle error {eig_err:.3e} (<=1e-6), "
                   f"stops {len(rec.events)}")


def check_02_pathwise_coupling():
    """(Lam, A) driven by conjugated frame-transport noise reproduces the
    frame transport's path; the sup error on [0, 1] halves when dt halves
    (least squares slope 1 +/- 0.2 over dt in {2e-4, 1e-4, 5e-5}).

    All three step sizes integrate the same Brownian paths: increments are
    drawn once at the finest dt and summed in blocks for the coarser runs,
    the standard strong-order construction."""
    t0 = time.time()
    n_paths, d = 8, 3
    dt_fine = 5e-5
    n_fine = int(round(1.0 / dt_fine))
    dw_fine = np.stack([
        batch_hermitian_increments(202, k, 0, n_paths, d, dt_fine)
        for k in range(n_fine)
    ])
    errs = []
    dts = (2e-4, 1e-4, 5e-5)
    for dt in dts:
        m = int(round(dt / dt_fine))
        dw = dw_fine.reshape(n_fine // m, m, n_paths, d, d).sum(axis=1)
        stride = int(round(0.01 / dt))
        cfg = SimConfig(d=d, dt=dt, t_max=1.0, record_stride=stride)
        rec = simulate_spectral_ensemble(cfg, n_paths, master_seed=202,
                                         collect_db=True, dw_path=dw)
        init = LambdaAState(lam=rec.frames["lam"][0].copy(),
                            a=rec.frames["a"][0].copy())
        steps = [int(round(t / dt)) for t in rec.times]
        rec2 = simulate_lambda_a_ensemble(init, dt, cfg.n_steps,
                                          master_seed=202,
                                          db_path=rec.stats["db"],
                                          record_steps=steps)
        per_path = np.maximum(
            np.max(np.abs(rec.frames["lam"] - rec2.frames["lam"]),
                   axis=(0, 2)),
            np.max(np.abs(rec.frames["a"] - rec2.frames["a"]),
                   axis=(0, 2, 3)),
        )
        errs.append(float(per_path.mean()))
    x = np.log(np.asarray(dts))
    y = np.log(np.asarray(errs))
    slope = float(np.polyfit(x, y, 1)[0])
    passed = 0.8 <= slope <= 1.2
    pretty = ", ".join(f"{e:.2e}" for e in errs)
    return _result(2, "pathwise_coupling", passed, t0,
                   f"mean sup errors [{pretty}] at dt {dts}, slope "
                   f"{slope:.3f} (need 1 +/- 0.2)")


def check_03_d2_brackets():
    """Realized QV/covariation of the d=2 martingales over 1e4 paths on
    horizon 0.1 match the integrated brackets within 5 percent.  Pinned
    start (lamdot, mudot) = (0.6, -0.5) keeps all three targets away from
    zero so the relative comparison is well conditioned."""
    t0 = time.time()
    init = d2_initial_batch(303, 0, 10_000, lamdot0=0.6, mudot0=-0.5)
    rec = simulate_d2_ensemble(init, 1e-4, 1000, master_seed=303,
                               record_steps=[0, 1000])
    rels = {}
    for key in ("ll", "mm", "lm"):
        qv = float(rec.stats[f"qv_{key}"].mean())
        ib = float(rec.stats[f"ib_{key}"].mean())
        rels[key] = abs(qv - ib) / abs(ib)
    passed = all(r <= 0.05 for r in rels.values())
    detail = ", ".join(f"{k}: {v:.4f}" for k, v in rels.items())
    return _result(3, "d2_brackets", passed, t0,
                   f"relative QV gaps {detail} (each <= 0.05)")


def check_04_d2_markov_control():
    """d=2 control: phi equals its (Lam, diag A) form on 1000 random
    states within 1e-12, and the equal-diagonal A/B experiment measures a
    drift difference within 3 SE of zero."""
    t0 = time.time()
    z = batch_normals(404, 1, 0, 0, 1000, 6)
    lam = np.stack([z[:, 0], z[:, 0] - 1.0 - np.abs(z[:, 1])], axis=-1)
    a = np.zeros((1000, 2, 2), dtype=np.complex128)
    a[:, 0, 0] = z[:, 2]
    a[:, 1, 1] = z[:, 3]
    a[:, 0, 1] = z[:, 4] + 1j * z[:, 5]
    a[:, 1, 0] = np.conj(a[:, 0, 1])
    a /= hs_norm(a)[:, None, None]
    idx = np.arange(2)
    factor_err = float(np.max(np.abs(
        phi(lam, a) - phi_d2(lam, a[:, idx, idx].real))))
    report = nonmarkov_ab_test(np.array([1.0, 0.0]), horizon=0.01,
                               n_paths=20_000, dt=1e-4, master_seed=404)
    control_se = float(np.max(report.significance_in_se))
    passed = factor_err <= 1e-12 and control_se <= 3.0
    return _result(4, "d2_markov_control", passed, t0,
                   f"phi factorization error {factor_err:.2e} (<=1e-12), "
                   f"control |diff|/SE max {control_se:.2f} (<=3)")


def check_05_d3_nonmarkov():
    """d=3 A/B experiment at Lam = diag(3,2,1), 1e5 paths per arm: the
    velocity drift difference matches the phi prediction (entry 1: +2,
    entry 2: -4, entry 3: +2) within 3 SE and every nonzero entry sits
    at least 5 SE from zero."""
    t0 = time.time()
    report = nonmarkov_ab_test(np.array([3.0, 2.0, 1.0]), horizon=0.01,
                               n_paths=100_000, dt=1e-4, master_seed=505)
    passed = report.matches_prediction(3.0) and report.separates_from_zero(5.0)
    meas = ", ".join(f"{m:.3f}" for m in report.measured)
    pred = ", ".join(f"{p:g}" for p in report.predicted)
    dev = float(np.max(report.deviation_in_se))
    sig = float(np.min(report.significance_in_se[
        np.abs(report.predicted) > 0]))
    return _result(5, "d3_nonmarkov", passed, t0,
                   f"measured [{meas}] vs predicted [{pred}]; "
                   f"max deviation {dev:.2f} SE (<=3), "
                   f"min significance {sig:.1f} SE (>=5)")


def check_06_perturbation_identity():
    """Closed-form second derivative of phi along the sphere-preserving
    perturbation matches central finite differences (step 1e-4) within
    1e-6 relative at eps in {0, 0.3}, over 100 random tuples conditioned
    so the finite-difference oracle is itself accurate at that tolerance
    (unit-scale target; see the module tests for generic draws)."""
    t0 = time.time()
    rng = np.random.default_rng(606)
    h = 1e-4
    worst = 0.0
    count = 0
    while count < 100:
        lam = np.sort(rng.uniform(0.0, 3.0, size=3))[::-1]
        if float(min_gap(lam)) < 0.4:
            continue
        z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        a = symmetrize(z)
        a /= hs_norm(a)
        i, j, k = rng.permutation(3)
        if abs(a[i, j]) < 0.35:
            continue
        ok_both = True
        for eps in (0.0, 0.3):
            closed = phi_perturbation_second_derivative(lam, a, i, j, k, eps)
            if abs(closed) < 0.1:
                ok_both = False
                break
            fd = (phi(lam, perturbed_a(a, i, j, k, eps + h))[i]
                  - 2.0 * phi(lam, perturbed_a(a, i, j, k, eps))[i]
                  + phi(lam, perturbed_a(a, i, j, k, eps - h))[i]) / h ** 2
            worst = max(worst, abs(fd - closed) / abs(closed))
        if not ok_both:
            continue
        count += 1
    passed = worst <= 1e-6
    return _result(6, "perturbation_identity", passed, t0,
                   f"worst relative FD mismatch {worst:.2e} over 100 "
                   f"tuples (<=1e-6)")


def check_07_spherical_laws():
    """n=9, k=3: empirical drift and squared diffusion of r^2 at pinned
    r^2 in {0.25, 0.5, 0.75} within 5 percent of (k - n r^2) and
    4 (1 - r^2) r^2; skew-product and direct-projection marginals of
    (r^2, theta_1) pass KS at 0.01 with 1e4 paths per side."""
    t0 = time.time()
    n, k = 9, 3
    dt = 2e-3
    details = []
    law_ok = True
    for m, r2p in enumerate((0.25, 0.5, 0.75)):
        big = 4_000_000
        z = batch_normals(707 + m, 0, 0, 0, big, n + 1)
        theta0 = np.zeros((big, k))
        theta0[:, 0] = 1.0
        phi0 = np.zeros((big, n - k))
        phi0[:, 0] = 1.0
        st = SkewProductState(r_sq=np.full(big, r2p), theta=theta0, phi=phi0)
        new, _ = skew_product_step(st, z, dt, k, n)
        inc = new.r_sq - st.r_sq
        slope, _ = drift_regression(inc, dt)
        var = float(inc.var(ddof=1) / dt)
        pred_drift = k - n * r2p
        pred_var = 4.0 * (1.0 - r2p) * r2p
        rel_d = abs(slope - pred_drift) / abs(pred_drift)
        rel_v = abs(var - pred_var) / pred_var
        law_ok = law_ok and rel_d <= 0.05 and rel_v <= 0.05
        details.append(f"r2={r2p}: drift rel {rel_d:.3f}, var rel "
                       f"{rel_v:.3f}")
    n_paths, n_steps, dt_ks = 10_000, 1000, 1e-3
    r20 = 0.5
    x0 = np.zeros((n_paths, n))
    x0[:, 0] = np.sqrt(r20)
    x0[:, k] = np.sqrt(1.0 - r20)
    rec_x = simulate_sphere_ensemble(x0, dt_ks, n_steps, master_seed=718,
                                     record_steps=[500, 1000])
    theta0 = np.zeros((n_paths, k))
    theta0[:, 0] = 1.0
    phi0 = np.zeros((n_paths, n - k))
    phi0[:, 0] = 1.0
    rec_s = simulate_skew_ensemble(np.full(n_paths, r20), theta0, phi0,
                                   dt_ks, n_steps, master_seed=719,
                                   k=k, n=n, path_start=n_paths,
                                   record_steps=[500, 1000])
    ks_ok = True
    for i, t in enumerate((0.5, 1.0)):
        r2x, thx, _ = project(rec_x.frames["x"][i], k)
        s1, ok1 = ks_two_sample(r2x, rec_s.frames["r_sq"][i])
        s2, ok2 = ks_two_sample(thx[:, 0], rec_s.frames["theta"][i][:, 0])
        ks_ok = ks_ok and ok1 and ok2
        details.append(f"KS t={t}: r2 {s1:.4f}, theta {s2:.4f}")
    passed = law_ok and ks_ok
    return _result(7, "spherical_projection_laws", passed, t0,
                   "; ".join(details))


def check_08_effective_diffusivity():
    """Green-Kubo quadrature equals 4/(d^2 (d^2-1)) analytically, and the
    measured displacement variance per component over T=50 with 1e3 paths
    is within 10 percent of 1/3 (d=2) and 1/18 (d=3)."""
    t0 = time.time()
    quad_ok = all(abs(greenkubo_sigma_sq(d) - sigma_sq_closed_form(d))
                  <= 1e-9 for d in (2, 3))
    details = [f"quadrature matches closed form: {quad_ok}"]
    mc_ok = True
    for d, dt, seed in ((2, 5e-3, 808), (3, 2e-3, 809)):
        cfg = SimConfig(d=d, dt=dt, t_max=50.0)
        rec = simulate_kbm_ensemble(cfg, 1000, master_seed=seed,
                                    record_steps=[0, cfg.n_steps],
                                    record_hdot=False)
        est, se = effective_diffusivity(rec.frames["h"][0],
                                        rec.frames["h"][1], 50.0)
        target = sigma_sq_closed_form(d)
        rel = abs(est - target) / target
        mc_ok = mc_ok and rel <= 0.10
        details.append(f"d={d}: sigma^2 {est:.5f} vs {target:.5f} "
                       f"(rel {rel:.3f}, se {se:.5f})")
    passed = quad_ok and mc_ok
    return _result(8, "effective_diffusivity", passed, t0,
                   "; ".join(details))


def check_09_homogenization():
    """d=2, L=30, 2e3 paths: sorted-eigenvalue marginals and the gap pass
    KS at 0.01 against the Green-Kubo-scaled Dyson reference at
    t in {0.25, 0.5, 1}; the L=1 control fails the gap test."""
    t0 = time.time()
    d, taus = 2, (0.25, 0.5, 1.0)
    sigma_sq = greenkubo_sigma_sq(d)
    rec = homogenize_ensemble(d, 30.0, 2000, master_seed=909, taus=taus)
    rp = rescale(rec, 30.0, times=taus)
    ref = dyson_reference(d, taus, master_seed=910, n_paths=2000)
    rep = compare_to_dyson(rp, ref, sigma_sq, times=taus)
    worst = max(r["statistic"] for r in rep.rows)
    rec1 = homogenize_ensemble(d, 1.0, 2000, master_seed=911, taus=taus)
    rp1 = rescale(rec1, 1.0, times=taus)
    rep1 = compare_to_dyson(rp1, ref, sigma_sq, times=taus)
    control_fails = not rep1.passed("gap")
    passed = rep.all_pass and control_fails
    return _result(9, "homogenization", passed, t0,
                   f"L=30: all {len(rep.rows)} KS rows pass={rep.all_pass} "
                   f"(worst stat {worst:.4f}, crit "
                   f"{rep.rows[0]['critical']:.4f}); L=1 gap test fails="
                   f"{control_fails}")


def check_10_no_collision_monitor():
    """d=3, 1e3 paths, horizon 1, unit initial gap: at most one gap-floor
    stop per thousand paths after step refinement."""
    t0 = time.time()
    cfg = SimConfig(d=3, dt=1e-4, t_max=1.0, record_stride=100)
    rec = simulate_spectral_ensemble(cfg, 1000, master_seed=1010)
    report = min_gap_report(rec)
    passed = report["n_stops"] <= 1
    return _result(10, "no_collision_monitor", passed, t0,
                   f"{report['n_stops']} gap-floor stops in 1000 paths "
                   f"(<=1), min gap seen {report['min_gap']:.3e}, floor "
                   f"{report['gap_floor']:.1e}")


def check_11_determinism():
    """The same experiment re-run with different thread counts produces
    byte-identical paths.csv and summary.csv."""
    from . import cli  # local import: cli imports this module

    t0 = time.time()
    same = True
    details = []
    with tempfile.TemporaryDirectory() as tmp:
        for command, extra in (("simulate", ["--d", "2"]),
                               ("spectral", ["--d", "3"])):
            dirs = []
            for threads in (1, 4):
                out = Path(tmp) / f"{command}_t{threads}"
                argv = ["--command", command, "--dt", "1e-3",
                        "--t-max", "0.05", "--paths", "8", "--seed", "11",
                        "--threads", str(threads), "--out", str(out)]
                code = cli.main(argv + extra)
                if code != 0:
                    same = False
                dirs.append(out)
            for name in ("paths.csv", "summary.csv"):
                equal = filecmp.cmp(dirs[0] / name, dirs[1] / name,
                                    shallow=False)
                same = same and equal
                details.append(f"{command}/{name}: "
                               f"{'identical' if equal else 'DIFFER'}")
    return _result(11, "determinism", same, t0, "; ".join(details))


ALL_CHECKS = (
    check_01_diagonalization_fidelity,
    check_02_pathwise_coupling,
    check_03_d2_brackets,
    check_04_d2_markov_control,
    check_05_d3_nonmarkov,
    check_06_perturbation_identity,
    check_07_spherical_laws,
    check_08_effective_diffusivity,
    check_09_homogenization,
    check_10_no_collision_monitor,
    check_11_determinism,
)


def run_all(criteria=None, verbose=False):
    """Run the acceptance checks (all by default) in criterion order.

    Returns the list of CheckResults; with ``verbose`` prints one PASS/FAIL
    line per criterion as it completes.
    """
    results = []
    for fn in ALL_CHECKS:
        number = int(fn.__name__.split("_")[1])
        if criteria is not None and number not in criteria:
            continue
        res = fn()
        results.append(res)
        if verbose:
            status = "PASS" if res.passed else "FAIL"
            print(f"[{status}] criterion {res.criterion:2d} "
                  f"{res.name} ({res.seconds:.1f}s): {res.detail}")
    return results
