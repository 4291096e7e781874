"""Large scales: the eigenvalue process becomes Dyson Brownian motion.

Rescaling Lam^L_t = (1/L) Lam_{L^2 t} and letting L grow, the kinetic
eigenvalues forget their C^1 microstructure and converge in law to the
eigenvalues of a Hermitian Brownian motion (Dyson), run at the effective
per-component diffusivity sigma^2 = 4/(d^2 (d^2 - 1)) fixed by the
Green-Kubo integral of the velocity autocorrelation.

This demo uses moderate scales for speed; the full L = 30 comparison runs
in the acceptance suite (kineticdyson --command validate).

Run:  python demos/07_homogenization.py [--plot]
"""

import sys

import numpy as np

from kineticdyson.homogenize import (
    compare_to_dyson,
    dyson_reference,
    greenkubo_sigma_sq,
    homogenize_ensemble,
    rescale,
    sigma_sq_closed_form,
)

d = 2
sigma_sq = greenkubo_sigma_sq(d)
print(f"Green-Kubo sigma^2 at d={d}: {sigma_sq:.6f} "
      f"(closed form {sigma_sq_closed_form(d):.6f})")

taus = (0.25, 0.5, 1.0)
n_paths = 1000
ref = dyson_reference(d, taus, master_seed=12, n_paths=n_paths)
print(f"\nKS distance to the scaled Dyson reference ({n_paths} paths):")
reports = {}
for L in (3.0, 10.0):
    rec = homogenize_ensemble(d, L, n_paths, master_seed=13, taus=taus)
    rp = rescale(rec, L, times=taus)
    rep = compare_to_dyson(rp, ref, sigma_sq, times=taus)
    reports[L] = (rp, rep)
    worst = max(r["statistic"] for r in rep.rows)
    print(f"  L={L:4.0f}: worst statistic {worst:.4f} over "
          f"{len(rep.rows)} marginals"
          f" (critical {rep.rows[0]['critical']:.4f}),"
          f" all pass: {rep.all_pass}")
print("distance shrinks as L grows: the eigenvalue process homogenizes "
      "to Dyson Brownian motion.")

if "--plot" in sys.argv:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rp, _ = reports[10.0]
    fig, ax = plt.subplots(figsize=(6, 4))
    gap_kin = rp.lambda_paths[-1][:, 1] - rp.lambda_paths[-1][:, 0]
    gap_ref = np.sqrt(sigma_sq) * (ref.eig_paths[-1][:, 1]
                                   - ref.eig_paths[-1][:, 0])
    bins = np.linspace(0, max(gap_kin.max(), gap_ref.max()), 40)
    ax.hist(gap_kin, bins=bins, alpha=0.5, density=True,
            label="rescaled kinetic gap (L=10)")
    ax.hist(gap_ref, bins=bins, alpha=0.5, density=True,
            label="scaled Dyson gap")
    ax.set_xlabel("lam_max - lam_min at t = 1")
    ax.legend()
    fig.tight_layout()
    fig.savefig("demo07_gap_distribution.png", dpi=120)
    print("\nwrote demo07_gap_distribution.png")
