"""Transporting the diagonalizing frame along a kinetic path.

The unitary frame U solves dU = U udot dt with
udot_ij = -A_ij/(Lam_i - Lam_j); this is the unique generator that keeps
U* H U diagonal.  Because the constraint is never re-enforced, the
off-diagonal residual of U* H U is an honest readout of the integrator
error; the diagonal, sorted, must match an independent eigensolver.

Run:  python demos/02_spectral_flow.py [--plot]
"""

import sys

import numpy as np

from kineticdyson import hermitian as hm
from kineticdyson.kinetic import SimConfig
from kineticdyson.spectral import simulate_spectral_ensemble

cfg = SimConfig(d=3, dt=1e-4, t_max=1.0, record_stride=100)
rec = simulate_spectral_ensemble(cfg, 8, master_seed=2, record_h=True)

print(f"frame transport: d=3, dt={cfg.dt:g}, horizon {cfg.t_max}, 8 paths")
print(f"sup_t ||offdiag(U* H U)||_F over all paths/steps: "
      f"{float(rec.stats['resid_sup'].max()):.2e}")
print(f"sup unitarity defect of U: "
      f"{float(rec.stats['unitarity_sup'].max()):.2e}")

vals, _ = hm.jacobi_eigh(rec.frames["h"].reshape(-1, 3, 3))
lam = np.sort(rec.frames["lam"].reshape(-1, 3), axis=-1)
print(f"max |sorted diag(U*HU) - Jacobi eigenvalues|: "
      f"{float(np.max(np.abs(lam - vals))):.2e}")
print(f"minimum eigenvalue gap encountered: "
      f"{float(rec.stats['min_gap'].min()):.3f} "
      f"(floor {rec.stats['gap_floor']:.1e}, "
      f"{rec.event_count('gap_floor_stop')} stops)")

if "--plot" in sys.argv:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for i in range(3):
        axes[0].plot(rec.times, rec.frames["lam"][:, 0, i])
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("eigenvalues (one path)")
    axes[1].semilogy(rec.times[1:], rec.frames["resid"][1:, :].max(axis=1))
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("diagonality residual (max over paths)")
    fig.tight_layout()
    fig.savefig("demo02_spectral_flow.png", dpi=120)
    print("\nwrote demo02_spectral_flow.png")
