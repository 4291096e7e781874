"""Kinetic Brownian motion on the Hermitian space: the basic object.

The velocity Hdot lives on the unit Hilbert-Schmidt sphere and the position
H integrates it, so paths are C^1 with unit speed.  Two facts are easy to
see numerically: the exact sphere constraint, and the exponential decay of
the velocity autocorrelation E<Hdot_0, Hdot_t> = exp(-(d^2-1) t / 2), the
rate that later fixes the effective large-scale diffusivity.

Run:  python demos/01_kinetic_paths.py [--plot]
"""

import sys

import numpy as np

from kineticdyson import hermitian as hm
from kineticdyson.kinetic import SimConfig, radial_drift_rate, \
    simulate_kbm_ensemble

d = 2
cfg = SimConfig(d=d, dt=1e-3, t_max=2.0, record_stride=20)
n_paths = 4000
rec = simulate_kbm_ensemble(cfg, n_paths, master_seed=1)

print(f"kinetic ensemble: d={d}, {n_paths} paths, horizon {cfg.t_max}")
dev = float(np.max(np.abs(hm.hs_norm(rec.frames['hdot']) - 1.0)))
print(f"max |  ||Hdot|| - 1 |  over all frames: {dev:.2e}")

disp = hm.hs_norm(rec.frames["h"][-1] - rec.frames["h"][0])
print(f"unit speed: max ||H_T - H_0|| / T = "
      f"{float(disp.max()) / cfg.t_max:.4f}  (must be <= 1)")

print("\nvelocity autocorrelation vs exp(-(d^2-1) t / 2):")
rate = radial_drift_rate(d)
hdot0 = rec.frames["hdot"][0]
rows = []
for it, t in enumerate(rec.times):
    if it % 25 != 0 or t == 0.0:
        continue
    mean = float(hm.hs_inner(hdot0, rec.frames["hdot"][it]).mean())
    rows.append((t, mean, np.exp(-rate * t)))
    print(f"  t={t:5.2f}   measured {mean:+.4f}   predicted "
          f"{np.exp(-rate * t):+.4f}")

if "--plot" in sys.argv:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ts = np.array([r[0] for r in rows])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, [r[1] for r in rows], "o", label="measured")
    ax.plot(ts, np.exp(-rate * ts), "-", label="exp(-(d^2-1)t/2)")
    ax.set_xlabel("t")
    ax.set_ylabel("velocity autocorrelation")
    ax.legend()
    fig.tight_layout()
    fig.savefig("demo01_autocorrelation.png", dpi=120)
    print("\nwrote demo01_autocorrelation.png")
