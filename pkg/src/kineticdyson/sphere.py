"""Spherical Brownian motion, coordinate-block projection, and skew product.

A standard Brownian motion X on the unit sphere of R^n solves (Ito form)

    dX_t = dB_t - X_t X_t* dB_t - ((n - 1)/2) X_t dt,

and the squared norm r^2 = |X^[k]|^2 of its first k coordinates, together
with the two angular parts theta = X^[k]/r in R^k and phi in R^{n-k}, forms
the skew-product system

    d(r^2)  = 2 sqrt((1 - r^2) r^2) dB^r + (k - n r^2) dt,
    d theta = (dB^th - theta theta* dB^th)/sqrt(r^2)
              - ((k - 1)/2) theta dt / r^2,
    d phi   = (dB^ph - phi phi* dB^ph)/sqrt(1 - r^2)
              - ((n - k - 1)/2) phi dt / (1 - r^2),

valid while 0 < r^2 < 1, with (B^r, B^th, B^ph) a standard Brownian motion
on R^{n+1}.  For k >= 2 the block X^[k] almost surely never vanishes after
time zero, so boundary contact of r^2 indicates discretization trouble; the
stepper clamps r^2 to [1e-8, 1 - 1e-8] and reports every clamp instead of
hiding it.

The case of interest is n = d^2 with k = d: the diagonal block of the
velocity sphere in the Hermitian space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .noise import TAG_STEP, batch_normals
from .records import PathRecord

__all__ = [
    "SphereState",
    "SkewProductState",
    "sphere_bm_step",
    "skew_product_step",
    "project",
    "simulate_sphere_ensemble",
    "simulate_skew_ensemble",
    "R_SQ_CLAMP",
]

R_SQ_CLAMP = 1e-8


@dataclass
class SphereState:
    """Unit vector in R^n (batched as (..., n)) at time t."""

    x: np.ndarray
    t: float = 0.0

    @property
    def n(self):
        return self.x.shape[-1]


@dataclass
class SkewProductState:
    """Skew-product coordinates (r^2, theta, phi) of a sphere path."""

    r_sq: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    t: float = 0.0


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def sphere_bm_step(state, db, dt):
    """Euler-project step of the sphere Brownian motion.

    ``db`` is an increment of a standard R^n Brownian motion (variance dt
    per component).  The radial Ito drift is cancelled by the explicit
    renormalization, so a zero increment leaves the state unchanged.
    """
    x = state.x
    n = x.shape[-1]
    radial = np.sum(x * db, axis=-1, keepdims=True)
    x_new = x + db - x * radial - 0.5 * (n - 1) * x * dt
    x_new = _unit(x_new)
    if not np.all(np.isfinite(x_new)):
        raise NumericalError("non-finite sphere state")
    return SphereState(x=x_new, t=state.t + dt)


def skew_product_step(state, z, dt, k, n):
    """Euler step of the (r^2, theta, phi) system from standard normals.

    ``z`` has shape (..., n + 1): component 0 drives r^2, the next k drive
    theta, the last n - k drive phi, each scaled to variance dt internally.
    Returns (new_state, clamped) where ``clamped`` flags batch entries whose
    r^2 hit the guard band [1e-8, 1 - 1e-8] this step.
    """
    r_sq = np.asarray(state.r_sq, dtype=np.float64)
    if np.any((r_sq <= 0.0) | (r_sq >= 1.0)):
        raise ValueError("r_sq must lie strictly inside (0, 1)")
    z = np.asarray(z, dtype=np.float64)
    root_dt = np.sqrt(dt)
    db_r = z[..., 0] * root_dt
    db_th = z[..., 1:k + 1] * root_dt
    db_ph = z[..., k + 1:] * root_dt

    r2_new = r_sq + 2.0 * np.sqrt((1.0 - r_sq) * r_sq) * db_r \
        + (k - n * r_sq) * dt
    clamped = (r2_new < R_SQ_CLAMP) | (r2_new > 1.0 - R_SQ_CLAMP)
    r2_new = np.clip(r2_new, R_SQ_CLAMP, 1.0 - R_SQ_CLAMP)

    theta = state.theta
    rad_th = np.sum(theta * db_th, axis=-1, keepdims=True)
    theta_new = theta + (db_th - theta * rad_th) / np.sqrt(r_sq)[..., None] \
        - 0.5 * (k - 1) * theta * dt / r_sq[..., None]
    theta_new = _unit(theta_new)

    phi = state.phi
    rad_ph = np.sum(phi * db_ph, axis=-1, keepdims=True)
    s_sq = 1.0 - r_sq
    phi_new = phi + (db_ph - phi * rad_ph) / np.sqrt(s_sq)[..., None] \
        - 0.5 * (n - k - 1) * phi * dt / s_sq[..., None]
    phi_new = _unit(phi_new)

    new = SkewProductState(r_sq=r2_new, theta=theta_new, phi=phi_new,
                           t=state.t + dt)
    return new, clamped


def project(x, k):
    """Split a sphere point into (r^2, theta) for its first k coordinates.

    theta is flagged degenerate (not an error) when r^2 < 1e-16; the
    returned theta rows are zero there.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    head = x[..., :k]
    r_sq = np.sum(head ** 2, axis=-1)
    degenerate = r_sq < 1e-16
    safe = np.where(degenerate, 1.0, np.sqrt(r_sq))
    theta = head / safe[..., None]
    theta = np.where(degenerate[..., None], 0.0, theta)
    return r_sq, theta, degenerate


def simulate_sphere_ensemble(x0, dt, n_steps, master_seed, path_start=0,
                             record_steps=None):
    """Integrate sphere Brownian paths from the batched start ``x0``.

    Records frames "x" of shape (n_rec, n_paths, n).
    """
    state = SphereState(x=np.array(x0, dtype=np.float64), t=0.0)
    n_paths, n = state.x.shape
    if record_steps is None:
        record_steps = range(n_steps + 1)
    record_set = set(int(s) for s in record_steps)
    times, frames = [], []

    def snapshot(k):
        times.append(k * dt)
        frames.append(state.x.copy())

    if 0 in record_set:
        snapshot(0)
    for k in range(n_steps):
        z = batch_normals(master_seed, TAG_STEP, k, path_start, n_paths, n)
        state = sphere_bm_step(state, z * np.sqrt(dt), dt)
        if (k + 1) in record_set:
            snapshot(k + 1)
    return PathRecord(times=np.asarray(times), frames={"x": np.stack(frames)},
                      events=[], n_paths=n_paths)


def simulate_skew_ensemble(r_sq0, theta0, phi0, dt, n_steps, master_seed,
                           k, n, path_start=0, record_steps=None):
    """Integrate the skew-product system for a batched start.

    Records frames "r_sq" (n_rec, n_paths) and "theta" (n_rec, n_paths, k);
    clamp events are appended per step, and stats carries the per-path
    running minimum of r^2 ("r_sq_min") plus the total clamp count.
    """
    state = SkewProductState(
        r_sq=np.array(r_sq0, dtype=np.float64),
        theta=np.array(theta0, dtype=np.float64),
        phi=np.array(phi0, dtype=np.float64), t=0.0)
    n_paths = state.r_sq.shape[0]
    if record_steps is None:
        record_steps = range(n_steps + 1)
    record_set = set(int(s) for s in record_steps)
    times, r_frames, th_frames = [], [], []
    events = []
    r_min = state.r_sq.copy()
    clamp_total = 0

    def snapshot(kk):
        times.append(kk * dt)
        r_frames.append(state.r_sq.copy())
        th_frames.append(state.theta.copy())

    if 0 in record_set:
        snapshot(0)
    for step in range(n_steps):
        z = batch_normals(master_seed, TAG_STEP, step, path_start, n_paths,
                          n + 1)
        state, clamped = skew_product_step(state, z, dt, k, n)
        if np.any(clamped):
            clamp_total += int(np.sum(clamped))
            for p in np.nonzero(clamped)[0]:
                events.append(((step + 1) * dt, "r_sq_clamp",
                               int(p) + path_start))
        r_min = np.minimum(r_min, state.r_sq)
        if (step + 1) in record_set:
            snapshot(step + 1)
    frames = {"r_sq": np.stack(r_frames), "theta": np.stack(th_frames)}
    return PathRecord(times=np.asarray(times), frames=frames, events=events,
                      n_paths=n_paths,
                      stats={"r_sq_min": r_min, "clamp_count": clamp_total})
