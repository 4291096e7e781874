"""The autonomous eigenvalue-velocity diffusion and its d = 2 specialization.

The pair (Lam, A) of eigenvalues and frame-conjugated velocity is Markovian
in every dimension and solves the self-contained system

    dLam_t = diag(A_t) dt,
    dA_t   = (udot* A + A udot) dt + dB_t - A_t Tr(A_t* dB_t)
             - ((d^2 - 1)/2) A_t dt,

with B a standard Hermitian Brownian motion and udot = udot(Lam, A) the
frame velocity of :mod:`kineticdyson.spectral`.  Driving this system with
the conjugated increments U_t* dW_t U_t harvested from a frame-transport run
reproduces that run's (Lam, A) path to O(dt); driving it with fresh noise
gives the same law.

For d = 2 the eigenvalues (lam, mu) and their velocities close into a
kinetic diffusion of their own:

    dlamdot = +((1 - lamdot^2 - mudot^2)/(lam - mu)) dt + dM^lam
              - (3/2) lamdot dt,
    dmudot  = -( same )/(lam - mu) dt + dM^mu - (3/2) mudot dt,

with martingale brackets d<M^lam> = (1 - lamdot^2) dt, d<M^mu> =
(1 - mudot^2) dt and d<M^lam, M^mu> = -lamdot mudot dt.  The simulator here
realizes those martingales explicitly from the four real components of the
driving Hermitian noise (so the brackets hold by construction), carrying the
off-diagonal phase (re, im) of A_12 as auxiliary state; the marginal law of
(lam, mu, lamdot, mudot) is the Markovian system above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, NumericalError
from .hermitian import hs_inner, hs_norm, min_gap, symmetrize
from .noise import (
    TAG_INIT,
    TAG_REFINE,
    TAG_STEP,
    batch_hermitian_increments,
    batch_normals,
    hermitian_from_normals,
)
from .records import PathRecord
from .spectral import MAX_REFINE_LEVEL, u_dot

__all__ = [
    "LambdaAState",
    "lambda_a_step",
    "lambda_a_initial_batch",
    "simulate_lambda_a_ensemble",
    "D2State",
    "d2_step",
    "d2_initial_batch",
    "simulate_d2_ensemble",
    "d2_from_full",
]


@dataclass
class LambdaAState:
    """Eigenvalue vector plus conjugated velocity on a fixed-norm sphere.

    ``a_norm`` is the Hilbert-Schmidt norm the velocity is renormalized to
    after every step; it is 1 for states extracted from a kinetic run, and
    kept at the initial value for experiment-specific starts.
    """

    lam: np.ndarray
    a: np.ndarray
    t: float = 0.0
    a_norm: float = 1.0

    @property
    def d(self):
        return self.lam.shape[-1]


def lambda_a_step(state, db, dt, gap_floor=0.0):
    """One Euler step of the (Lam, A) system driven by the increment db.

    The eigenvalues advance by the current diagonal of A; the velocity
    advances by the conjugation drift [A, udot], the tangentially projected
    noise, and the radial drift, then is renormalized to ``state.a_norm``.

    Raises DegenerateSpectrumError when the new spectrum's minimum gap is
    below ``gap_floor`` (ensemble drivers refine the step instead).
    """
    lam, a = state.lam, state.a
    d = state.d
    udot = u_dot(lam, a)
    comm = a @ udot - udot @ a
    tr = hs_inner(a, db)[..., None, None]
    rate = 0.5 * (d * d - 1)
    a_new = a + comm * dt + db - a * tr - rate * a * dt
    a_new = symmetrize(a_new)
    a_new = a_new * (state.a_norm / hs_norm(a_new)[..., None, None])
    idx = np.arange(d)
    lam_new = lam + a[..., idx, idx].real * dt
    if gap_floor > 0.0 and np.any(min_gap(lam_new) < gap_floor):
        raise DegenerateSpectrumError(
            f"minimum gap below floor {gap_floor:g}"
        )
    return LambdaAState(lam=lam_new, a=a_new, t=state.t + dt,
                        a_norm=state.a_norm)


def lambda_a_initial_batch(d, master_seed, path_start, n_paths,
                           lam0=None):
    """Spectrum lam0 (default 0..d-1) with velocity uniform on the sphere.

    Matches the law of (Lam_0, A_0) induced by the default kinetic start
    through an identity frame.
    """
    if lam0 is None:
        lam0 = np.arange(d, dtype=np.float64)
    lam = np.broadcast_to(np.asarray(lam0, dtype=np.float64),
                          (n_paths, d)).copy()
    z = batch_normals(master_seed, TAG_INIT, 0, path_start, n_paths, d * d)
    a = hermitian_from_normals(z, 1.0)
    a = a / hs_norm(a)[..., None, None]
    return LambdaAState(lam=lam, a=a, t=0.0, a_norm=1.0)


def _refine_lambda_a(state_prev, cfg_d, dt, master_seed, step, path_ids,
                     gap_floor):
    """Per-path step refinement mirroring the spectral-flow policy."""
    out = []
    for p_local, p_global in path_ids:
        s0 = LambdaAState(lam=state_prev.lam[p_local:p_local + 1].copy(),
                          a=state_prev.a[p_local:p_local + 1].copy(),
                          t=state_prev.t, a_norm=state_prev.a_norm)
        solved = None
        for level in range(1, MAX_REFINE_LEVEL + 1):
            n_sub = 2 ** level
            dt_sub = dt / n_sub
            trial = s0
            ok = True
            for s in range(n_sub):
                z = batch_normals(master_seed, TAG_REFINE, step, p_global, 1,
                                  cfg_d * cfg_d, sub=(level << 32) | s)
                db = hermitian_from_normals(z, dt_sub)
                try:
                    trial = lambda_a_step(trial, db, dt_sub,
                                          gap_floor=gap_floor)
                except DegenerateSpectrumError:
                    ok = False
                    break
            if ok:
                solved = (trial, False)
                break
        if solved is None:
            solved = (s0, True)
        out.append((p_local, p_global) + solved)
    return out


def simulate_lambda_a_ensemble(initial, dt, n_steps, master_seed,
                               path_start=0, db_path=None, gap_floor=0.0,
                               record_steps=None):
    """Integrate an ensemble of (Lam, A) paths.

    Noise comes either from the counter stream (fresh standard Hermitian
    increments per (path, step)) or, when ``db_path`` of shape
    (n_steps, n_paths, d, d) is given, from harvested increments such as the
    conjugated noise of a frame-transport run (pathwise coupling).  With
    harvested noise, gap-floor breaches cannot be refined and freeze the
    path immediately.

    Records frames "lam" (n_rec, n_paths, d) and "a" (n_rec, n_paths, d, d).
    """
    state = initial
    n_paths = state.lam.shape[0]
    d = state.d
    if record_steps is None:
        record_steps = range(n_steps + 1)
    record_set = set(int(s) for s in record_steps)

    times, lam_frames, a_frames = [], [], []
    events = []
    active = np.ones(n_paths, dtype=bool)

    def snapshot(k):
        times.append(k * dt)
        lam_frames.append(state.lam.copy())
        a_frames.append(state.a.copy())

    if 0 in record_set:
        snapshot(0)
    for k in range(n_steps):
        if db_path is None:
            db = batch_hermitian_increments(master_seed, k, path_start,
                                            n_paths, d, dt)
        else:
            db = db_path[k]
        prev = state
        trial = lambda_a_step(prev, db, dt, gap_floor=0.0)
        breach = active & (min_gap(trial.lam) < gap_floor) \
            if gap_floor > 0.0 else np.zeros(n_paths, dtype=bool)
        if np.any(breach):
            if db_path is not None:
                for p in np.nonzero(breach)[0]:
                    active[p] = False
                    events.append(((k + 1) * dt, "gap_floor_stop",
                                   int(p) + path_start))
            else:
                fixes = _refine_lambda_a(
                    prev, d, dt, master_seed, k,
                    [(int(p), int(p) + path_start)
                     for p in np.nonzero(breach)[0]],
                    gap_floor)
                for p_local, p_global, fixed, stopped in fixes:
                    if stopped:
                        active[p_local] = False
                        events.append(((k + 1) * dt, "gap_floor_stop",
                                       p_global))
                    else:
                        trial.lam[p_local] = fixed.lam[0]
                        trial.a[p_local] = fixed.a[0]
        frozen = ~active
        if np.any(frozen):
            trial.lam[frozen] = prev.lam[frozen]
            trial.a[frozen] = prev.a[frozen]
        state = trial
        if not np.all(np.isfinite(state.lam)):
            raise NumericalError("non-finite eigenvalue state", step_index=k)
        if (k + 1) in record_set:
            snapshot(k + 1)

    frames = {"lam": np.stack(lam_frames), "a": np.stack(a_frames)}
    return PathRecord(times=np.asarray(times), frames=frames, events=events,
                      config=None, n_paths=n_paths,
                      stats={"active": active})


@dataclass
class D2State:
    """d = 2 eigenvalue kinetic diffusion with auxiliary off-diagonal phase.

    The observable part is (lam, mu, lamdot, mudot); (a_re, a_im) is the
    off-diagonal entry of A whose squared mass 2(a_re^2 + a_im^2) equals
    1 - lamdot^2 - mudot^2 on the unit sphere.
    """

    lam: np.ndarray
    mu: np.ndarray
    lamdot: np.ndarray
    mudot: np.ndarray
    a_re: np.ndarray
    a_im: np.ndarray
    t: float = 0.0

    @property
    def offdiag_sq(self):
        return 2.0 * (self.a_re ** 2 + self.a_im ** 2)


def d2_initial_batch(master_seed, path_start, n_paths, lam0=0.0, mu0=1.0,
                     lamdot0=None, mudot0=None):
    """Initial d = 2 state: fixed eigenvalues, velocity uniform on the sphere.

    With ``lamdot0``/``mudot0`` given, the velocities are pinned and only
    the off-diagonal phase is sampled (uniformly), with its mass set by the
    sphere constraint; used for pinned-start drift and bracket experiments.
    """
    z = batch_normals(master_seed, TAG_INIT, 1, path_start, n_paths, 4)
    if lamdot0 is None:
        v = z / np.linalg.norm(z, axis=-1, keepdims=True)
        v1, v2 = v[:, 0], v[:, 1]
        a_re, a_im = v[:, 2] / np.sqrt(2.0), v[:, 3] / np.sqrt(2.0)
    else:
        v1 = np.full(n_paths, float(lamdot0))
        v2 = np.full(n_paths, float(mudot0))
        mass = 1.0 - v1 ** 2 - v2 ** 2
        if np.any(mass < -1e-12):
            raise ValueError("lamdot0^2 + mudot0^2 must be <= 1")
        mass = np.maximum(mass, 0.0)
        angle = np.arctan2(z[:, 1], z[:, 0])
        a_re = np.sqrt(mass / 2.0) * np.cos(angle)
        a_im = np.sqrt(mass / 2.0) * np.sin(angle)
    return D2State(lam=np.full(n_paths, float(lam0)),
                   mu=np.full(n_paths, float(mu0)),
                   lamdot=v1, mudot=v2, a_re=a_re, a_im=a_im, t=0.0)


def d2_step(state, z4, dt):
    """One Euler step of the d = 2 system from four standard normals.

    ``z4`` has shape (..., 4); the four components drive the real Hermitian
    noise coordinates (B_11, B_22, Re B_12, Im B_12), the last two scaled to
    variance dt/2 per the Hilbert-Schmidt isometry.  Returns
    (new_state, (dM_lam, dM_mu)) with the explicit martingale increments

        dM_lam = (1 - lamdot^2) dB_11 - 2 lamdot a_re dB_re
                 - 2 lamdot a_im dB_im - lamdot mudot dB_22

    (and symmetrically for dM_mu), whose brackets reproduce the closed
    forms by construction.
    """
    v1, v2 = state.lamdot, state.mudot
    if np.any(v1 ** 2 + v2 ** 2 > 1.0 + 1e-10):
        raise NumericalError("velocity left the unit disk")
    g = state.lam - state.mu
    if np.any(g == 0.0):
        raise DegenerateSpectrumError("eigenvalues collided in d2_step")
    z4 = np.asarray(z4, dtype=np.float64)
    root_dt = np.sqrt(dt)
    db11 = z4[..., 0] * root_dt
    db22 = z4[..., 1] * root_dt
    dbre = z4[..., 2] * root_dt / np.sqrt(2.0)
    dbim = z4[..., 3] * root_dt / np.sqrt(2.0)

    a_re, a_im = state.a_re, state.a_im
    tr = v1 * db11 + v2 * db22 + 2.0 * (a_re * dbre + a_im * dbim)
    offm = 2.0 * (a_re ** 2 + a_im ** 2)
    rate = 1.5  # (d^2 - 1)/2 at d = 2

    dm_lam = db11 - v1 * tr
    dm_mu = db22 - v2 * tr
    v1_new = v1 + (offm / g) * dt + dm_lam - rate * v1 * dt
    v2_new = v2 - (offm / g) * dt + dm_mu - rate * v2 * dt
    rot = (v2 - v1) / g
    a_re_new = a_re + rot * a_re * dt + dbre - a_re * tr - rate * a_re * dt
    a_im_new = a_im + rot * a_im * dt + dbim - a_im * tr - rate * a_im * dt

    norm = np.sqrt(v1_new ** 2 + v2_new ** 2
                   + 2.0 * (a_re_new ** 2 + a_im_new ** 2))
    new = D2State(
        lam=state.lam + v1 * dt,
        mu=state.mu + v2 * dt,
        lamdot=v1_new / norm,
        mudot=v2_new / norm,
        a_re=a_re_new / norm,
        a_im=a_im_new / norm,
        t=state.t + dt,
    )
    return new, (dm_lam, dm_mu)


def simulate_d2_ensemble(initial, dt, n_steps, master_seed, path_start=0,
                         record_steps=None):
    """Integrate a d = 2 ensemble, accumulating realized and closed-form
    quadratic (co)variations of the martingale parts.

    Records frames "lam", "mu", "lamdot", "mudot", "offdiag_sq" and returns
    in ``stats`` the per-path sums qv_ll = sum dM_lam^2, qv_mm, qv_lm and
    the integrated brackets ib_ll = sum (1 - lamdot^2) dt, ib_mm,
    ib_lm = sum (-lamdot mudot) dt, all evaluated at pre-step states.
    """
    state = initial
    n_paths = state.lam.shape[0]
    if record_steps is None:
        record_steps = range(n_steps + 1)
    record_set = set(int(s) for s in record_steps)

    times = []
    frames = {k: [] for k in ("lam", "mu", "lamdot", "mudot", "offdiag_sq")}
    qv = {k: np.zeros(n_paths) for k in ("qv_ll", "qv_mm", "qv_lm",
                                         "ib_ll", "ib_mm", "ib_lm")}

    def snapshot(k):
        times.append(k * dt)
        frames["lam"].append(state.lam.copy())
        frames["mu"].append(state.mu.copy())
        frames["lamdot"].append(state.lamdot.copy())
        frames["mudot"].append(state.mudot.copy())
        frames["offdiag_sq"].append(state.offdiag_sq.copy())

    if 0 in record_set:
        snapshot(0)
    for k in range(n_steps):
        z4 = batch_normals(master_seed, TAG_STEP, k, path_start, n_paths, 4)
        v1, v2 = state.lamdot, state.mudot
        state, (dm_lam, dm_mu) = d2_step(state, z4, dt)
        qv["qv_ll"] += dm_lam ** 2
        qv["qv_mm"] += dm_mu ** 2
        qv["qv_lm"] += dm_lam * dm_mu
        qv["ib_ll"] += (1.0 - v1 ** 2) * dt
        qv["ib_mm"] += (1.0 - v2 ** 2) * dt
        qv["ib_lm"] += -(v1 * v2) * dt
        if (k + 1) in record_set:
            snapshot(k + 1)

    frames = {k: np.stack(v) for k, v in frames.items()}
    return PathRecord(times=np.asarray(times), frames=frames, events=[],
                      config=None, n_paths=n_paths, stats=qv)


def d2_from_full(record):
    """Extract the d = 2 coordinates from a frame-transport record.

    Returns a dict of arrays keyed like the d2 frames: lam = Lam_11,
    mu = Lam_22, lamdot = A_11, mudot = A_22 and offdiag_sq =
    1 - A_11^2 - A_22^2.  Raises ValueError unless the record is a d = 2
    run carrying "lam" and "a" frames.
    """
    lam = record.frames.get("lam")
    a = record.frames.get("a")
    if lam is None or a is None or lam.shape[-1] != 2:
        raise ValueError("need a d = 2 record with lam and a frames")
    v1 = a[..., 0, 0].real
    v2 = a[..., 1, 1].real
    return {
        "lam": lam[..., 0],
        "mu": lam[..., 1],
        "lamdot": v1,
        "mudot": v2,
        "offdiag_sq": 1.0 - v1 ** 2 - v2 ** 2,
        "a_re": a[..., 0, 1].real,
        "a_im": a[..., 0, 1].imag,
    }
