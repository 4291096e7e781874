"""Frame transport along the kinetic flow and the Markovianity vector field.

As long as H_t has distinct eigenvalues, a unitary frame U_t keeping
U_t* H_t U_t diagonal can be transported by the ordinary differential
equation dU = U udot dt, with the skew-Hermitian generator

    udot(Lam, A)_ij = -A_ij / (Lam_i - Lam_j)   (i != j, zero diagonal),

where Lam = diag(U* H U) and A = U* Hdot U.  This choice is the unique one
cancelling the off-diagonal derivative of U* H U, so the diagonality defect
of the transported frame is a pure time-discretization residual; it is
monitored here, never corrected, which makes it a clean probe of integrator
error.

The module also provides the diagonal drift field injected into the
eigenvalue-velocity dynamics,

    phi(Lam, A)_i = 2 sum_{j != i} |A_ij|^2 / (Lam_i - Lam_j),

whose dependence (or not) on the off-diagonal entries of A decides whether
the eigenvalue pair (Lam, Lamdot) is Markovian: for d = 2 it collapses to a
function of (Lam, diag A); for d >= 3 it does not, and the sphere-preserving
perturbation implemented in :func:`perturbed_a` exhibits the dependence with
a closed-form second derivative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumError, NumericalError
from .hermitian import (
    conjugate_by,
    jacobi_eigh,
    min_gap,
    offdiag_norm,
    reproject_unitary,
    unitarity_defect,
)
from .kinetic import KineticState, _STEPPERS, default_initial_batch
from .noise import TAG_REFINE, batch_hermitian_increments, batch_normals, \
    hermitian_from_normals
from .records import PathRecord

__all__ = [
    "SpectralState",
    "u_dot",
    "expm_skew",
    "frame_step",
    "initial_frame",
    "phi",
    "phi_d2",
    "perturbed_a",
    "phi_perturbation_second_derivative",
    "simulate_spectral_ensemble",
    "MAX_REFINE_LEVEL",
]

# Step refinement ladder on gap-floor breach: dt/2, dt/4, ..., dt/64.
MAX_REFINE_LEVEL = 6

# Unitarity is re-enforced on this cadence and must stay below this defect.
REPROJECT_STRIDE = 100
UNITARITY_TOL = 1e-8


@dataclass
class SpectralState:
    """Unitary frame, eigenvalue vector, and conjugated velocity.

    ``u`` has shape (..., d, d), ``lam`` shape (..., d) real, ``a`` shape
    (..., d, d) Hermitian with unit Hilbert-Schmidt norm.
    """

    u: np.ndarray
    lam: np.ndarray
    a: np.ndarray
    t: float = 0.0

    @property
    def d(self):
        return self.lam.shape[-1]


def _pair_differences(lam):
    """lam_i - lam_j as an (..., d, d) array."""
    lam = np.asarray(lam, dtype=np.float64)
    return lam[..., :, None] - lam[..., None, :]


def u_dot(lam, a):
    """Frame velocity: -a_ij/(lam_i - lam_j) off the diagonal, 0 on it.

    Skew-Hermitian by construction (a_ji = conj(a_ij) while the denominator
    changes sign).  Raises DegenerateSpectrumError on a repeated eigenvalue.
    """
    lam = np.asarray(lam, dtype=np.float64)
    a = np.asarray(a)
    if np.any(min_gap(lam) == 0.0):
        raise DegenerateSpectrumError("repeated diagonal entries in u_dot")
    diff = _pair_differences(lam)
    d = lam.shape[-1]
    idx = np.arange(d)
    diff[..., idx, idx] = 1.0
    out = -a / diff
    out[..., idx, idx] = 0.0
    return out


def expm_skew(s):
    """Matrix exponential of a skew-Hermitian matrix, exactly unitary.

    Diagonalizes the Hermitian matrix i s and exponentiates the spectrum on
    the unit circle, so the result is unitary to machine precision; batched.
    """
    s = np.asarray(s)
    w, v = np.linalg.eigh(1j * s)
    phase = np.exp(-1j * w)
    return (v * phase[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def initial_frame(h0):
    """Frame diagonalizing H_0 with nondecreasing diagonal, plus spectrum.

    Returns (u0, lam0).  For an already-diagonal H_0 with sorted entries
    this is the identity frame.  The eigenvalue order fixed here is then
    maintained by continuity of the transport, never re-sorted mid-path.
    """
    lam0, u0 = jacobi_eigh(h0)
    return u0, lam0


def frame_step(state, h, hdot, dt, gap_floor=0.0):
    """Advance the frame to match the kinetic state (h, hdot) at t + dt.

    Applies U <- U expm(udot dt) with udot evaluated at the current
    (lam, a), then recomputes lam = diag(U* h U) and a = U* hdot U.

    Returns (new_state, resid) where resid is the Frobenius norm of the
    off-diagonal part of U* h U, the diagonality defect (batched).

    Raises DegenerateSpectrumError when the new spectrum's minimum gap
    falls below ``gap_floor`` (callers implement step refinement).
    """
    udot = u_dot(state.lam, state.a)
    u_new = state.u @ expm_skew(udot * dt)
    lam_full = conjugate_by(u_new, h)
    resid = offdiag_norm(lam_full)
    d = state.d
    lam_new = lam_full[..., np.arange(d), np.arange(d)].real
    a_new = conjugate_by(u_new, hdot)
    if gap_floor > 0.0 and np.any(min_gap(lam_new) < gap_floor):
        raise DegenerateSpectrumError(
            f"minimum gap below floor {gap_floor:g}"
        )
    new = SpectralState(u=u_new, lam=lam_new, a=a_new, t=state.t + dt)
    return new, resid


def phi(lam, a):
    """Diagonal drift field 2 sum_{j != i} |a_ij|^2 / (lam_i - lam_j).

    Its entries sum to zero: each unordered pair {i, j} contributes
    opposite-sign terms.  Raises DegenerateSpectrumError on a repeated
    eigenvalue.
    """
    lam = np.asarray(lam, dtype=np.float64)
    a = np.asarray(a)
    if np.any(min_gap(lam) == 0.0):
        raise DegenerateSpectrumError("repeated eigenvalues in phi")
    diff = _pair_differences(lam)
    d = lam.shape[-1]
    idx = np.arange(d)
    diff[..., idx, idx] = 1.0
    w = np.abs(a) ** 2 / diff
    w[..., idx, idx] = 0.0
    return 2.0 * np.sum(w, axis=-1)


def phi_d2(lam, a_diag):
    """Dimension-2 form of :func:`phi` from (lam, diag A) alone.

    For a unit-norm A the off-diagonal mass is 1 - a_11^2 - a_22^2, so

        phi_1 = -phi_2 = (1 - a_11^2 - a_22^2) / (lam_1 - lam_2).

    This factorization through the diagonal of A is exactly what makes the
    d = 2 eigenvalue pair Markovian; no analogue exists for d >= 3.
    """
    lam = np.asarray(lam, dtype=np.float64)
    a_diag = np.asarray(a_diag, dtype=np.float64)
    if lam.shape[-1] != 2 or a_diag.shape[-1] != 2:
        raise ValueError("phi_d2 is defined for d = 2 only")
    gap = lam[..., 0] - lam[..., 1]
    if np.any(gap == 0.0):
        raise DegenerateSpectrumError("repeated eigenvalues in phi_d2")
    top = (1.0 - a_diag[..., 0] ** 2 - a_diag[..., 1] ** 2) / gap
    return np.stack([top, -top], axis=-1)


def perturbed_a(a, i, j, k, eps):
    """Sphere-preserving perturbation moving mass between entries (i,j), (i,k).

    Sets a_ij <- a_ij cos(eps) and a_ik <- a_ik + 1j |a_ij| sin(eps) u with
    u the unit phase of a_ik (u = 1 when a_ik = 0), conjugate entries
    updated.  |a_ij|^2 + |a_ik|^2 is invariant, so the Hilbert-Schmidt norm
    and the whole diagonal are unchanged for every eps.
    """
    if len({i, j, k}) != 3:
        raise ValueError("indices i, j, k must be distinct")
    a = np.asarray(a, dtype=np.complex128)
    aij = a[..., i, j]
    if np.any(np.abs(aij) == 0.0):
        raise ValueError("perturbation undefined when a_ij = 0")
    aik = a[..., i, k]
    mag = np.abs(aik)
    u = np.where(mag > 0.0, aik / np.where(mag > 0.0, mag, 1.0), 1.0 + 0.0j)
    out = a.copy()
    out[..., i, j] = aij * np.cos(eps)
    out[..., j, i] = np.conj(out[..., i, j])
    out[..., i, k] = aik + 1j * np.abs(aij) * np.sin(eps) * u
    out[..., k, i] = np.conj(out[..., i, k])
    return out


def phi_perturbation_second_derivative(lam, a, i, j, k, eps):
    """Closed-form d^2/deps^2 of phi(lam, perturbed_a(a, i, j, k, eps))_i.

    Equals

        (lam_k - lam_j) / ((lam_i - lam_j)(lam_i - lam_k))
            * 4 |a_ij|^2 cos(2 eps),

    with a_ij the unperturbed entry: |a^eps_ij|^2 = |a_ij|^2 cos^2(eps) has
    second derivative -2 |a_ij|^2 cos(2 eps) exactly, and the (i,k) term
    carries the complementary sign.  Nonzero at eps = 0 whenever a_ij != 0,
    which is how the dependence of phi on off-diagonal data is certified.
    """
    if len({i, j, k}) != 3:
        raise ValueError("indices i, j, k must be distinct")
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(min_gap(lam) == 0.0):
        raise DegenerateSpectrumError("repeated eigenvalues")
    a = np.asarray(a)
    aij = a[..., i, j]
    if np.any(np.abs(aij) == 0.0):
        raise ValueError("perturbation undefined when a_ij = 0")
    li = lam[..., i]
    lj = lam[..., j]
    lk = lam[..., k]
    factor = (lk - lj) / ((li - lj) * (li - lk))
    return factor * 4.0 * np.abs(aij) ** 2 * np.cos(2.0 * eps)


def _coupled_substep(kin, spec, dw, dt, scheme, d):
    """One Euler step of the kinetic pair plus frame transport."""
    h_new, hdot_new = _STEPPERS[scheme](kin.h, kin.hdot, dw, dt, d)
    kin_new = KineticState(h=h_new, hdot=hdot_new, t=kin.t + dt)
    spec_new, resid = frame_step(spec, h_new, hdot_new, dt)
    return kin_new, spec_new, resid


def _refine_paths(cfg, master_seed, step, path_ids, kin, spec, gap_floor):
    """Re-integrate one coarse step per path at halved dt until the gap
    clears the floor, or give up at dt/64.

    Returns per-path (kin, spec, resid, stopped) tuples.  Sub-step noise
    lives in the refine tag-space keyed by (level, substep), so the retry
    is deterministic and schedule-independent.
    """
    out = []
    for p_local, p_global in path_ids:
        k0 = KineticState(h=kin.h[p_local:p_local + 1].copy(),
                          hdot=kin.hdot[p_local:p_local + 1].copy(), t=kin.t)
        s0 = SpectralState(u=spec.u[p_local:p_local + 1].copy(),
                           lam=spec.lam[p_local:p_local + 1].copy(),
                           a=spec.a[p_local:p_local + 1].copy(), t=spec.t)
        solved = None
        for level in range(1, MAX_REFINE_LEVEL + 1):
            n_sub = 2 ** level
            dt_sub = cfg.dt / n_sub
            kin_try, spec_try = k0, s0
            resid_max = 0.0
            ok = True
            for s in range(n_sub):
                z = batch_normals(master_seed, TAG_REFINE, step, p_global, 1,
                                  cfg.d * cfg.d, sub=(level << 32) | s)
                dw = hermitian_from_normals(z, dt_sub)
                kin_try, spec_try, resid = _coupled_substep(
                    kin_try, spec_try, dw, dt_sub, cfg.scheme, cfg.d)
                resid_max = max(resid_max, float(resid.max()))
                if float(min_gap(spec_try.lam).min()) < gap_floor:
                    ok = False
                    break
            if ok:
                solved = (kin_try, spec_try, resid_max, False)
                break
        if solved is None:
            solved = (k0, s0, 0.0, True)
        out.append((p_local, p_global) + solved)
    return out


def simulate_spectral_ensemble(cfg, n_paths, master_seed, path_start=0,
                               initial=None, record_steps=None,
                               record_h=False, record_hdot=False,
                               record_u=False,
                               collect_db=False, dw_path=None,
                               reproject_stride=REPROJECT_STRIDE):
    """Integrate kinetic paths together with their diagonalizing frames.

    Records frames "lam" (eigenvalue vector), "a" (conjugated velocity) and
    "resid" (diagonality defect) on the snapshot grid, plus path-level
    reductions in ``record.stats``: "resid_sup" (max defect over all steps,
    per path), "unitarity_sup" and "min_gap" (per path).  With
    ``collect_db=True`` the per-step conjugated increments U_t* dW_t U_t
    are stacked under stats["db"] (shape (n_steps, n_paths, d, d)), the
    driving noise for the eigenvalue-velocity simulator's pathwise coupling.

    ``dw_path`` of shape (n_steps, n_paths, d, d) substitutes explicit
    driving increments for the counter stream (used by strong-convergence
    experiments that refine one Brownian path across step sizes); with
    explicit noise, gap-floor breaches freeze the path instead of refining.

    Gap-floor breaches trigger per-path step refinement down to dt/64; a
    path that still breaches is frozen and a ("gap_floor_stop") event is
    recorded with its time and path index.
    """
    n_steps = cfg.n_steps
    if initial is None:
        kin = default_initial_batch(cfg.d, master_seed, path_start, n_paths)
    else:
        kin = initial
    u0, lam0 = initial_frame(kin.h)
    spec = SpectralState(u=u0, lam=lam0,
                         a=conjugate_by(u0, kin.hdot), t=0.0)
    gap_floor = cfg.gap_floor
    if gap_floor == 0.0:
        # default: 1e-3 of the initial minimum gap
        gap_floor = 1e-3 * float(np.min(min_gap(lam0)))

    if record_steps is None:
        record_steps = list(range(0, n_steps + 1, cfg.record_stride))
        if record_steps[-1] != n_steps:
            record_steps.append(n_steps)
    record_set = set(int(s) for s in record_steps)

    times, lam_frames, a_frames, resid_frames = [], [], [], []
    h_frames, hdot_frames, u_frames = [], [], []
    db_steps = []
    events = []
    active = np.ones(n_paths, dtype=bool)
    resid_sup = np.zeros(n_paths)
    unit_sup = np.zeros(n_paths)
    gap_min = min_gap(lam0).astype(np.float64).copy()
    last_resid = np.zeros(n_paths)

    def snapshot(k):
        times.append(k * cfg.dt)
        lam_frames.append(spec.lam.copy())
        a_frames.append(spec.a.copy())
        resid_frames.append(last_resid.copy())
        if record_h:
            h_frames.append(kin.h.copy())
        if record_hdot:
            hdot_frames.append(kin.hdot.copy())
        if record_u:
            u_frames.append(spec.u.copy())

    if 0 in record_set:
        snapshot(0)

    for k in range(n_steps):
        if dw_path is None:
            dw = batch_hermitian_increments(master_seed, k, path_start,
                                            n_paths, cfg.d, cfg.dt)
        else:
            dw = dw_path[k]
        if collect_db:
            db_steps.append(conjugate_by(spec.u, dw))
        kin_prev, spec_prev = kin, spec
        kin_try, spec_try, resid = _coupled_substep(
            kin_prev, spec_prev, dw, cfg.dt, cfg.scheme, cfg.d)
        breach = active & (min_gap(spec_try.lam) < gap_floor)
        if np.any(breach) and dw_path is not None:
            for p in np.nonzero(breach)[0]:
                active[p] = False
                events.append(((k + 1) * cfg.dt, "gap_floor_stop",
                               int(p) + path_start))
        elif np.any(breach):
            fixes = _refine_paths(
                cfg, master_seed, k,
                [(int(p), int(p) + path_start) for p in np.nonzero(breach)[0]],
                kin_prev, spec_prev, gap_floor)
            for p_local, p_global, kin_fix, spec_fix, r_fix, stopped in fixes:
                if stopped:
                    active[p_local] = False
                    events.append(((k + 1) * cfg.dt, "gap_floor_stop",
                                   p_global))
                    # freeze: keep the pre-step state
                    kin_try.h[p_local] = kin_prev.h[p_local]
                    kin_try.hdot[p_local] = kin_prev.hdot[p_local]
                    spec_try.u[p_local] = spec_prev.u[p_local]
                    spec_try.lam[p_local] = spec_prev.lam[p_local]
                    spec_try.a[p_local] = spec_prev.a[p_local]
                    resid[p_local] = last_resid[p_local]
                else:
                    kin_try.h[p_local] = kin_fix.h[0]
                    kin_try.hdot[p_local] = kin_fix.hdot[0]
                    spec_try.u[p_local] = spec_fix.u[0]
                    spec_try.lam[p_local] = spec_fix.lam[0]
                    spec_try.a[p_local] = spec_fix.a[0]
                    resid[p_local] = r_fix
        frozen = ~active
        if np.any(frozen):
            kin_try.h[frozen] = kin_prev.h[frozen]
            kin_try.hdot[frozen] = kin_prev.hdot[frozen]
            spec_try.u[frozen] = spec_prev.u[frozen]
            spec_try.lam[frozen] = spec_prev.lam[frozen]
            spec_try.a[frozen] = spec_prev.a[frozen]
            resid[frozen] = last_resid[frozen]
        kin, spec = kin_try, spec_try
        last_resid = np.asarray(resid, dtype=np.float64).reshape(n_paths)
        resid_sup = np.maximum(resid_sup, last_resid)
        gap_min = np.minimum(gap_min, min_gap(spec.lam))

        if (k + 1) % reproject_stride == 0 or k + 1 == n_steps:
            defect = unitarity_defect(spec.u)
            unit_sup = np.maximum(unit_sup, defect)
            spec = SpectralState(u=reproject_unitary(spec.u), lam=spec.lam,
                                 a=spec.a, t=spec.t)
            if np.any(unitarity_defect(spec.u) > UNITARITY_TOL):
                raise NumericalError("unitarity drift after reprojection",
                                     step_index=k + 1)
        if not np.all(np.isfinite(spec.lam)):
            raise NumericalError("non-finite spectral state", step_index=k)
        if (k + 1) in record_set:
            snapshot(k + 1)

    frames = {
        "lam": np.stack(lam_frames),
        "a": np.stack(a_frames),
        "resid": np.stack(resid_frames),
    }
    if record_h:
        frames["h"] = np.stack(h_frames)
    if record_hdot:
        frames["hdot"] = np.stack(hdot_frames)
    if record_u:
        frames["u"] = np.stack(u_frames)
    stats = {
        "resid_sup": resid_sup,
        "unitarity_sup": unit_sup,
        "min_gap": gap_min,
        "gap_floor": gap_floor,
    }
    if collect_db:
        stats["db"] = np.stack(db_steps)
    return PathRecord(times=np.asarray(times), frames=frames, events=events,
                      config=cfg, n_paths=n_paths, stats=stats)
