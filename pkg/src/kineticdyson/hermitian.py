"""Hilbert-Schmidt geometry on d x d complex Hermitian matrices.

The state space throughout the package is the real vector space of complex
Hermitian matrices with the Hilbert-Schmidt inner product

    <A, B> = Tr(A* B) = sum_ij conj(A_ij) B_ij,

which is real whenever A and B are both Hermitian.  Matrices are plain
``complex128`` ndarrays of shape ``(..., d, d)``; every function here accepts
arbitrary leading batch axes and treats arrays as immutable values (outputs
are always fresh arrays).

The module also provides a self-contained cyclic Jacobi eigensolver,
``jacobi_eigh``.  It is deliberately independent of the frame-transport
integration in :mod:`kineticdyson.spectral` (and of LAPACK) so that it can
serve as a cross-check oracle for the eigenvalue flow.
"""

from __future__ import annotations

import numpy as np

from .errors import JacobiConvergenceError

__all__ = [
    "hs_inner",
    "hs_norm",
    "symmetrize",
    "as_hermitian",
    "is_hermitian",
    "project_diag",
    "offdiag",
    "offdiag_norm",
    "conjugate_by",
    "unitarity_defect",
    "reproject_unitary",
    "min_gap",
    "jacobi_eigh",
    "eig_hermitian",
    "hermitian_basis",
]


def hs_inner(a, b):
    """Hilbert-Schmidt inner product Tr(a* b), returned as a real array.

    Parameters
    ----------
    a, b : ndarray, shape (..., d, d)
        Hermitian matrices (batched).

    Returns
    -------
    ndarray or float
        ``sum_ij conj(a_ij) b_ij`` with the imaginary part dropped; it is
        exactly real for Hermitian inputs up to roundoff.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(
            f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}"
        )
    return np.real(np.einsum("...ij,...ij->...", np.conj(a), b))


def hs_norm(a):
    """Hilbert-Schmidt norm sqrt(Tr(a* a))."""
    a = np.asarray(a)
    return np.sqrt(np.einsum("...ij,...ij->...", np.conj(a), a).real)


def symmetrize(m):
    """Project onto the Hermitian subspace via (m + m*)/2.

    Applied after arithmetic that can accumulate asymmetric roundoff; keeps
    the Hermitian defect at the 1e-16 level instead of letting it drift.
    """
    m = np.asarray(m)
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def is_hermitian(m, tol=1e-12):
    """True when ||m - m*|| <= tol * max(1, ||m||) for every batch element."""
    m = np.asarray(m)
    defect = hs_norm(m - np.conj(np.swapaxes(m, -1, -2)))
    scale = np.maximum(1.0, hs_norm(m))
    return bool(np.all(defect <= tol * scale))


def as_hermitian(entries, tol=0.0):
    """Validate and return a Hermitian complex128 matrix.

    Raises ``ValueError`` if the input's Hermitian defect exceeds ``tol``
    (absolute, at construction the spec tolerance is exact symmetry); the
    returned array is re-symmetrized so downstream arithmetic starts clean.
    """
    m = np.asarray(entries, dtype=np.complex128)
    if m.shape[-1] != m.shape[-2]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    if m.shape[-1] < 1:
        raise ValueError("dimension must be >= 1")
    defect = float(np.max(hs_norm(m - np.conj(np.swapaxes(m, -1, -2)))))
    if defect > max(tol, 4e-16 * float(np.max(hs_norm(m))) if m.size else 0.0):
        raise ValueError(f"matrix is not Hermitian (defect {defect:.3e})")
    return symmetrize(m)


def project_diag(a):
    """Orthogonal projection onto diagonal matrices (diagonal kept, rest 0)."""
    a = np.asarray(a)
    d = a.shape[-1]
    out = np.zeros_like(a)
    idx = np.arange(d)
    out[..., idx, idx] = a[..., idx, idx]
    return out


def offdiag(a):
    """Complement of ``project_diag``: the matrix with its diagonal zeroed."""
    a = np.asarray(a)
    d = a.shape[-1]
    out = a.copy()
    idx = np.arange(d)
    out[..., idx, idx] = 0.0
    return out


def offdiag_norm(a):
    """Frobenius norm of the off-diagonal part."""
    return hs_norm(offdiag(a))


def conjugate_by(u, a):
    """Frame change u* a u, re-symmetrized.

    Conjugation by a unitary is an isometry of the Hilbert-Schmidt space, so
    norm and trace are preserved up to roundoff.
    """
    u = np.asarray(u)
    a = np.asarray(a)
    if u.shape[-1] != a.shape[-1]:
        raise ValueError(
            f"dimension mismatch: {u.shape[-1]} vs {a.shape[-1]}"
        )
    return symmetrize(np.conj(np.swapaxes(u, -1, -2)) @ a @ u)


def unitarity_defect(u):
    """Frobenius norm of u* u - I (batched)."""
    u = np.asarray(u)
    d = u.shape[-1]
    g = np.conj(np.swapaxes(u, -1, -2)) @ u
    g[..., np.arange(d), np.arange(d)] -= 1.0
    return np.sqrt(np.einsum("...ij,...ij->...", np.conj(g), g).real)


def reproject_unitary(u):
    """Nearest-unitary (polar) projection via SVD, batched."""
    w, _, vh = np.linalg.svd(np.asarray(u))
    return w @ vh


def min_gap(values):
    """Minimum spacing min_{i != j} |v_i - v_j| of a real spectrum.

    Zero exactly when a value repeats.  Works on batched spectra of shape
    ``(..., d)`` and reduces the last axis.
    """
    v = np.sort(np.asarray(values, dtype=np.float64), axis=-1)
    return np.min(np.diff(v, axis=-1), axis=-1)


def _jacobi_rotation(app, aqq, apq):
    """Rotation parameters (c, s, phase) that zero one off-diagonal entry.

    For the Hermitian 2x2 block [[app, apq], [conj(apq), aqq]] the unitary

        J = [[c * phase, s * phase],
             [-s,        c       ]]

    satisfies (J* M J) diagonal, where phase = apq/|apq|.  Entries with
    |apq| == 0 get the identity rotation.  All inputs may be batched.
    """
    absq = np.abs(apq)
    active = absq > 0.0
    safe = np.where(active, absq, 1.0)
    phase = np.where(active, apq / safe, 1.0 + 0.0j)
    tau = (aqq - app) / (2.0 * safe)
    t = np.sign(tau) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
    t = np.where(tau == 0.0, 1.0, t)  # sign(0) = 0 would stall the sweep
    t = np.where(active, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    return c, s, phase


def jacobi_eigh(a, tol=1e-13, max_sweeps=60):
    """Eigendecomposition of Hermitian matrices by cyclic Jacobi rotations.

    Independent of LAPACK and of the frame-transport flow; used as the
    cross-check oracle throughout the test suite.  Suitable for the small
    dimensions (d <= 8) this package targets; batches freely.

    Parameters
    ----------
    a : ndarray, shape (..., d, d)
        Hermitian input (symmetrized defensively on entry).
    tol : float
        Convergence threshold on the off-diagonal Frobenius norm, relative
        to the matrix norm.
    max_sweeps : int
        Sweep limit before declaring non-convergence.

    Returns
    -------
    values : ndarray, shape (..., d)
        Eigenvalues in nondecreasing order.
    vectors : ndarray, shape (..., d, d)
        Unitary frame with eigenvectors as columns, ordered to match.

    Raises
    ------
    JacobiConvergenceError
        If the off-diagonal residual has not dropped below tolerance after
        ``max_sweeps`` full sweeps.
    """
    a = symmetrize(np.asarray(a, dtype=np.complex128)).copy()
    d = a.shape[-1]
    v = np.zeros_like(a)
    v[..., np.arange(d), np.arange(d)] = 1.0

    if d == 1:
        return a[..., 0, 0].real[..., None], v

    scale = np.maximum(hs_norm(a), 1e-300)
    pairs = [(p, q) for p in range(d - 1) for q in range(p + 1, d)]

    for sweep in range(max_sweeps):
        resid = offdiag_norm(a)
        if np.all(resid <= tol * scale):
            break
        for p, q in pairs:
            app = a[..., p, p].real
            aqq = a[..., q, q].real
            apq = a[..., p, q]
            c, s, phase = _jacobi_rotation(app, aqq, apq)
            # column update: [col_p, col_q] <- [col_p, col_q] @ J
            cp = a[..., :, p].copy()
            cq = a[..., :, q].copy()
            a[..., :, p] = (c * phase)[..., None] * cp - s[..., None] * cq
            a[..., :, q] = (s * phase)[..., None] * cp + c[..., None] * cq
            # row update with J*
            rp = a[..., p, :].copy()
            rq = a[..., q, :].copy()
            conj_phase = np.conj(phase)[..., None]
            a[..., p, :] = c[..., None] * conj_phase * rp - s[..., None] * rq
            a[..., q, :] = s[..., None] * conj_phase * rp + c[..., None] * rq
            # accumulate the frame
            vp = v[..., :, p].copy()
            vq = v[..., :, q].copy()
            v[..., :, p] = (c * phase)[..., None] * vp - s[..., None] * vq
            v[..., :, q] = (s * phase)[..., None] * vp + c[..., None] * vq
            # restore exact Hermitian structure of the worked rows/cols
            a[..., q, p] = np.conj(a[..., p, q])
    else:
        raise JacobiConvergenceError(max_sweeps, float(np.max(offdiag_norm(a))))

    values = np.einsum("...ii->...i", a).real
    order = np.argsort(values, axis=-1, kind="stable")
    values = np.take_along_axis(values, order, axis=-1)
    v = np.take_along_axis(v, order[..., None, :], axis=-1)
    return values, v


def eig_hermitian(a, tol=1e-13, max_sweeps=60):
    """Spec-facing alias for :func:`jacobi_eigh`."""
    return jacobi_eigh(a, tol=tol, max_sweeps=max_sweeps)


def hermitian_basis(d):
    """Orthonormal Hilbert-Schmidt basis of the d x d Hermitian space.

    Returns an array of shape (d*d, d, d): the d diagonal units E_ii, then
    for each i < j the symmetric pair (E_ij + E_ji)/sqrt(2) and the
    antisymmetric pair (i E_ij - i E_ji)/sqrt(2).
    """
    basis = np.zeros((d * d, d, d), dtype=np.complex128)
    m = 0
    for i in range(d):
        basis[m, i, i] = 1.0
        m += 1
    r = 1.0 / np.sqrt(2.0)
    for i in range(d):
        for j in range(i + 1, d):
            basis[m, i, j] = r
            basis[m, j, i] = r
            m += 1
            basis[m, i, j] = 1j * r
            basis[m, j, i] = -1j * r
            m += 1
    return basis
