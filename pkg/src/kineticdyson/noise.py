"""Deterministic Gaussian noise streams for ensemble simulation.

Every Gaussian draw in the package is addressed by the tuple
``(master_seed, tag, step_index, path_index, component)`` and produced by a
counter-based generator (Philox-4x64), so an increment is a pure function of
that address.  Replays are bit-identical no matter how an ensemble is
chunked, threaded, or reordered, which is what makes the CSV outputs
byte-reproducible under any execution schedule.

Sampling method (fixed for this release): raw 64-bit Philox words are mapped
to uniforms in (0, 1) using their top 53 bits and transformed by the exact
inverse normal CDF (``scipy.special.ndtri``).  Each normal consumes exactly
one word, so the counter layout is static.

Conventions for Brownian increments on the Hermitian space follow the
isometry with the standard Euclidean d x d real matrix space: a real matrix
of i.i.d. N(0, dt) entries maps to the Hermitian matrix with those diagonal
entries and off-diagonal entries (m_ij + i m_ji)/sqrt(2), giving diagonal
variance dt and off-diagonal real/imaginary variances dt/2.  Consequently
E[<dW, K>^2] = dt ||K||^2 for any fixed Hermitian K.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Philox
from scipy.special import ndtri

__all__ = [
    "NoiseStream",
    "TAG_STEP",
    "TAG_INIT",
    "TAG_REFINE",
    "batch_normals",
    "batch_hermitian_increments",
    "batch_vector_increments",
    "hermitian_from_normals",
]

# Purpose tags keep independent uses of the same (seed, step, path) address
# from colliding.
TAG_STEP = 0      # main driving noise of a simulation
TAG_INIT = 1      # initial-condition sampling
TAG_REFINE = 2    # sub-steps created by gap-floor step refinement

_KEY_SALT = 0x9E3779B97F4A7C15  # second Philox key word, fixed per release


def _raw_words(master_seed, tag, step, path_start, n_paths, words_per_path,
               sub=0):
    """Philox words for paths [path_start, path_start + n_paths) at one step.

    Each path owns ``ceil(words_per_path / 4)`` consecutive counter blocks,
    so any contiguous path range reproduces the same per-path words.
    """
    blocks = (words_per_path + 3) // 4
    counter = [int(path_start) * blocks, int(step), int(tag), int(sub)]
    key = [int(master_seed) & 0xFFFFFFFFFFFFFFFF, _KEY_SALT]
    bg = Philox(counter=counter, key=key)
    w = bg.random_raw(n_paths * blocks * 4)
    return w.reshape(n_paths, blocks * 4)[:, :words_per_path]


def _normals_from_words(words):
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


def batch_normals(master_seed, tag, step, path_start, n_paths, m, sub=0):
    """Standard normals of shape (n_paths, m) for one step of an ensemble."""
    return _normals_from_words(
        _raw_words(master_seed, tag, step, path_start, n_paths, m, sub=sub)
    )


def hermitian_from_normals(z, dt):
    """Map standard normals (..., d*d) to a Hermitian increment (..., d, d).

    Applies the isometry described in the module docstring, scaled by
    sqrt(dt): the (..., d, d) result has N(0, dt) diagonal entries and
    complex off-diagonal entries with N(0, dt/2) real and imaginary parts.
    """
    z = np.asarray(z, dtype=np.float64)
    d = int(round(np.sqrt(z.shape[-1])))
    if d * d != z.shape[-1]:
        raise ValueError(f"need d*d normals, got {z.shape[-1]}")
    m = z.reshape(z.shape[:-1] + (d, d)) * np.sqrt(dt)
    w = np.zeros(m.shape, dtype=np.complex128)
    iu, ju = np.triu_indices(d, k=1)
    w[..., iu, ju] = (m[..., iu, ju] + 1j * m[..., ju, iu]) / np.sqrt(2.0)
    w[..., ju, iu] = np.conj(w[..., iu, ju])
    idx = np.arange(d)
    w[..., idx, idx] = m[..., idx, idx]
    return w


def batch_hermitian_increments(master_seed, step, path_start, n_paths, d, dt,
                               tag=TAG_STEP, sub=0):
    """Hermitian Brownian increments dW of shape (n_paths, d, d)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    z = batch_normals(master_seed, tag, step, path_start, n_paths, d * d,
                      sub=sub)
    return hermitian_from_normals(z, dt)


def batch_vector_increments(master_seed, step, path_start, n_paths, n, dt,
                            tag=TAG_STEP, sub=0):
    """Increments of a standard R^n Brownian motion, shape (n_paths, n)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    z = batch_normals(master_seed, tag, step, path_start, n_paths, n, sub=sub)
    return z * np.sqrt(dt)


@dataclass
class NoiseStream:
    """Per-path cursor into the counter-based noise field.

    The values produced at a given ``step_index`` depend only on
    ``(master_seed, path_index, step_index)``, never on how many values were
    drawn before, so replays and ensemble chunkings agree bit for bit.
    Instances are cheap; spawn one per path.
    """

    master_seed: int
    path_index: int = 0
    step_index: int = 0
    tag: int = TAG_STEP

    def spawn(self, path_index):
        """Fresh stream for another path of the same ensemble."""
        return NoiseStream(self.master_seed, path_index=path_index,
                           tag=self.tag)

    def normals(self, m, sub=0):
        """Draw m standard normals for the current step and advance."""
        z = batch_normals(self.master_seed, self.tag, self.step_index,
                          self.path_index, 1, m, sub=sub)[0]
        self.step_index += 1
        return z

    def hermitian_bm_increment(self, d, dt):
        """One Hermitian Brownian increment with the covariance of the
        Hilbert-Schmidt metric (see module docstring)."""
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        return hermitian_from_normals(self.normals(d * d), dt)

    def vector_bm_increment(self, n, dt):
        """One increment of a standard Brownian motion in R^n."""
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        return self.normals(n) * np.sqrt(dt)
