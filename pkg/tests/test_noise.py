"""Covariance structure and determinism of the counter-based noise."""

import numpy as np
import pytest

from kineticdyson import hermitian as hm
from kineticdyson.noise import (
    NoiseStream,
    batch_hermitian_increments,
    batch_normals,
    batch_vector_increments,
    hermitian_from_normals,
)

N_MC = 200_000
DT = 0.01


def mc_tolerance(var, n=N_MC, k=3.0):
    """k Monte Carlo standard errors of a variance estimate."""
    return k * var * np.sqrt(2.0 / n)


def test_replay_is_bit_identical():
    a = batch_normals(42, 0, 17, 5, 100, 9)
    b = batch_normals(42, 0, 17, 5, 100, 9)
    assert np.array_equal(a, b)


def test_stream_matches_batch_rows():
    """A per-path stream reproduces its row of the batched draw exactly."""
    batch = batch_hermitian_increments(7, 0, 0, 10, 3, DT)
    batch2 = batch_hermitian_increments(7, 1, 3, 4, 3, DT)
    s = NoiseStream(7, path_index=6)
    first = s.hermitian_bm_increment(3, DT)
    second = s.hermitian_bm_increment(3, DT)
    assert np.array_equal(first, batch[6])
    assert np.array_equal(second, batch2[3])


def test_chunking_invariance():
    """Any contiguous chunking of the path range gives the same values."""
    full = batch_normals(99, 0, 3, 0, 64, 10)
    parts = np.concatenate([
        batch_normals(99, 0, 3, 0, 20, 10),
        batch_normals(99, 0, 3, 20, 30, 10),
        batch_normals(99, 0, 3, 50, 14, 10),
    ])
    assert np.array_equal(full, parts)


def test_diagonal_variance():
    dw = batch_hermitian_increments(1, 0, 0, N_MC, 2, DT)
    var = dw[:, 0, 0].real.var()
    assert abs(var - DT) <= mc_tolerance(DT)


def test_offdiagonal_variance_and_symmetry():
    dw = batch_hermitian_increments(2, 0, 0, N_MC, 3, DT)
    assert hm.is_hermitian(dw, tol=1e-14)
    assert abs(dw[:, 0, 1].real.var() - DT / 2) <= mc_tolerance(DT / 2)
    assert abs(dw[:, 0, 1].imag.var() - DT / 2) <= mc_tolerance(DT / 2)


def test_total_mass_is_d_squared_dt():
    for d in (2, 3):
        dw = batch_hermitian_increments(3, 0, 0, N_MC, d, DT)
        mass = (np.abs(dw) ** 2).sum(axis=(1, 2)).mean()
        assert abs(mass - d * d * DT) <= mc_tolerance(d * d * DT / np.sqrt(d))


def test_projection_variance_along_fixed_direction():
    """E[<dW, K>^2] = dt ||K||^2 for a fixed Hermitian K."""
    rng = np.random.default_rng(5)
    k = hm.symmetrize(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    k /= hm.hs_norm(k)
    dw = batch_hermitian_increments(4, 0, 0, N_MC, 3, DT)
    second_moment = (hm.hs_inner(dw, k) ** 2).mean()
    assert abs(second_moment - DT) <= mc_tolerance(DT)


def test_real_embedding_matches_direct_sampling():
    """Sampling the real matrix and mapping through the isometry gives the
    same covariance as assembling the Hermitian entries directly."""
    rng = np.random.default_rng(11)
    k = hm.symmetrize(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    k /= hm.hs_norm(k)
    # route 1: the package construction (real embedding)
    dw1 = batch_hermitian_increments(12, 0, 0, N_MC, 2, DT)
    # route 2: direct entrywise assembly from fresh normals
    z = batch_normals(13, 0, 0, 0, N_MC, 4)
    dw2 = np.zeros((N_MC, 2, 2), dtype=complex)
    dw2[:, 0, 0] = z[:, 0] * np.sqrt(DT)
    dw2[:, 1, 1] = z[:, 1] * np.sqrt(DT)
    dw2[:, 0, 1] = (z[:, 2] + 1j * z[:, 3]) * np.sqrt(DT / 2)
    dw2[:, 1, 0] = np.conj(dw2[:, 0, 1])
    m1 = (hm.hs_inner(dw1, k) ** 2).mean()
    m2 = (hm.hs_inner(dw2, k) ** 2).mean()
    assert abs(m1 - DT) <= mc_tolerance(DT)
    assert abs(m2 - DT) <= mc_tolerance(DT)


def test_paths_are_uncorrelated():
    """Streams with distinct path indices pass a cross-correlation test."""
    n = 50_000
    a = batch_normals(21, 0, 0, 0, n, 2)
    rho = np.corrcoef(a[:, 0], a[:, 1])[0, 1]
    assert abs(rho) <= 3.0 / np.sqrt(n)
    b = batch_normals(21, 0, 1, 0, n, 2)   # same paths, next step
    rho2 = np.corrcoef(a[:, 0], b[:, 0])[0, 1]
    assert abs(rho2) <= 3.0 / np.sqrt(n)


def test_vector_increaccording_moments():
    dv = batch_vector_increments(31, 0, 0, N_MC, 3, DT)
    assert abs(dv.mean()) <= 3.0 * np.sqrt(DT / (3 * N_MC))
    for i in range(3):
        assert abs(dv[:, i].var() - DT) <= mc_tolerance(DT)


def test_vector_stream_replay():
    s1 = NoiseStream(8, path_index=2)
    s2 = NoiseStream(8, path_index=2)
    assert np.array_equal(s1.vector_bm_increment(5, DT),
                          s2.vector_bm_increment(5, DT))


def test_invalid_dt_raises():
    s = NoiseStream(0)
    with pytest.raises(ValueError):
        s.hermitian_bm_increment(2, 0.0)
    with pytest.raises(ValueError):
        s.vector_bm_increment(3, -1.0)
    with pytest.raises(ValueError):
        batch_vector_increments(0, 0, 0, 1, 0, DT)


def test_small_dt_small_norm():
    dw = batch_hermitian_increments(41, 0, 0, 1000, 2, 1e-12)
    assert float(np.max(hm.hs_norm(dw))) < 1e-4


def test_hermitian_from_normals_shape_check():
    with pytest.raises(ValueError):
        hermitian_from_normals(np.zeros(5), 0.1)
