"""Kinetic Brownian motion on Hermitian matrices.

A simulation library for the matrix-valued kinetic Brownian motion, the
unitary frame transport that diagonalizes it, the autonomous eigenvalue-
velocity diffusion, spherical-projection dynamics, and the large-scale
homogenization to Dyson Brownian motion, together with the statistical
harnesses that verify the closed-form drifts, brackets, and the d >= 3
non-Markovianity of the eigenvalue pair at desk scale.

Entry points: the per-module simulators (``kinetic``, ``spectral``,
``lambda_a``, ``sphere``, ``homogenize``), the estimators in ``stats``,
the acceptance suite in ``acceptance``, and the ``kineticdyson`` command
line defined in ``cli``.
"""

from .errors import (
    DegenerateSpectrumError,
    GapFloorStop,
    JacobiConvergenceError,
    KineticDysonError,
    NumericalError,
)
from .hermitian import (
    conjugate_by,
    eig_hermitian,
    hermitian_basis,
    hs_inner,
    hs_norm,
    jacobi_eigh,
    min_gap,
    offdiag,
    offdiag_norm,
    project_diag,
    symmetrize,
)
from .kinetic import (
    KineticState,
    SimConfig,
    default_initial,
    kbm_step,
    simulate_kbm,
    simulate_kbm_ensemble,
)
from .lambda_a import (
    D2State,
    LambdaAState,
    d2_from_full,
    d2_step,
    lambda_a_step,
    simulate_d2_ensemble,
    simulate_lambda_a_ensemble,
)
from .noise import NoiseStream
from .records import EnsembleSummary, PathRecord
from .spectral import (
    SpectralState,
    frame_step,
    perturbed_a,
    phi,
    phi_d2,
    phi_perturbation_second_derivative,
    simulate_spectral_ensemble,
    u_dot,
)
from .sphere import (
    SkewProductState,
    SphereState,
    project,
    simulate_skew_ensemble,
    simulate_sphere_ensemble,
    skew_product_step,
    sphere_bm_step,
)
from .homogenize import (
    compare_to_dyson,
    dyson_reference,
    effective_diffusivity,
    greenkubo_sigma_sq,
    homogenize_ensemble,
    rescale,
    sigma_sq_closed_form,
)
from .stats import (
    drift_regression,
    ks_two_sample,
    nonmarkov_ab_test,
    realized_qv,
)

__version__ = "0.1.0"
