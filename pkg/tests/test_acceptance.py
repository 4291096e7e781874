"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test prints the criterion's PASS/FAIL line (visible with pytest -s or
on failure) and asserts the pinned check from
:mod:`kineticdyson.acceptance`.  The whole suite is deterministic; seeds
live in the acceptance module.  Expect a few minutes of runtime, dominated
by the homogenization ensemble (criterion 9).
"""

from kineticdyson import acceptance


def _run(check):
    result = check()
    status = "PASS" if result.passed else "FAIL"
    print(f"[{status}] criterion {result.criterion} {result.name} "
          f"({result.seconds:.1f}s): {result.detail}")
    assert result.passed, f"criterion {result.criterion}: {result.detail}"


def test_criterion_01_diagonalization_fidelity():
    _run(acceptance.check_01_diagonalization_fidelity)


def test_criterion_02_pathwise_coupling():
    _run(acceptance.check_02_pathwise_coupling)


def test_criterion_03_d2_brackets():
    _run(acceptance.check_03_d2_brackets)


def test_criterion_04_d2_markov_control():
    _run(acceptance.check_04_d2_markov_control)


def test_criterion_05_d3_nonmarkov():
    _run(acceptance.check_05_d3_nonmarkov)


def test_criterion_06_perturbation_identity():
    _run(acceptance.check_06_perturbation_identity)


def test_criterion_07_spherical_laws():
    _run(acceptance.check_07_spherical_laws)


def test_criterion_08_effective_diffusivity():
    _run(acceptance.check_08_effective_diffusivity)


def test_criterion_09_homogenization():
    _run(acceptance.check_09_homogenization)


def test_criterion_10_no_collision_monitor():
    _run(acceptance.check_10_no_collision_monitor)


def test_criterion_11_determinism():
    _run(acceptance.check_11_determinism)
