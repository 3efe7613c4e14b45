"""Acceptance checklist at full sample budgets.

One test per criterion; each prints a single PASS/FAIL line (visible with
pytest -s, or in the captured output on failure) and asserts the verdict.
The same checks back the `fdlab verify-all` command.
"""

import sys

from fdlab import verify


def _report(number: int, result: dict) -> None:
    status = "PASS" if result["pass"] else "FAIL"
    line = f"{status} criterion {number} ({result['name']}): {result['detail']}"
    print(line)
    sys.stderr.write(line + "\n")
    assert result["pass"], line


def test_criterion_01_interface_continuity():
    _report(1, verify.check_interface_continuity(n=10**6))


def test_criterion_02_derivative_correctness():
    _report(2, verify.check_derivative(n=10**4))


def test_criterion_03_jacobian_consistency():
    _report(3, verify.check_jacobian(n_det=10**4, n_pos=10**6))


def test_criterion_04_integrability_threshold():
    _report(4, verify.check_integrability(n=10**7))


def test_criterion_05_fiber_catalogue():
    _report(5, verify.check_fibers(samples=1000))


def test_criterion_06_inversion_roundtrip():
    _report(6, verify.check_inversion(n=10**4))


def test_criterion_07_monotonicity_h0():
    _report(7, verify.check_monotonicity(n_balls=100, resolution=128))


def test_criterion_08_wedge_inequality():
    _report(8, verify.check_wedge_inequality(n_matrices=10**5, n_points=10**4))


def test_criterion_09_pullback_norm_estimate():
    _report(9, verify.check_pullback_estimate(n=10**6))


def test_criterion_10_weak_commutation():
    _report(10, verify.check_commutation(n=10**6))


def test_criterion_11_change_of_variables():
    _report(11, verify.check_change_of_variables(n_balls=10, n=4 * 10**5))


def test_criterion_12_exponent_tables():
    _report(12, verify.check_tables())


def test_criterion_13_dimension_estimates():
    _report(13, verify.check_dimension(n_points=5000))


def test_criterion_14_meshes():
    _report(14, verify.check_meshes())
