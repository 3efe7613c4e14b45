import math

import numpy as np
import pytest

from fdlab import exterior, mapping
from fdlab.errors import EmptyDomainError, SingularMatrixError
from fdlab.exterior import (
    KCovector,
    bump_form,
    check_wedge_inequality,
    check_wedge_inequality_many,
    constant_form,
    hodge_star,
    mc_norm,
    pullback_at,
    pushforward_at,
    verify_commutation,
    verify_pullback_estimate,
    wedge,
    wedge_power,
)

PI = math.pi


# ---------------------------------------------------------------------------
# wedge powers


def test_wedge_power_sizes_and_identity():
    eye = np.eye(3)
    assert wedge_power(eye, 0).shape == (1, 1)
    assert np.array_equal(wedge_power(eye, 1), eye)
    assert np.array_equal(wedge_power(eye, 2), eye)
    assert wedge_power(eye, 3)[0, 0] == 1.0
    with pytest.raises(ValueError):
        wedge_power(eye, 4)


def test_wedge_power_diagonal():
    A = np.diag([2.0, 3.0, 5.0])
    # lexicographic pairs (01, 02, 12) pick up products of the entries
    assert np.allclose(wedge_power(A, 2), np.diag([6.0, 10.0, 15.0]))
    assert wedge_power(A, 3)[0, 0] == pytest.approx(30.0)


def test_wedge_power_functoriality():
    rng = np.random.default_rng(10)
    A = rng.standard_normal((10**4, 3, 3))
    B = rng.standard_normal((10**4, 3, 3))
    for k in (2, 3):
        lhs = wedge_power(A @ B, k)
        rhs = wedge_power(A, k) @ wedge_power(B, k)
        scale = np.abs(rhs).max(axis=(-2, -1), keepdims=True) + 1.0
        assert np.max(np.abs(lhs - rhs) / scale) < 1e-10


def test_sylvester_franke():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((2000, 3, 3))
    # det of the second wedge power equals det(A)^2 in dimension 3
    lhs = np.linalg.det(wedge_power(A, 2))
    rhs = np.linalg.det(A) ** 2
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-12)


# ---------------------------------------------------------------------------
# hodge star and wedge products


def test_hodge_star_examples():
    dx = KCovector(1, [1, 0, 0])
    dydz = hodge_star(dx)
    assert dydz.k == 2
    assert np.array_equal(dydz.coeffs, [0, 0, 1])  # dy^dz
    dxdy = KCovector(2, [1, 0, 0])
    assert np.array_equal(hodge_star(dxdy).coeffs, [0, 0, 1])  # dz
    one = KCovector(0, [1])
    assert np.array_equal(hodge_star(one).coeffs, [1])


def test_hodge_star_involution():
    rng = np.random.default_rng(12)
    for k in range(4):
        v = KCovector(k, rng.standard_normal(exterior.DIMS[k]))
        w = hodge_star(hodge_star(v))
        assert w.k == k
        # star-star = identity in dimension 3 (k(3-k) is always even)
        assert np.allclose(w.coeffs, v.coeffs, atol=1e-15)


def test_wedge_product_examples():
    dx = KCovector(1, [1, 0, 0])
    dy = KCovector(1, [0, 1, 0])
    dz = KCovector(1, [0, 0, 1])
    assert np.array_equal(wedge(dx, dy).coeffs, [1, 0, 0])  # dx^dy
    assert np.array_equal(wedge(dy, dx).coeffs, [-1, 0, 0])
    assert np.array_equal(wedge(dx, dx).coeffs, [0, 0, 0])
    top = wedge(wedge(dx, dy), dz)
    assert top.k == 3 and top.coeffs[0] == 1.0
    with pytest.raises(ValueError):
        wedge(top, dx)


# ---------------------------------------------------------------------------
# pullback / pushforward


def test_pullback_pushforward_inverse():
    rng = np.random.default_rng(13)
    for k in (1, 2, 3):
        for _ in range(50):
            M = rng.standard_normal((3, 3))
            if np.linalg.det(M) <= 0.1:
                continue
            w = KCovector(k, rng.standard_normal(exterior.DIMS[k]))
            back = pushforward_at(M, pullback_at(M, w))
            assert np.allclose(back.coeffs, w.coeffs, rtol=1e-10, atol=1e-10)


def test_pushforward_singular_raises():
    with pytest.raises(SingularMatrixError):
        pushforward_at(np.zeros((3, 3)), KCovector(1, [1, 0, 0]))
    # negative determinant also rejected
    with pytest.raises(SingularMatrixError):
        pushforward_at(np.diag([-1.0, 1.0, 1.0]), KCovector(1, [1, 0, 0]))


def test_pullback_scales_top_form_by_det():
    rng = np.random.default_rng(14)
    M = rng.standard_normal((3, 3))
    vol = KCovector(3, [1.0])
    assert pullback_at(M, vol).coeffs[0] == pytest.approx(np.linalg.det(M), rel=1e-12)


# ---------------------------------------------------------------------------
# wedge inequality


def test_check_wedge_inequality_examples():
    assert check_wedge_inequality(np.eye(3), 1)
    assert check_wedge_inequality(np.eye(3), 2)
    # diag(2,1,1), k=1: lhs = |A^-1| = 1 <= |A|^2/det = 4/2
    assert check_wedge_inequality(np.diag([2.0, 1.0, 1.0]), 1)
    with pytest.raises(SingularMatrixError):
        check_wedge_inequality(np.diag([-1.0, 1.0, 1.0]), 1)


def test_check_wedge_inequality_random_and_on_map():
    rng = np.random.default_rng(15)
    A = rng.standard_normal((5000, 3, 3))
    det = np.linalg.det(A)
    A[det < 0] = A[det < 0][:, ::-1, :]
    A = A[np.abs(np.linalg.det(A)) > 1e-12]
    for k in (1, 2):
        assert np.all(check_wedge_inequality_many(A, k))
    r = rng.uniform(0.05, 2.0, 2000)
    th = rng.uniform(-PI, PI, 2000)
    z = rng.uniform(-1.0, 1.0, 2000)
    keep = mapping.strata_distance_many(r, th, z) > 0.05
    D = mapping.cart_differential_many(r[keep], th[keep], z[keep])
    for k in (1, 2):
        assert np.all(check_wedge_inequality_many(D, k))


# ---------------------------------------------------------------------------
# Monte Carlo norms


def test_mc_norm_constant_form_exact():
    form = constant_form(1, [2.0, 0.0, 0.0])
    box = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
    for p in (1.0, 2.0, 3.0):
        est = mc_norm(form, p, box, n=4000, seed=0)
        assert est.value == pytest.approx(2.0, rel=1e-12)
    sup = mc_norm(form, math.inf, box, n=4000, seed=0)
    assert sup.value == pytest.approx(2.0) and sup.stderr == 0.0


def test_mc_norm_linear_form():
    # |x dx|_1 over the unit cube is the mean of x, i.e. 1/2
    form = exterior.FormField(1, lambda pts: np.stack(
        [pts[:, 0], np.zeros(len(pts)), np.zeros(len(pts))], axis=-1
    ))
    box = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
    est = mc_norm(form, 1.0, box, n=10**5, seed=1)
    assert abs(est.value - 0.5) <= 3.0 * est.stderr + 1e-3
    assert est.stderr > 0.0


def test_mc_norm_empty_box():
    form = constant_form(1, [1.0, 0.0, 0.0])
    with pytest.raises(EmptyDomainError):
        mc_norm(form, 2.0, ((0.0, 0.0), (0.0, 1.0), (0.0, 1.0)), n=100)


def test_bump_form_differential_matches_fd():
    box = ((-1.0, 1.0), (-0.5, 0.5), (-0.8, 0.8))
    form = bump_form(1, box, comp_index=1)
    rng = np.random.default_rng(16)
    pts = rng.uniform(-0.4, 0.4, (200, 3))
    h = 1e-6
    # FD exterior derivative of B dy: dB/dx dx^dy - dB/dz dy^dz
    def B(q):
        return form(q)[:, 1]

    dx = (B(pts + [h, 0, 0]) - B(pts - [h, 0, 0])) / (2 * h)
    dz = (B(pts + [0, 0, h]) - B(pts - [0, 0, h])) / (2 * h)
    got = form.differential(pts)
    assert np.allclose(got[:, 0], dx, atol=1e-6)
    assert np.allclose(got[:, 1], 0.0, atol=1e-12)
    assert np.allclose(got[:, 2], -dz, atol=1e-6)


# ---------------------------------------------------------------------------
# transported-form checks


TRUNCATED = ((0.6, 2.0), (0.2, PI), (0.1, 1.0))
IMAGE_BOX = ((-4.0, 3.0), (-3.0, 3.0), (-2.0, 2.0))


def test_pullback_estimate_zero_form_trivial():
    zero = exterior.FormField(1, lambda pts: np.zeros((len(pts), 3)))
    rep = verify_pullback_estimate(zero, 3.0, 1.0, 1, TRUNCATED, n=2 * 10**4)
    assert rep["lhs"] == 0.0
    assert rep["pass"]


def test_pullback_estimate_bump_config():
    omega = bump_form(1, IMAGE_BOX)
    rep = verify_pullback_estimate(omega, 3.0, 1.0, 1, TRUNCATED, n=2 * 10**5, seed=2)
    assert rep["r"] == pytest.approx(3.0 / (1 + 1.0))
    assert rep["lhs"] <= rep["rhs"] + 3.0 * (rep["stderr_lhs"] + rep["stderr_rhs"])
    assert rep["pass"]


def test_pullback_estimate_degree_mismatch():
    omega = bump_form(2, IMAGE_BOX)
    with pytest.raises(ValueError):
        verify_pullback_estimate(omega, 3.0, 1.0, 1, TRUNCATED, n=100)


def test_commutation_zero_form_exact():
    box = ((-0.9, 0.9), (-0.9, 0.9), (-0.5, 0.5))
    omega = bump_form(1, box, scale=0.0)
    eta = bump_form(1, IMAGE_BOX)
    rep = verify_commutation(omega, eta, n=10**4, seed=3)
    assert rep["residual"] == 0.0
    assert rep["pass"]


def test_commutation_identity_map_control():
    # with f = id the statement is Stokes on a compactly supported product
    box = ((-0.9, 0.9), (-0.9, 0.9), (-0.5, 0.5))
    for k in (1, 2):
        omega = bump_form(k, box)
        eta = bump_form(2 - k, ((-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0)))
        rep = verify_commutation(
            omega, eta, n=4 * 10**5, seed=4 + k, map_fn=exterior._map_identity
        )
        assert abs(rep["residual"]) <= 3.0 * rep["stderr"]


def test_commutation_through_map():
    box = ((-1.2, 0.4), (-0.8, 0.8), (-0.6, 0.6))
    omega = bump_form(1, box)
    eta = bump_form(1, IMAGE_BOX, comp_index=1)
    rep = verify_commutation(omega, eta, n=4 * 10**5, seed=6)
    assert rep["pass"]


def test_commutation_requires_support_and_degrees():
    eta = bump_form(1, IMAGE_BOX)
    no_support = constant_form(1, [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        verify_commutation(no_support, eta, n=100)
    box = ((-0.5, 0.5),) * 3
    with pytest.raises(ValueError):
        verify_commutation(bump_form(1, box), bump_form(2, IMAGE_BOX), n=100)
