import math

import numpy as np
import pytest

from fdlab import mapping, quadrature
from fdlab.coords import CartPoint
from fdlab.errors import (
    EmptyDomainError,
    GridTooCoarseError,
    InsufficientSamplesError,
    InsufficientScalesError,
)
from fdlab.quadrature import (
    CylBox,
    ExclusionTube,
    box_counting,
    change_of_variables_check,
    divergence_fit,
    energy_Epq,
    integrate_Kp,
    integrate_Kp_schedule,
    preimage_components,
)

PI = math.pi
EPS_SCHEDULE = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]


# ---------------------------------------------------------------------------
# trend classification


def test_divergence_fit_constant():
    samples = [(e, 5.0 + 1e-6 * i) for i, e in enumerate(EPS_SCHEDULE)]
    fit = divergence_fit(samples)
    assert fit.model == "CONSTANT"
    assert fit.a == pytest.approx(5.0, rel=1e-5)


def test_divergence_fit_log():
    samples = [(e, 2.0 + 3.0 * math.log(1.0 / e)) for e in EPS_SCHEDULE]
    fit = divergence_fit(samples)
    assert fit.model == "LOG"
    assert fit.b == pytest.approx(3.0, rel=1e-6)
    assert fit.r2 > 0.999


def test_divergence_fit_power():
    samples = [(e, 1.0 + e**-0.5) for e in EPS_SCHEDULE]
    fit = divergence_fit(samples)
    assert fit.model == "POWER"
    assert fit.alpha == pytest.approx(0.5, abs=0.051)
    assert fit.r2 > 0.999


def test_divergence_fit_needs_samples():
    with pytest.raises(InsufficientSamplesError):
        divergence_fit([(1e-2, 1.0), (1e-3, 1.0), (1e-4, 1.0)])


# ---------------------------------------------------------------------------
# distortion integrals


def test_integrate_Kp_p_range():
    with pytest.raises(ValueError):
        integrate_Kp(0.0, n=1000)
    with pytest.raises(ValueError):
        integrate_Kp(1.2, n=1000)


def test_integrate_Kp_empty_domain():
    with pytest.raises(EmptyDomainError):
        integrate_Kp(0.3, domain=CylBox(r0=1.0, r1=0.5), n=1000)


def test_integrate_Kp_reproducible():
    a = integrate_Kp(0.3, n=10**5, seed=7)
    b = integrate_Kp(0.3, n=10**5, seed=7)
    assert a.value == b.value and a.stderr == b.stderr
    assert a.value > 0.0 and a.stderr > 0.0
    assert set(a.by_case) == {"INNER", "CONE", "OUTER"}
    assert sum(a.by_case.values()) == pytest.approx(a.value, rel=1e-12)


def test_integrate_Kp_monotone_in_p():
    res = integrate_Kp_schedule([0.2, 0.3, 0.4], [1e-3], n=10**5, seed=8)
    vals = [res[p][0].value for p in (0.2, 0.3, 0.4)]
    # K >= 1 pointwise and all powers share samples, so monotone exactly
    assert vals[0] < vals[1] < vals[2]


def test_integrate_Kp_monotone_in_eps():
    res = integrate_Kp_schedule([0.5], [1e-2, 1e-3, 1e-4], n=10**5, seed=9)[0.5]
    vals = [e.value for e in res]  # descending eps
    assert vals[0] < vals[1] < vals[2]


def test_energy_validation_and_growth():
    with pytest.raises(ValueError):
        energy_Epq(2.0, 0.25, n=1000)
    with pytest.raises(ValueError):
        energy_Epq(3.0, 0.0, n=1000)
    wide = energy_Epq(3.0, 0.25, tube=ExclusionTube(1e-2, 1e-2), n=10**5, seed=10)
    narrow = energy_Epq(3.0, 0.25, tube=ExclusionTube(1e-4, 1e-4), n=10**5, seed=10)
    assert math.isfinite(wide.value) and wide.value > 0.0
    # J^-q blows up on the degeneracy bands, so shrinking the tube adds mass
    assert narrow.value > wide.value


# ---------------------------------------------------------------------------
# preimage topology


def test_preimage_components_generic_ball():
    y = np.array([float(v) for v in mapping.eval_many(1.5, 2.0, 0.3)])
    assert preimage_components(y, 0.1, resolution=96) == 1


def test_preimage_components_half_line_ball():
    assert preimage_components((-0.5, 0.0, 0.0), 0.1, resolution=96) == 1


def test_preimage_components_control_map():
    def control(pts):
        out = pts.copy()
        out[:, 0] = pts[:, 0] ** 2
        return out

    count = preimage_components(
        (1.0, 0.0, 0.0),
        0.1,
        resolution=96,
        box=((-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0)),
        map_fn=control,
    )
    assert count == 2


def test_preimage_components_coarse_box():
    y = np.array([float(v) for v in mapping.eval_many(1.5, 2.0, 0.3)])
    # a box centered on a known preimage point but far smaller than the
    # preimage: occupied voxels must hit the box boundary
    x0 = np.array([1.5 * math.cos(2.0), 1.5 * math.sin(2.0), 0.3])
    tiny = tuple((c - 0.01, c + 0.01) for c in x0)
    with pytest.raises(GridTooCoarseError):
        preimage_components(y, 0.1, resolution=32, box=tiny, refine=False)


# ---------------------------------------------------------------------------
# box counting


SCALES = [0.2 / 2**i for i in range(9)]


def test_box_counting_validation():
    pts = np.zeros((2000, 3))
    with pytest.raises(InsufficientScalesError):
        box_counting(pts, [0.2, 0.1, 0.05])
    with pytest.raises(InsufficientScalesError):
        box_counting(pts, [0.2, 0.15, 0.1, 0.05])  # narrow span
    with pytest.raises(ValueError):
        box_counting(np.zeros((10, 3)), SCALES)


def test_box_counting_point_and_segment():
    assert box_counting(np.zeros((2000, 3)), SCALES) == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(20)
    t = rng.random(20000)
    seg = np.stack([t, 0.3 * t, np.zeros_like(t)], axis=-1)
    assert box_counting(seg, SCALES) == pytest.approx(1.0, abs=0.15)


def test_box_counting_circle_fiber():
    fib = mapping.fiber(CartPoint(0.0, 0.0, 0.0))
    dim = box_counting(fib.sample(5000), SCALES)
    assert 0.9 <= dim <= 1.1


# ---------------------------------------------------------------------------
# change of variables


def test_change_of_variables_generic_ball():
    y = np.array([float(v) for v in mapping.eval_many(1.5, 2.0, 0.3)])
    rep = change_of_variables_check(y, 0.05, n=2 * 10**5, seed=21)
    assert rep["pass"]
    assert rep["integral"] == pytest.approx(rep["ball_volume"], rel=0.05)


def test_change_of_variables_two_radii():
    y = np.array([float(v) for v in mapping.eval_many(0.8, -1.0, 0.4)])
    small = change_of_variables_check(y, 0.04, n=2 * 10**5, seed=22)
    large = change_of_variables_check(y, 0.08, n=2 * 10**5, seed=23)
    assert small["pass"] and large["pass"]
    # both track their own ball volumes, so the ratio is ~8
    assert large["integral"] / small["integral"] == pytest.approx(8.0, rel=0.1)
