"""The explicit monotone collapse map R^3 -> R^3 and its closed forms.

The map is defined piecewise in cylindrical coordinates: one polynomial
formula on the square-torus chart (including everything with r >= 1) and
a second one on the cut region r <= 1, r <= |z| where the level squares
are clipped by the axis. Every derived quantity here (differential in the
orthonormal cylindrical frame, Jacobian determinant, outer distortion,
fibers) is closed-form; a finite-difference oracle and a Newton inverter
are provided for cross-checking.

All heavy entry points have vectorized *_many variants operating on
coordinate arrays; the scalar API wraps them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .coords import (
    CartPoint,
    CylPoint,
    cart_to_cyl,
    cyl,
    cyl_to_cart,
    distance_to_singular_strata,
    jacobian_case,
    slice_param,
    wrap_angle,
    JacobianCase,
)
from .errors import (
    DegenerateJacobianError,
    InversionFailedError,
    OnNoninjectiveSetError,
    SingularPointError,
)

PI = math.pi

# derivative-based operations refuse points closer than this to a
# non-smooth stratum unless the caller overrides the margin
DEFAULT_SMOOTH_MARGIN = 1e-3


# ---------------------------------------------------------------------------
# evaluation


def eval_square_many(r, th, z):
    """Torus-chart formula (valid when r >= min(1, |z|))."""
    a = np.abs(th) / PI
    w = r - 1.0 + np.abs(r - 1.0) + np.abs(z)
    c = np.abs(r - 1.0) + np.abs(z)
    hx = a * w - c
    hy = a * z
    hz = (PI - np.abs(th)) * th / PI**2 * w
    return hx, hy, hz


def eval_cut_many(r, th, z):
    """Cut-region formula (valid when r <= 1 and r <= |z|)."""
    a = np.abs(th) / PI
    u = np.abs(z) - r + 1.0
    hx = (a * r - 1.0) * u
    hy = a * r * u * np.sign(z)
    hz = (PI - np.abs(th)) * th / PI**2 * r * u
    return hx, hy, hz


def eval_many(r, th, z):
    """Map coordinate arrays; returns (hx, hy, hz)."""
    r = np.asarray(r, dtype=float)
    th = np.asarray(th, dtype=float)
    z = np.asarray(z, dtype=float)
    cut = (r <= 1.0) & (r < np.abs(z))
    sx, sy, sz = eval_square_many(r, th, z)
    cx, cy, cz = eval_cut_many(r, th, z)
    return (
        np.where(cut, cx, sx),
        np.where(cut, cy, sy),
        np.where(cut, cz, sz),
    )


def eval_map(p: CylPoint) -> CartPoint:
    hx, hy, hz = eval_many(p.r, p.theta, p.z)
    return CartPoint(float(hx), float(hy), float(hz))


def eval_cart_many(x, y, z):
    """Map Cartesian coordinate arrays (convenience for Cartesian sampling)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    return eval_many(r, th, z)


# ---------------------------------------------------------------------------
# differentials


def _cyl_partials_many(r, th, z):
    """Piecewise-analytic matrix of partials [d_r h | d_th h | d_z h].

    Returns an (..., 3, 3) stack; rows are image x, y, z components.
    Uses sgn(0) = 0, so values on the strata are formal one-sided hybrids;
    callers enforce a smoothness margin.
    """
    r = np.asarray(r, dtype=float)
    th = np.asarray(th, dtype=float)
    z = np.asarray(z, dtype=float)
    a = np.abs(th) / PI
    st = np.sign(th)
    sz = np.sign(z)
    sr1 = np.sign(r - 1.0)
    b = (PI - np.abs(th)) * th / PI**2
    cut = (r <= 1.0) & (r < np.abs(z))

    # torus-chart partials
    w = r - 1.0 + np.abs(r - 1.0) + np.abs(z)
    D1 = np.empty(np.broadcast(r, th, z).shape + (3, 3))
    D1[..., 0, 0] = a + (a - 1.0) * sr1
    D1[..., 0, 1] = st / PI * w
    D1[..., 0, 2] = (a - 1.0) * sz
    D1[..., 1, 0] = 0.0
    D1[..., 1, 1] = st / PI * z
    D1[..., 1, 2] = a
    D1[..., 2, 0] = b * (sr1 + 1.0)
    D1[..., 2, 1] = (PI - 2.0 * np.abs(th)) / PI**2 * w
    D1[..., 2, 2] = b * sz

    # cut-region partials
    u = np.abs(z) - r + 1.0
    u1 = np.abs(z) - 2.0 * r + 1.0
    D2 = np.empty_like(D1)
    D2[..., 0, 0] = a * u1 + 1.0
    D2[..., 0, 1] = st / PI * r * u
    D2[..., 0, 2] = (a * r - 1.0) * sz
    D2[..., 1, 0] = a * u1 * sz
    D2[..., 1, 1] = st / PI * r * u * sz
    D2[..., 1, 2] = a * r
    D2[..., 2, 0] = b * u1
    D2[..., 2, 1] = (PI - 2.0 * np.abs(th)) / PI**2 * r * u
    D2[..., 2, 2] = b * r * sz

    return np.where(cut[..., None, None], D2, D1), cut


def frame_differential_many(r, th, z):
    """Differential in the orthonormal cylindrical frame.

    Columns are [d_r h | r^-1 d_theta h | d_z h]; det equals the Cartesian
    Jacobian determinant. In the cut region the middle column carries a
    common factor r analytically, so the frame stays finite on the axis.
    """
    D, cut = _cyl_partials_many(r, th, z)
    M = D.copy()
    r = np.asarray(r, dtype=float)
    th = np.asarray(th, dtype=float)
    z = np.asarray(z, dtype=float)
    rsafe = np.where(r > 0.0, r, 1.0)
    col = D[..., :, 1] / rsafe[..., None]
    # cut region: d_theta h carries a common factor r; drop it analytically
    # so the frame stays exact on the axis
    st = np.sign(th)
    u = np.abs(z) - r + 1.0
    cut_col = np.stack(
        [
            st / PI * u,
            st / PI * u * np.sign(z),
            (PI - 2.0 * np.abs(th)) / PI**2 * u,
        ],
        axis=-1,
    )
    M[..., :, 1] = np.where(cut[..., None], cut_col, col)
    return M


def degenerate_strata_distance(p: CylPoint) -> float:
    """Distance to the strata where sgn(0) = 0 breaks the matrix formulas.

    These are {theta = 0} and {z = 0}; on the remaining non-smooth strata
    the sign conventions yield valid one-sided values.
    """
    ath = abs(p.theta)
    d0 = p.r * abs(math.sin(p.theta)) if ath <= PI / 2 else p.r
    return min(d0, abs(p.z))


def frame_differential(
    p: CylPoint, margin: float = DEFAULT_SMOOTH_MARGIN
) -> np.ndarray:
    """3x3 frame differential at a smooth point.

    Raises SingularPointError within `margin` of a stratum on which the
    sign conventions do not give a one-sided matrix (theta = 0, z = 0).
    On the other non-smooth strata the returned matrix is the one-sided
    value selected by sgn.
    """
    if degenerate_strata_distance(p) <= margin:
        raise SingularPointError(f"{tuple(p)} within {margin} of a stratum")
    return frame_differential_many(p.r, p.theta, p.z)


def cart_differential_many(r, th, z):
    """Cartesian differential Dh as an (..., 3, 3) stack.

    Dh = M R^T where M is the frame differential and R = [e_r e_th e_z]
    is the rotation of the cylindrical frame at angle theta.
    """
    M = frame_differential_many(r, th, z)
    th = np.asarray(th, dtype=float)
    ct, st = np.cos(th), np.sin(th)
    zero = np.zeros_like(ct)
    one = np.ones_like(ct)
    # R columns: e_r, e_theta-hat, e_z
    R = np.stack(
        [
            np.stack([ct, -st, zero], axis=-1),
            np.stack([st, ct, zero], axis=-1),
            np.stack([zero, zero, one], axis=-1),
        ],
        axis=-2,
    )
    return M @ np.swapaxes(R, -1, -2)


# ---------------------------------------------------------------------------
# Jacobian and distortion


def jacobian_many(r, th, z):
    """Closed-form Cartesian Jacobian determinant of the map.

    Vanishes exactly on {theta = 0} and {z = 0, r <= 1}; positive a.e.
    """
    r = np.asarray(r, dtype=float)
    th = np.asarray(th, dtype=float)
    z = np.asarray(z, dtype=float)
    ath = np.abs(th)
    az = np.abs(z)
    inner = (az <= r) & (r <= 1.0)
    cone = ~inner & (r <= 1.0) & (r <= az)

    rsafe = np.where(r > 0.0, r, 1.0)
    j_inner = np.where(r > 0.0, az / rsafe, 0.0) * ath**2 / PI**3
    j_cone = (1.0 + az - r) ** 2 * ath**2 / PI**3
    j_outer = (
        ath
        / (PI**4 * rsafe)
        * (
            (4.0 * ath**2 - 4.0 * PI * ath + 2.0 * PI**2) * (r - 1.0)
            + (2.0 * ath**2 - 3.0 * PI * ath + 2.0 * PI**2) * az
        )
    )
    return np.where(inner, j_inner, np.where(cone, j_cone, j_outer))


def jacobian(p: CylPoint) -> float:
    return float(jacobian_many(p.r, p.theta, p.z))


def spectral_norm_many(M):
    """Largest singular value of an (..., 3, 3) stack, closed form.

    Largest eigenvalue of M^T M by the trigonometric method for symmetric
    3x3 matrices; fully vectorized.
    """
    S = np.swapaxes(M, -1, -2) @ M
    q = np.trace(S, axis1=-2, axis2=-1) / 3.0
    B = S - q[..., None, None] * np.eye(3)
    p2 = np.sum(B * B, axis=(-2, -1)) / 6.0
    p = np.sqrt(np.maximum(p2, 0.0))
    psafe = np.where(p > 0.0, p, 1.0)
    detB = np.linalg.det(B / psafe[..., None, None])
    arg = np.clip(detB / 2.0, -1.0, 1.0)
    phi = np.arccos(arg) / 3.0
    lam = np.where(p > 0.0, q + 2.0 * p * np.cos(phi), q)
    return np.sqrt(np.maximum(lam, 0.0))


def operator_norm(M: np.ndarray) -> float:
    return float(spectral_norm_many(np.asarray(M, dtype=float)))


def distortion_many(r, th, z):
    """Outer distortion K = |M|^3 / J at smooth points (no margin checks)."""
    M = frame_differential_many(r, th, z)
    J = jacobian_many(r, th, z)
    return spectral_norm_many(M) ** 3 / J


def distortion(p: CylPoint, margin: float = DEFAULT_SMOOTH_MARGIN) -> float:
    J = jacobian(p)
    if J == 0.0:
        raise DegenerateJacobianError(f"Jacobian vanishes at {tuple(p)}")
    M = frame_differential(p, margin=margin)
    return operator_norm(M) ** 3 / J


# ---------------------------------------------------------------------------
# finite-difference oracle


def fd_differential(p: CylPoint, step: float = 1e-5) -> np.ndarray:
    """Central-difference differential, assembled in the frame convention.

    Second-order differences of the map along the Cartesian axes of the
    domain, then rotated into the orthonormal cylindrical frame at p so
    the result is directly comparable with frame_differential.
    """
    if distance_to_singular_strata(p) <= step:
        raise SingularPointError(f"{tuple(p)} within {step} of a stratum")
    x0 = np.array(cyl_to_cart(p))
    D = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        hp = np.array(eval_map(cart_to_cyl(CartPoint(*(x0 + e)))))
        hm = np.array(eval_map(cart_to_cyl(CartPoint(*(x0 - e)))))
        D[:, j] = (hp - hm) / (2.0 * step)
    ct, st = math.cos(p.theta), math.sin(p.theta)
    R = np.array([[ct, -st, 0.0], [st, ct, 0.0], [0.0, 0.0, 1.0]])
    return D @ R


# ---------------------------------------------------------------------------
# inversion


def _on_noninjective_halfline(y: CartPoint) -> bool:
    return y.y == 0.0 and y.z == 0.0 and y.x <= 0.0


def invert(
    y: CartPoint,
    tol: float = 1e-10,
    seed: int = 0,
    max_iter: int = 60,
    restarts: int = 8,
) -> CylPoint:
    """Numerically invert the map at a generic target.

    Damped Newton on the cylindrical partials, seeded from a coarse grid
    scan sized from the target norm (properness bound), with `restarts`
    randomized re-seeds before giving up.
    """
    if _on_noninjective_halfline(y):
        raise OnNoninjectiveSetError(f"{tuple(y)} on the collapsed half-line")
    ynorm = math.sqrt(y.x**2 + y.y**2 + y.z**2)
    cmax = 4.0 * ynorm + 1.0
    target = np.array(y, dtype=float)

    rng = np.random.default_rng(seed)
    seed_pt = _grid_seed(target, cmax)
    for attempt in range(restarts + 1):
        if attempt == 0:
            start = seed_pt
        else:
            jitter = rng.normal(scale=0.15, size=3)
            start = (
                max(seed_pt[0] * (1.0 + jitter[0]), 1e-3),
                seed_pt[1] + jitter[1],
                seed_pt[2] + jitter[2],
            )
        sol = _newton(target, start, tol, max_iter)
        if sol is None:
            # pure Newton stalls when the preimage sits near the
            # degenerate set (targets close to the collapsed half-line);
            # Levenberg-Marquardt damping gets through
            sol = _levenberg(target, start, tol)
        if sol is not None:
            return sol
    raise InversionFailedError(f"no preimage of {tuple(y)} at tol {tol}")


def _grid_seed(target: np.ndarray, cmax: float) -> tuple[float, float, float]:
    nr, nth, nz = 24, 32, 25
    rr = np.linspace(1e-3, 1.0 + cmax, nr)
    tt = np.linspace(-PI + 1e-9, PI, nth)
    zz = np.linspace(-cmax, cmax, nz)
    R, T, Z = np.meshgrid(rr, tt, zz, indexing="ij")
    hx, hy, hz = eval_many(R, T, Z)
    res = (hx - target[0]) ** 2 + (hy - target[1]) ** 2 + (hz - target[2]) ** 2
    i = np.unravel_index(np.argmin(res), res.shape)
    return float(R[i]), float(T[i]), float(Z[i])


def _newton(target, start, tol, max_iter) -> Optional[CylPoint]:
    v = np.array(start, dtype=float)

    def residual(vv):
        hx, hy, hz = eval_many(vv[0], vv[1], vv[2])
        return np.array([float(hx), float(hy), float(hz)]) - target

    F = residual(v)
    fn = np.linalg.norm(F)
    for _ in range(max_iter):
        if fn < tol:
            return cyl(v[0], v[1], v[2])
        D, _ = _cyl_partials_many(v[0], v[1], v[2])
        try:
            step = np.linalg.solve(D, -F)
        except np.linalg.LinAlgError:
            return None
        # damped update with radius clamp and angle wrap
        lam = 1.0
        for _ in range(20):
            vn = v + lam * step
            vn[0] = max(vn[0], 0.0)
            vn[1] = float(wrap_angle(vn[1]))
            Fn = residual(vn)
            fnn = np.linalg.norm(Fn)
            if fnn < fn:
                v, F, fn = vn, Fn, fnn
                break
            lam *= 0.5
        else:
            return None
    if fn < tol:
        return cyl(v[0], v[1], v[2])
    return None


def _levenberg(target, start, tol) -> Optional[CylPoint]:
    from scipy.optimize import least_squares

    def canon(vv):
        return max(float(vv[0]), 1e-12), float(wrap_angle(vv[1])), float(vv[2])

    def fun(vv):
        r, th, z = canon(vv)
        hx, hy, hz = eval_many(r, th, z)
        return np.array([float(hx), float(hy), float(hz)]) - target

    def jac(vv):
        r, th, z = canon(vv)
        D, _ = _cyl_partials_many(r, th, z)
        return np.asarray(D, dtype=float)

    sol = least_squares(
        fun,
        np.array(start, dtype=float),
        jac=jac,
        xtol=3e-16,
        ftol=3e-16,
        gtol=3e-16,
        max_nfev=500,
    )
    r, th, z = canon(sol.x)
    p = cyl(r if r > 1e-12 else 0.0, th, z)
    hx, hy, hz = eval_many(p.r, p.theta, p.z)
    res = math.hypot(
        float(hx) - target[0],
        math.hypot(float(hy) - target[1], float(hz) - target[2]),
    )
    return p if res < tol else None


# ---------------------------------------------------------------------------
# fibers


class FiberKind(Enum):
    POINT = "POINT"
    CIRCLE = "CIRCLE"
    FIGURE_EIGHT = "FIGURE_EIGHT"
    ARC = "ARC"


@dataclass
class Fiber:
    """A classified preimage of a single target point.

    Each component is a parametrization [0, 1] -> CylPoint accepting
    scalars or arrays of parameters (arrays return (n, 3) coordinate
    arrays in cylindrical coordinates).
    """

    kind: FiberKind
    components: list = field(default_factory=list)
    wedge: Optional[CartPoint] = None
    target: Optional[CartPoint] = None

    def sample(self, n: int = 256) -> np.ndarray:
        """Cartesian point cloud over all components, (m, 3)."""
        closed = self.kind in (FiberKind.CIRCLE, FiberKind.FIGURE_EIGHT)
        s = np.linspace(0.0, 1.0, n, endpoint=not closed)
        pts = []
        for comp in self.components:
            r, th, z = comp(s)
            pts.append(np.stack([r * np.cos(th), r * np.sin(th), z], axis=-1))
        return np.concatenate(pts, axis=0)


def _ring(radius: float):
    def param(s):
        s = np.asarray(s, dtype=float)
        th = wrap_angle(-PI + 2.0 * PI * s)
        return (np.full_like(th, radius), th, np.zeros_like(th))

    return param


def _slice_curve(level: float):
    def param(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        pts = np.array([tuple(slice_param(level, 0.0, float(si))) for si in s])
        return pts[:, 0], pts[:, 1], pts[:, 2]

    return param


def _constant(p: CylPoint):
    def param(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return (
            np.full_like(s, p.r),
            np.full_like(s, p.theta),
            np.full_like(s, p.z),
        )

    return param


def fiber(y: CartPoint, tol: float = 1e-10, seed: int = 0) -> Fiber:
    """Classify and parametrize the preimage of y.

    The looped fibers live over the half-line {-t e_x : t >= 0}: a round
    circle at t = 0, figure-eights for 0 < t < 1, the level-1 slice circle
    at t = 1, and axis-to-axis arcs for t > 1. All other targets have
    singleton fibers found by Newton inversion.
    """
    if _on_noninjective_halfline(y):
        t = -y.x
        if t == 0.0:
            return Fiber(FiberKind.CIRCLE, [_ring(1.0)], target=y)
        if t < 1.0:
            return Fiber(
                FiberKind.FIGURE_EIGHT,
                [_ring(1.0 - t), _slice_curve(t)],
                wedge=CartPoint(1.0 - t, 0.0, 0.0),
                target=y,
            )
        if t == 1.0:
            return Fiber(FiberKind.CIRCLE, [_slice_curve(1.0)], target=y)
        return Fiber(FiberKind.ARC, [_slice_curve(t)], target=y)
    x = invert(y, tol=tol, seed=seed)
    return Fiber(FiberKind.POINT, [_constant(x)], target=y)


# ---------------------------------------------------------------------------
# misc helpers for verification code


def strata_distance_many(r, th, z):
    """Vectorized distance to the non-smooth strata (see coords)."""
    r = np.asarray(r, dtype=float)
    th = np.asarray(th, dtype=float)
    z = np.asarray(z, dtype=float)
    ath = np.abs(th)
    sin_d = r * np.abs(np.sin(th))
    d0 = np.where(ath <= PI / 2, sin_d, r)
    dpi = np.where(ath >= PI / 2, sin_d, r)
    az = np.abs(z)
    t = np.clip((r + az) / 2.0, 0.0, 1.0)
    dcone = np.hypot(r - t, az - t)
    return np.minimum.reduce([d0, dpi, az, np.abs(r - 1.0), dcone])
