"""Cylindrical/Cartesian conversions and the square-torus level geometry.

Points live in cylindrical coordinates (r, theta, z) with r >= 0 and
theta in (-pi, pi]; on the axis r = 0 the angle is canonicalized to 0.
The level sets {|r-1| + |z| = c} are square tori for 0 < c < 1 and
sphere-like for c > 1 (clipped at the axis).
"""

from __future__ import annotations

import math
from enum import Enum
from typing import NamedTuple

import numpy as np


class CylPoint(NamedTuple):
    r: float
    theta: float
    z: float


class CartPoint(NamedTuple):
    x: float
    y: float
    z: float


class Region(Enum):
    SQUARE = "SQUARE"
    CUT = "CUT"


class JacobianCase(Enum):
    INNER = "INNER"
    CONE = "CONE"
    OUTER = "OUTER"


def wrap_angle(theta):
    """Reduce an angle into the branch (-pi, pi]. Works on arrays."""
    w = theta - 2.0 * math.pi * np.floor((theta + math.pi) / (2.0 * math.pi))
    # floor maps pi to -pi; put it back on the closed end of the branch
    return np.where(w <= -math.pi, math.pi, w)


def cyl(r: float, theta: float, z: float) -> CylPoint:
    """Build a canonical CylPoint (angle wrapped, axis angle zeroed)."""
    if r < 0:
        raise ValueError(f"negative radius {r}")
    if r == 0.0:
        return CylPoint(0.0, 0.0, float(z))
    return CylPoint(float(r), float(wrap_angle(theta)), float(z))


def cyl_to_cart(p: CylPoint) -> CartPoint:
    r, th, z = p
    return CartPoint(r * math.cos(th), r * math.sin(th), z)


def cart_to_cyl(p: CartPoint) -> CylPoint:
    x, y, z = p
    r = math.hypot(x, y)
    if r == 0.0:
        return CylPoint(0.0, 0.0, z)
    return CylPoint(r, math.atan2(y, x), z)


def torus_level(p: CylPoint) -> float:
    """c = |r-1| + |z|; zero exactly on the unit circle {r=1, z=0}."""
    return abs(p.r - 1.0) + abs(p.z)


def classify_region(p: CylPoint) -> Region:
    """CUT iff r <= 1 and r < |z|; the interface r = |z| goes to SQUARE."""
    if p.r <= 1.0 and p.r < abs(p.z):
        return Region.CUT
    return Region.SQUARE


def jacobian_case(p: CylPoint) -> JacobianCase:
    """Closed-form Jacobian case, tie-broken INNER < CONE < OUTER."""
    r, _, z = p
    if abs(z) <= r <= 1.0:
        return JacobianCase.INNER
    if r <= min(1.0, abs(z)):
        return JacobianCase.CONE
    return JacobianCase.OUTER


def _square_path(c: float, u: float) -> tuple[float, float]:
    """Point on the diamond |x| + |y| = c in the (r-1, z) chart.

    u in [0, 4), counterclockwise, u = 0 at the outer corner (c, 0).
    """
    u = u % 4.0
    if u < 1.0:
        return c * (1.0 - u), c * u
    if u < 2.0:
        return -c * (u - 1.0), c * (2.0 - u)
    if u < 3.0:
        return -c * (3.0 - u), -c * (u - 2.0)
    return c * (u - 3.0), -c * (4.0 - u)


def slice_param(c: float, theta: float, s: float) -> CylPoint:
    """Trace the level-c cross-section in the half-plane of angle theta.

    For c <= 1 this is the full square, counterclockwise in the (r-1, z)
    chart with s = 0 at the outer corner (1+c, theta, 0). For c > 1 the
    square is clipped at r = 0 and traced as an arc with s = 0 and s = 1
    at the lower/upper clip points (0, theta, -(c-1)) and (0, theta, c-1);
    the outer corner sits at s = 1/2.
    """
    if c < 0:
        raise ValueError(f"negative level {c}")
    if c == 0.0:
        return cyl(1.0, theta, 0.0)
    if c <= 1.0:
        x, z = _square_path(c, 4.0 * s)
        return cyl(x + 1.0, theta, z)
    # clipped arc; pin the endpoints exactly on the axis
    if s == 0.0:
        return cyl(0.0, theta, -(c - 1.0))
    if s == 1.0:
        return cyl(0.0, theta, c - 1.0)
    u0 = 3.0 - 1.0 / c
    u = u0 + s * (2.0 + 2.0 / c)
    x, z = _square_path(c, u)
    return cyl(max(x + 1.0, 0.0), theta, z)


def distance_to_singular_strata(p: CylPoint) -> float:
    """Distance from p to the union of non-smooth strata of the map.

    Strata: half-planes {theta = 0} and {theta = pi}, plane {z = 0},
    cylinder {r = 1}, and the cone {r = |z|, r <= 1}.
    """
    r, th, z = p
    ath = abs(th)
    # half-plane {theta = 0} = {y = 0, x >= 0}
    d0 = r * abs(math.sin(th)) if ath <= math.pi / 2 else r
    # half-plane {theta = pi} = {y = 0, x <= 0}
    dpi = r * abs(math.sin(th)) if ath >= math.pi / 2 else r
    dz = abs(z)
    dcyl = abs(r - 1.0)
    dcone = _dist_to_cone_2d(r, abs(z))
    return min(d0, dpi, dz, dcyl, dcone)


def _dist_to_cone_2d(r: float, az: float) -> float:
    """2D distance in the (r, |z|) chart to the segment from (0,0) to (1,1)."""
    # projection onto the unit-slope segment
    t = (r + az) / 2.0
    t = min(max(t, 0.0), 1.0)
    return math.hypot(r - t, az - t)
