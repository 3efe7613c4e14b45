"""Singularity-aware integration, trend fitting, and topology probes.

The distortion of the map blows up on {theta = 0} and {z = 0, r <= 1},
so integrals of K^p are taken over a cylindrical box minus an exclusion
tube around those bands. Sampling is stratified on a shared ladder of
band cutoffs, which makes estimates for nested tubes reuse the same
per-stratum samples: shrinking the tube only adds strata, so estimates
are sample-wise monotone and bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage

from . import mapping
from .coords import JacobianCase
from .errors import (
    EmptyDomainError,
    GridTooCoarseError,
    InsufficientSamplesError,
    InsufficientScalesError,
)


@dataclass(frozen=True)
class CylBox:
    """Cylindrical box r in [r0, r1], theta in (-T, T], z in [-Z, Z].

    Symmetric angle and height ranges keep the exclusion-band strata
    simple; the default covers the whole torus family up to level 1.
    """

    r0: float = 0.0
    r1: float = 2.0
    theta_max: float = math.pi
    z_max: float = 1.0

    def validate(self):
        if self.r1 <= self.r0 or self.theta_max <= 0 or self.z_max <= 0:
            raise EmptyDomainError(f"{self} has no volume")


@dataclass(frozen=True)
class ExclusionTube:
    """Excluded bands |theta| < eps_theta and {|z| < eps_z, r <= 1 + margin}."""

    eps_theta: float
    eps_z: float
    margin: float = 0.05


@dataclass
class IntegralEstimate:
    value: float
    stderr: float
    samples: int
    seed: int
    p: float
    tube: ExclusionTube
    domain: CylBox
    by_case: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# stratified sampler


def _ladder(top: float, eps_min: float, extra: Sequence[float]) -> list[float]:
    """Descending band cutoffs from `top` to eps_min through decades."""
    cuts = {top, eps_min}
    d = 1.0
    while d > eps_min:
        if d < top:
            cuts.add(d)
        d /= 10.0
    for e in extra:
        if eps_min <= e < top:
            cuts.add(e)
    return sorted(cuts, reverse=True)


@dataclass(frozen=True)
class _Cell:
    theta_lo: float
    theta_hi: float
    r_lo: float
    r_hi: float
    z_lo: float  # band in |z|; z_lo == -1 marks "full z range" (far cells)
    z_hi: float
    measure: float


def _build_cells(
    domain: CylBox, eps_theta: float, eps_z: float, margin: float,
    extra_eps: Sequence[float] = (),
) -> list[_Cell]:
    domain.validate()
    th_cuts = _ladder(domain.theta_max, eps_theta, extra_eps)
    z_cuts = _ladder(domain.z_max, eps_z, extra_eps)
    r_split = 1.0 + margin
    cells = []
    for t_hi, t_lo in zip(th_cuts[:-1], th_cuts[1:]):
        dth = 2.0 * (t_hi - t_lo)  # both signs of theta
        # far cells: r beyond the margin cylinder, full z range
        if domain.r1 > r_split:
            lo = max(domain.r0, r_split)
            meas = dth * (2.0 * domain.z_max) * 0.5 * (domain.r1**2 - lo**2)
            cells.append(_Cell(t_lo, t_hi, lo, domain.r1, -1.0, -1.0, meas))
        # near cells: r inside, |z| banded
        r_hi = min(domain.r1, r_split)
        if r_hi > domain.r0:
            rm = 0.5 * (r_hi**2 - domain.r0**2)
            for z_hi, z_lo in zip(z_cuts[:-1], z_cuts[1:]):
                meas = dth * (2.0 * (z_hi - z_lo)) * rm
                cells.append(_Cell(t_lo, t_hi, domain.r0, r_hi, z_lo, z_hi, meas))
    return cells


def _sample_cell(cell: _Cell, m: int, rng: np.random.Generator, z_max: float):
    ath = rng.uniform(cell.theta_lo, cell.theta_hi, m)
    th = ath * np.where(rng.random(m) < 0.5, -1.0, 1.0)
    r = np.sqrt(cell.r_lo**2 + rng.random(m) * (cell.r_hi**2 - cell.r_lo**2))
    if cell.z_lo < 0.0:
        z = rng.uniform(-z_max, z_max, m)
    else:
        az = rng.uniform(cell.z_lo, cell.z_hi, m)
        z = az * np.where(rng.random(m) < 0.5, -1.0, 1.0)
    return r, th, z


def _cell_outside(cell: _Cell, eps_theta: float, eps_z: float) -> bool:
    if cell.theta_lo < eps_theta:
        return False
    if cell.z_lo < 0.0:  # far cell, no z exclusion
        return True
    return cell.z_lo >= eps_z


def stratified_schedule(
    integrands: Callable[[np.ndarray, np.ndarray, np.ndarray], dict],
    domain: CylBox,
    eps_list: Sequence[float],
    n: int,
    seed: int,
    margin: float = 0.05,
    chunk: int = 2_000_000,
) -> dict:
    """Estimate cylindrical integrals outside each nested exclusion tube.

    `integrands` maps coordinate arrays to a dict name -> values; returns
    {name: {eps: (value, stderr, by_case)}}. All tubes share the same
    per-cell estimates; an estimate for tube eps sums the cells that lie
    entirely outside it.
    """
    eps_sorted = sorted(eps_list, reverse=True)
    eps_min = eps_sorted[-1]
    cells = _build_cells(domain, eps_min, eps_min, margin, extra_eps=eps_list)
    m = max(int(math.ceil(n / len(cells))), 16)
    ss = np.random.SeedSequence(seed)
    child_seeds = ss.spawn(len(cells))

    cell_stats = []  # per cell: {name: (mean*meas, var_of_mean*meas^2, case_sums)}
    for cell, cs in zip(cells, child_seeds):
        rng = np.random.default_rng(cs)
        stats = {}
        done = 0
        acc = {}
        while done < m:
            take = min(chunk, m - done)
            r, th, z = _sample_cell(cell, take, rng, domain.z_max)
            vals = integrands(r, th, z)
            case = _case_codes(r, z)
            for name, v in vals.items():
                a = acc.setdefault(name, [0.0, 0.0, np.zeros(3)])
                a[0] += float(np.sum(v))
                a[1] += float(np.sum(v * v))
                for ci in range(3):
                    a[2][ci] += float(np.sum(v[case == ci]))
            done += take
        for name, (s1, s2, csums) in acc.items():
            mean = s1 / m
            var = max(s2 / m - mean**2, 0.0) / m
            stats[name] = (
                mean * cell.measure,
                var * cell.measure**2,
                csums / m * cell.measure,
            )
        cell_stats.append(stats)

    names = list(cell_stats[0].keys())
    out = {name: {} for name in names}
    for eps in eps_sorted:
        included = [
            st
            for cell, st in zip(cells, cell_stats)
            if _cell_outside(cell, eps, eps)
        ]
        for name in names:
            val = sum(st[name][0] for st in included)
            var = sum(st[name][1] for st in included)
            csum = sum((st[name][2] for st in included), np.zeros(3))
            out[name][eps] = (val, math.sqrt(var), csum)
    return out


def _case_codes(r, z):
    az = np.abs(z)
    inner = (az <= r) & (r <= 1.0)
    cone = ~inner & (r <= 1.0) & (r <= az)
    return np.where(inner, 0, np.where(cone, 1, 2))


_CASE_NAMES = {0: JacobianCase.INNER.value, 1: JacobianCase.CONE.value, 2: JacobianCase.OUTER.value}


def _case_dict(csum: np.ndarray) -> dict:
    return {_CASE_NAMES[i]: float(csum[i]) for i in range(3)}


# ---------------------------------------------------------------------------
# distortion integrals and the neohookean energy


def _distortion_power_integrands(p_list: Sequence[float]):
    def fn(r, th, z):
        K = mapping.distortion_many(r, th, z)
        return {f"K^{p}": K**p for p in p_list}

    return fn


def integrate_Kp(
    p: float,
    domain: CylBox = CylBox(),
    tube: ExclusionTube = ExclusionTube(1e-4, 1e-4),
    n: int = 10**6,
    seed: int = 0,
) -> IntegralEstimate:
    """Stratified MC estimate of the distortion power integral off the tube."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p = {p} outside (0, 1]")
    res = stratified_schedule(
        _distortion_power_integrands([p]),
        domain,
        [min(tube.eps_theta, tube.eps_z)],
        n,
        seed,
        margin=tube.margin,
    )
    # note: asymmetric tubes reuse the finer cutoff for both bands
    eps = min(tube.eps_theta, tube.eps_z)
    val, err, csum = res[f"K^{p}"][eps]
    return IntegralEstimate(val, err, n, seed, p, tube, domain, _case_dict(csum))


def integrate_Kp_schedule(
    p_list: Sequence[float],
    eps_list: Sequence[float],
    domain: CylBox = CylBox(),
    n: int = 10**6,
    seed: int = 0,
    margin: float = 0.05,
) -> dict:
    """Shared-sample estimates for several powers over a tube schedule.

    Returns {p: [IntegralEstimate per eps, descending]}. All powers reuse
    the same distortion samples, so estimates are monotone in p.
    """
    res = stratified_schedule(
        _distortion_power_integrands(p_list), domain, eps_list, n, seed, margin
    )
    out = {}
    for p in p_list:
        series = []
        for eps in sorted(eps_list, reverse=True):
            val, err, csum = res[f"K^{p}"][eps]
            series.append(
                IntegralEstimate(
                    val, err, n, seed, p,
                    ExclusionTube(eps, eps, margin), domain, _case_dict(csum),
                )
            )
        out[p] = series
    return out


def energy_Epq(
    p: float,
    q: float,
    domain: CylBox = CylBox(),
    tube: ExclusionTube = ExclusionTube(1e-3, 1e-3),
    n: int = 10**6,
    seed: int = 0,
) -> IntegralEstimate:
    """MC estimate of the stored energy integral |Df|^p + J^-q off the tube."""
    if p < 3.0 or q <= 0.0:
        raise ValueError("energy needs p >= 3 and q > 0")

    def integrands(r, th, z):
        M = mapping.frame_differential_many(r, th, z)
        J = mapping.jacobian_many(r, th, z)
        return {"E": mapping.spectral_norm_many(M) ** p + J ** (-q)}

    eps = min(tube.eps_theta, tube.eps_z)
    res = stratified_schedule(integrands, domain, [eps], n, seed, tube.margin)
    val, err, csum = res["E"][eps]
    return IntegralEstimate(val, err, n, seed, p, tube, domain, _case_dict(csum))


# ---------------------------------------------------------------------------
# divergence trend fitting


@dataclass
class TrendFit:
    model: str  # CONSTANT | LOG | POWER
    a: float
    b: float
    r2: float
    alpha: Optional[float] = None


def _r2(y: np.ndarray, pred: np.ndarray) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - pred) ** 2))
    if ss_tot == 0.0:
        return 1.0
    return max(0.0, min(1.0, 1.0 - ss_res / ss_tot))


def divergence_fit(
    samples: Sequence[tuple[float, float]],
    stable_rate: float = 0.02,
    tail_eps: float = 1e-4,
) -> TrendFit:
    """Classify an integral-vs-exclusion trend as CONSTANT, LOG, or POWER.

    CONSTANT is declared when the tail (pairs with both eps strictly
    below `tail_eps`, or all successive pairs when the schedule never
    gets that small) changes by less than `stable_rate` per halving of
    eps. Otherwise the log and power models compete on r^2; a literal
    r^2 contest can never pick the constant model, hence the explicit
    stabilization rule.
    """
    if len(samples) < 4:
        raise InsufficientSamplesError(f"{len(samples)} samples < 4")
    srt = sorted(samples, key=lambda t: -t[0])
    eps = np.array([t[0] for t in srt], dtype=float)
    y = np.array([t[1] for t in srt], dtype=float)

    # stabilization test, expressed per eps-halving
    pairs = [
        (eps[i], eps[i + 1], y[i], y[i + 1])
        for i in range(len(eps) - 1)
        if eps[i] < tail_eps
    ]
    if not pairs:
        pairs = [(eps[i], eps[i + 1], y[i], y[i + 1]) for i in range(len(eps) - 1)]
    rates = [
        abs(y1 / y0 - 1.0) / math.log2(e0 / e1) if y0 != 0.0 else math.inf
        for e0, e1, y0, y1 in pairs
    ]
    if all(rate < stable_rate for rate in rates):
        a = float(y.mean())
        return TrendFit("CONSTANT", a, 0.0, _r2(y, np.full_like(y, a)))

    x = np.log(1.0 / eps)
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r2_log = _r2(y, A @ coef)

    best_pow = None
    for alpha in np.arange(0.05, 2.01, 0.05):
        Ap = np.stack([np.ones_like(eps), eps ** (-alpha)], axis=1)
        cp, *_ = np.linalg.lstsq(Ap, y, rcond=None)
        r2p = _r2(y, Ap @ cp)
        if best_pow is None or r2p > best_pow[0]:
            best_pow = (r2p, float(cp[0]), float(cp[1]), float(alpha))

    if best_pow[0] > r2_log + 1e-4:
        r2p, a, b, alpha = best_pow
        return TrendFit("POWER", a, b, r2p, alpha=alpha)
    return TrendFit("LOG", float(coef[0]), float(coef[1]), r2_log)


# ---------------------------------------------------------------------------
# preimage topology probes


@dataclass
class VoxelGrid:
    resolution: int
    box: tuple  # ((lo, hi),) * 3
    occupancy: np.ndarray


def _default_map(pts):
    hx, hy, hz = mapping.eval_cart_many(pts[:, 0], pts[:, 1], pts[:, 2])
    return np.stack([hx, hy, hz], axis=-1)


def enclosing_level(y_norm: float, pad: float = 0.4, scan_step: float = 0.05) -> float:
    """Smallest torus level whose surface stays farther from the origin
    than y_norm, found by scanning coarse level meshes (numerical
    properness bound, much tighter than the conservative c/4 rule)."""
    from .coords import slice_param

    s = np.linspace(0.0, 1.0, 64, endpoint=False)
    th = np.linspace(-math.pi, math.pi, 64, endpoint=False)
    c = scan_step
    last_hit = 0.0
    cmax = 4.0 * y_norm + 2.0
    while c <= cmax:
        pts = np.array([tuple(slice_param(c, 0.0, float(si))) for si in s])
        R = np.repeat(pts[:, 0], len(th))
        Z = np.repeat(pts[:, 2], len(th))
        T = np.tile(th, len(s))
        hx, hy, hz = mapping.eval_many(R, T, Z)
        if float(np.min(np.sqrt(hx**2 + hy**2 + hz**2))) <= y_norm:
            last_hit = c
        c += scan_step
    return last_hit + pad


def _occupancy(y, radius, box, resolution, mapper) -> np.ndarray:
    axes = [
        (np.arange(resolution) + 0.5) / resolution * (hi - lo) + lo
        for lo, hi in box
    ]
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    occ = np.zeros(len(pts), dtype=bool)
    for start in range(0, len(pts), 4_000_000):
        sl = slice(start, start + 4_000_000)
        img = mapper(pts[sl])
        occ[sl] = np.linalg.norm(img - y, axis=1) < radius
    return occ.reshape(X.shape)


def build_voxel_grid(
    y,
    radius: float,
    resolution: int = 128,
    box=None,
    map_fn=None,
) -> VoxelGrid:
    """Occupancy grid of the preimage of the ball B(y, radius).

    With no explicit box, the preimage is first enclosed conservatively
    via the level-set properness scan, then located with a coarse
    occupancy pass so the final grid spends its resolution on a tight
    bounding box instead of the whole conservative one.
    """
    y = np.asarray(y, dtype=float)
    mapper = map_fn or _default_map
    if box is None:
        c = enclosing_level(float(np.linalg.norm(y)) + radius)
        half_xy = 1.0 + c
        half_z = max(c, 0.5)
        wide = ((-half_xy, half_xy), (-half_xy, half_xy), (-half_z, half_z))
        coarse_res = 64
        coarse = _occupancy(y, radius, wide, coarse_res, mapper)
        hit = np.argwhere(coarse)
        if len(hit) == 0:
            box = wide  # thinner than the coarse grid; fall through as-is
        else:
            lo_idx = np.maximum(hit.min(axis=0) - 2, 0)
            hi_idx = np.minimum(hit.max(axis=0) + 3, coarse_res)
            box = [
                [
                    w[0] + (w[1] - w[0]) * lo_idx[ax] / coarse_res,
                    w[0] + (w[1] - w[0]) * hi_idx[ax] / coarse_res,
                ]
                for ax, w in enumerate(wide)
            ]
            # the coarse pass can miss tube sections thinner than its
            # voxels; grow any face the fine occupancy still touches
            for _ in range(12):
                occ = _occupancy(y, radius, box, resolution, mapper)
                touched = False
                for ax in range(3):
                    first = np.moveaxis(occ, ax, 0)[0].any()
                    last = np.moveaxis(occ, ax, 0)[-1].any()
                    step = 0.15 * (box[ax][1] - box[ax][0])
                    if first and box[ax][0] > wide[ax][0]:
                        box[ax][0] = max(box[ax][0] - step, wide[ax][0])
                        touched = True
                    if last and box[ax][1] < wide[ax][1]:
                        box[ax][1] = min(box[ax][1] + step, wide[ax][1])
                        touched = True
                if not touched:
                    return VoxelGrid(
                        resolution, tuple(tuple(b) for b in box), occ
                    )
            box = tuple(tuple(b) for b in box)
    occ = _occupancy(y, radius, box, resolution, mapper)
    return VoxelGrid(resolution, tuple(tuple(b) for b in box), occ)


def _count_components(y, radius, resolution, box, map_fn) -> int:
    grid = build_voxel_grid(y, radius, resolution, box, map_fn)
    occ = grid.occupancy
    boundary = (
        occ[0].any() or occ[-1].any()
        or occ[:, 0].any() or occ[:, -1].any()
        or occ[:, :, 0].any() or occ[:, :, -1].any()
    )
    if boundary:
        raise GridTooCoarseError("occupied voxels touch the bounding box")
    structure = ndimage.generate_binary_structure(3, 1)  # 6-connectivity
    _, count = ndimage.label(occ, structure=structure)
    return int(count)


def preimage_components(
    y,
    radius: float,
    resolution: int = 128,
    box=None,
    map_fn=None,
    refine: bool = True,
) -> int:
    """Number of 6-connected voxel components of the ball preimage.

    Voxel grids can split a connected set across sub-voxel necks, so
    with `refine` the count is re-taken at 1.5x and 2x resolution until
    two consecutive resolutions agree; the last count wins either way.
    """
    count = _count_components(y, radius, resolution, box, map_fn)
    if not refine or count == 1:
        return count
    for factor in (1.5, 2.0):
        finer = _count_components(
            y, radius, int(round(resolution * factor)), box, map_fn
        )
        if finer == count:
            return count
        count = finer
    return count


# ---------------------------------------------------------------------------
# box-counting dimension


def box_counting(points: np.ndarray, scales: Sequence[float]) -> float:
    """Box-counting dimension of a point cloud: LSQ slope of log N(d)."""
    points = np.asarray(points, dtype=float)
    scales = sorted(scales, reverse=True)
    if len(scales) < 4 or scales[0] / scales[-1] < 100.0:
        raise InsufficientScalesError("need >= 4 scales spanning >= 2 decades")
    if len(points) < 1000:
        raise ValueError("need at least 1000 points")
    origin = points.min(axis=0)
    counts = []
    for d in scales:
        idx = np.floor((points - origin) / d).astype(np.int64)
        counts.append(len(np.unique(idx, axis=0)))
    slope = np.polyfit(np.log(1.0 / np.array(scales)), np.log(counts), 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# change of variables


def change_of_variables_check(
    y,
    radius: float,
    n: int = 200_000,
    seed: int = 0,
    batches: int = 16,
    rel_tol: float = 0.01,
) -> dict:
    """Compare the Jacobian integral over a ball preimage with the ball volume."""
    y = np.asarray(y, dtype=float)
    # tight bounding box around the preimage via the voxel machinery;
    # a box linearized at the preimage point blows up when the preimage
    # sits near the degenerate set (inverse gradient is huge there)
    grid = build_voxel_grid(y, radius, resolution=64)
    box = [list(b) for b in grid.box]
    rng = np.random.default_rng(seed)
    for _ in range(6):
        lo = np.array([b[0] for b in box])
        hi = np.array([b[1] for b in box])
        pts = lo + (hi - lo) * rng.random((n, 3))
        img = _default_map(pts)
        inside = np.linalg.norm(img - y, axis=1) < radius
        # the preimage must stay clear of the sampling box boundary
        shell = np.any(
            (pts < lo + 0.02 * (hi - lo)) | (pts > hi - 0.02 * (hi - lo)),
            axis=1,
        )
        if np.any(inside & shell):
            for ax in range(3):
                pad = 0.2 * (box[ax][1] - box[ax][0])
                box[ax][0] -= pad
                box[ax][1] += pad
            continue
        r = np.hypot(pts[:, 0], pts[:, 1])
        th = np.arctan2(pts[:, 1], pts[:, 0])
        J = mapping.jacobian_many(r, th, pts[:, 2])
        vals = np.where(inside, J, 0.0)
        vol = float(np.prod(hi - lo))
        batch_ints = np.array(
            [b.mean() * vol for b in np.array_split(vals, batches)]
        )
        est = float(np.mean(batch_ints))
        stderr = float(np.std(batch_ints, ddof=1) / math.sqrt(batches))
        ball = 4.0 / 3.0 * math.pi * radius**3
        return {
            "integral": est,
            "ball_volume": ball,
            "stderr": stderr,
            "samples": n,
            "seed": seed,
            "pass": bool(abs(est - ball) <= 3.0 * stderr + rel_tol * ball),
        }
    raise GridTooCoarseError("could not bound the ball preimage")
