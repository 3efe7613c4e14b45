"""The acceptance checklist: every verification the CLI and tests share.

Each check_* function returns a plain dict with at least `name`, `pass`,
and a human-readable `detail`; `run_all` strings them together into a
deterministic report. The `scale` knob shrinks sample counts for quick
runs; scale = 1 is the full budget used for acceptance.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import exterior, mapping, mesh, quadrature, thresholds
from .coords import CartPoint, CylPoint, cyl, cyl_to_cart
from .errors import FdlabError
from .mapping import FiberKind

_PI = math.pi


def _box_samples(n: int, rng: np.random.Generator, min_strata: float = 0.0):
    """Random cylindrical points in the default box, optionally kept at a
    minimum distance from the non-smooth strata."""
    out_r, out_t, out_z = [], [], []
    have = 0
    while have < n:
        m = max(2 * (n - have), 1024)
        r = rng.uniform(0.0, 2.0, m)
        th = rng.uniform(-_PI, _PI, m)
        z = rng.uniform(-1.0, 1.0, m)
        if min_strata > 0.0:
            keep = mapping.strata_distance_many(r, th, z) > min_strata
            r, th, z = r[keep], th[keep], z[keep]
        out_r.append(r)
        out_t.append(th)
        out_z.append(z)
        have += len(r)
    r = np.concatenate(out_r)[:n]
    th = np.concatenate(out_t)[:n]
    z = np.concatenate(out_z)[:n]
    return r, th, z


def check_interface_continuity(n: int = 10**6, seed: int = 0) -> dict:
    """Criterion 1: both formulas agree on the cone interface r = |z| <= 1."""
    import time

    rng = np.random.default_rng(seed)
    r = rng.uniform(0.0, 1.0, n)
    th = rng.uniform(-_PI, _PI, n)
    z = r * np.where(rng.random(n) < 0.5, -1.0, 1.0)
    t0 = time.perf_counter()
    a = np.stack(mapping.eval_square_many(r, th, z), axis=-1)
    b = np.stack(mapping.eval_cut_many(r, th, z), axis=-1)
    elapsed = time.perf_counter() - t0
    gap = float(np.max(np.abs(a - b)))
    ok = gap < 1e-12 and elapsed < 10.0
    return {
        "name": "interface_continuity",
        "pass": bool(ok),
        "max_gap": gap,
        "samples": n,
        "runtime_limit_s": 10.0,
        "detail": f"max |h1 - h2| on r=|z|<=1: {gap:.3e} over {n} points",
    }


def check_derivative(n: int = 10**4, seed: int = 0) -> dict:
    """Criterion 2: analytic frame differential vs central differences."""
    rng = np.random.default_rng(seed)
    r, th, z = _box_samples(n, rng, min_strata=0.05)
    worst = 0.0
    for i in range(n):
        p = CylPoint(float(r[i]), float(th[i]), float(z[i]))
        A = mapping.frame_differential(p)
        F = mapping.fd_differential(p, step=1e-5)
        rel = float(np.linalg.norm(A - F) / np.linalg.norm(A))
        worst = max(worst, rel)
    ok = worst < 1e-6
    return {
        "name": "derivative_correctness",
        "pass": bool(ok),
        "max_rel_error": worst,
        "samples": n,
        "detail": f"max relative frame-vs-FD error: {worst:.3e}",
    }


def check_jacobian(
    n_det: int = 10**4, n_pos: int = 10**6, seed: int = 0
) -> dict:
    """Criterion 3: closed-form Jacobian vs det, and a.e. positivity."""
    rng = np.random.default_rng(seed)
    r, th, z = _box_samples(n_det, rng, min_strata=0.05)
    M = mapping.frame_differential_many(r, th, z)
    J = mapping.jacobian_many(r, th, z)
    rel = float(np.max(np.abs(np.linalg.det(M) - J) / np.abs(J)))
    r2, th2, z2 = _box_samples(n_pos, rng)
    # continuous sampling misses the degeneracy set almost surely; guard anyway
    off = (th2 != 0.0) & ~((z2 == 0.0) & (r2 <= 1.0)) & (r2 > 0.0)
    J2 = mapping.jacobian_many(r2[off], th2[off], z2[off])
    n_nonpos = int(np.sum(J2 <= 0.0))
    ok = rel < 1e-10 and n_nonpos == 0
    return {
        "name": "jacobian_consistency",
        "pass": bool(ok),
        "max_rel_det_error": rel,
        "nonpositive_count": n_nonpos,
        "samples": (n_det, n_pos),
        "detail": f"det mismatch {rel:.3e}; nonpositive J at {n_nonpos} of {n_pos} points",
    }


_EPS_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def check_integrability(n: int = 10**7, seed: int = 0) -> dict:
    """Criterion 4: distortion integrable for p < 1/2, log-divergent at 1/2."""
    p_conv = [0.30, 0.40, 0.45]
    res = quadrature.integrate_Kp_schedule(
        p_conv + [0.50], list(_EPS_SCHEDULE), n=n, seed=seed
    )
    fits = {}
    ok = True
    for p in p_conv + [0.50]:
        series = [(e.tube.eps_theta, e.value) for e in res[p]]
        fit = quadrature.divergence_fit(series)
        fits[p] = fit
        if p < 0.5:
            ok = ok and fit.model == "CONSTANT"
        else:
            ok = ok and fit.model == "LOG" and fit.b > 0.0 and fit.r2 > 0.99
    detail = "; ".join(
        f"p={p}: {fits[p].model}"
        + (f" (b={fits[p].b:.2f}, r2={fits[p].r2:.4f})" if fits[p].model != "CONSTANT" else "")
        for p in p_conv + [0.50]
    )
    return {
        "name": "integrability_threshold",
        "pass": bool(ok),
        "models": {str(p): fits[p].model for p in fits},
        "log_b": fits[0.50].b,
        "log_r2": fits[0.50].r2,
        "samples": n,
        "detail": detail,
    }


_FIBER_CASES = [
    (0.0, FiberKind.CIRCLE),
    (0.25, FiberKind.FIGURE_EIGHT),
    (0.5, FiberKind.FIGURE_EIGHT),
    (0.75, FiberKind.FIGURE_EIGHT),
    (1.0, FiberKind.CIRCLE),
    (1.5, FiberKind.ARC),
    (2.0, FiberKind.ARC),
]


def check_fibers(samples: int = 1000) -> dict:
    """Criterion 5: fiber catalogue kinds, residuals, exact arc endpoints."""
    worst = 0.0
    kinds_ok = True
    endpoints_ok = True
    for t, expected in _FIBER_CASES:
        fib = mapping.fiber(CartPoint(-t, 0.0, 0.0))
        kinds_ok = kinds_ok and fib.kind == expected
        s = np.linspace(0.0, 1.0, samples)
        for comp in fib.components:
            r, th, z = comp(s)
            hx, hy, hz = mapping.eval_many(r, th, z)
            res = np.sqrt((hx + t) ** 2 + hy**2 + hz**2)
            worst = max(worst, float(np.max(res)))
        if expected is FiberKind.ARC:
            for s_end, z_end in ((0.0, -(t - 1.0)), (1.0, t - 1.0)):
                r, th, z = (np.asarray(v).item() for v in fib.components[0](s_end))
                endpoints_ok = endpoints_ok and (r, z) == (0.0, z_end)
    ok = kinds_ok and endpoints_ok and worst < 1e-9
    return {
        "name": "fiber_catalogue",
        "pass": bool(ok),
        "kinds_ok": kinds_ok,
        "endpoints_exact": endpoints_ok,
        "max_residual": worst,
        "detail": f"kinds ok: {kinds_ok}; arc endpoints exact: {endpoints_ok}; "
        f"max |h(fiber) - y|: {worst:.3e}",
    }


def check_inversion(n: int = 10**4, seed: int = 0) -> dict:
    """Criterion 6: Newton inversion round-trips at generic points."""
    rng = np.random.default_rng(seed)
    r, th, z = _box_samples(n, rng, min_strata=0.05)
    failures = 0
    worst = 0.0
    for i in range(n):
        p = cyl(float(r[i]), float(th[i]), float(z[i]))
        y = mapping.eval_map(p)
        try:
            x = mapping.invert(y, tol=1e-12, seed=seed)
        except FdlabError:
            failures += 1
            continue
        d = float(
            np.linalg.norm(
                np.array(cyl_to_cart(x)) - np.array(cyl_to_cart(p))
            )
        )
        worst = max(worst, d)
        if d >= 1e-8:
            failures += 1
    ok = failures == 0
    return {
        "name": "inversion_roundtrip",
        "pass": bool(ok),
        "failures": failures,
        "max_error": worst,
        "samples": n,
        "detail": f"{failures} failures of {n}; max round-trip error {worst:.3e}",
    }


def _control_map(pts):
    out = pts.copy()
    out[:, 0] = pts[:, 0] ** 2
    return out


def check_monotonicity(
    n_balls: int = 100, resolution: int = 128, seed: int = 0, radius: float = 0.1
) -> dict:
    """Criterion 7: ball preimages are connected; non-monotone control is not."""
    rng = np.random.default_rng(seed)
    n_half = max(n_balls // 10, 1)
    centers = []
    for t in np.linspace(0.0, 3.0, n_half):
        centers.append(np.array([-t, 0.0, 0.0]))
    while len(centers) < n_balls:
        r = rng.uniform(0.05, 1.8)
        th = rng.uniform(-_PI, _PI)
        z = rng.uniform(-0.9, 0.9)
        hx, hy, hz = (float(v) for v in mapping.eval_many(r, th, z))
        # skip balls whose boundary grazes the collapsed half-line:
        # tangency produces preimage necks thinner than any voxel grid
        d_half = math.hypot(hy, hz) if hx < 0.0 else math.hypot(hx, math.hypot(hy, hz))
        if 0.5 * radius < d_half < 1.5 * radius:
            continue
        centers.append(np.array([hx, hy, hz]))
    bad = []
    for i, y in enumerate(centers):
        count = quadrature.preimage_components(y, radius, resolution=resolution)
        if count != 1:
            bad.append((i, [float(v) for v in y], count))
    control = quadrature.preimage_components(
        (1.0, 0.0, 0.0),
        radius,
        resolution=resolution,
        box=((-2.0, 2.0), (-2.0, 2.0), (-2.0, 2.0)),
        map_fn=_control_map,
    )
    ok = not bad and control == 2
    return {
        "name": "monotonicity_h0",
        "pass": bool(ok),
        "balls": n_balls,
        "nonconnected": bad,
        "control_components": control,
        "detail": f"{n_balls - len(bad)}/{n_balls} balls connected; control map: "
        f"{control} components (want 2)",
    }


def check_wedge_inequality(
    n_matrices: int = 10**5, n_points: int = 10**4, seed: int = 0
) -> dict:
    """Criterion 8: minor-matrix norm bound on random and on-map matrices."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n_matrices, 3, 3))
    det = np.linalg.det(A)
    A[det < 0.0] = A[det < 0.0][:, ::-1, :]  # swap rows to flip orientation
    A = A[np.abs(np.linalg.det(A)) > 1e-12]
    r, th, z = _box_samples(n_points, np.random.default_rng(seed + 1), min_strata=0.05)
    D = mapping.cart_differential_many(r, th, z)
    fails = {}
    for k in (1, 2):
        fails[f"random_k{k}"] = int(np.sum(~exterior.check_wedge_inequality_many(A, k)))
        fails[f"map_k{k}"] = int(np.sum(~exterior.check_wedge_inequality_many(D, k)))
    ok = all(v == 0 for v in fails.values())
    return {
        "name": "wedge_inequality",
        "pass": bool(ok),
        "failures": fails,
        "samples": (len(A), n_points),
        "detail": f"violations: {fails}",
    }


_TRUNCATED_BOX = ((0.6, 2.0), (0.2, _PI), (0.1, 1.0))
_IMAGE_BOX = ((-4.0, 3.0), (-3.0, 3.0), (-2.0, 2.0))

_PULLBACK_CONFIGS = (
    (1, 3.0, 1.0),
    (2, 1.5, 2.0),
    (1, 6.0, 0.5),
)


def check_pullback_estimate(n: int = 10**6, seed: int = 0) -> dict:
    """Criterion 9: Holder pullback norm estimate, three configurations."""
    reports = []
    for i, (k, p, q) in enumerate(_PULLBACK_CONFIGS):
        omega = exterior.bump_form(k, _IMAGE_BOX, comp_index=i % exterior.DIMS[k])
        reports.append(
            exterior.verify_pullback_estimate(
                omega, p, q, k, _TRUNCATED_BOX, n=n, seed=seed + i
            )
        )
    ok = all(rep["pass"] for rep in reports)
    detail = "; ".join(
        f"(k={rep['k']}, p={rep['p']}, q={rep['q']}): "
        f"lhs={rep['lhs']:.4g} <= rhs={rep['rhs']:.4g}: {rep['pass']}"
        for rep in reports
    )
    return {
        "name": "pullback_norm_estimate",
        "pass": bool(ok),
        "configs": reports,
        "detail": detail,
    }


_BUMP_BOXES = (
    ((-1.2, 0.4), (-0.8, 0.8), (-0.6, 0.6)),
    ((-0.5, 1.5), (-1.0, 0.2), (-0.8, 0.4)),
    ((0.1, 1.9), (0.1, 1.3), (-0.9, -0.1)),
    ((-1.8, -0.2), (-0.5, 1.1), (0.05, 0.95)),
    ((-0.9, 0.9), (-0.9, 0.9), (-0.5, 0.5)),
)


def check_commutation(n: int = 10**6, seed: int = 0) -> dict:
    """Criterion 10: weak commutation of d with the pullback, 5 bump pairs."""
    reports = []
    for k in (1, 2):
        for i, box in enumerate(_BUMP_BOXES):
            omega = exterior.bump_form(k, box, comp_index=i % exterior.DIMS[k])
            eta = exterior.bump_form(
                2 - k, _IMAGE_BOX, comp_index=(i + 1) % exterior.DIMS[2 - k]
            )
            rep = exterior.verify_commutation(omega, eta, n=n, seed=seed + 10 * k + i)
            rep["pair"] = i
            reports.append(rep)
    ok = all(rep["pass"] for rep in reports)
    worst = max(
        (abs(rep["residual"]) / rep["stderr"] if rep["stderr"] > 0 else 0.0)
        for rep in reports
    )
    return {
        "name": "weak_commutation",
        "pass": bool(ok),
        "pairs": reports,
        "detail": f"{sum(rep['pass'] for rep in reports)}/{len(reports)} pairs within "
        f"3 stderr; worst residual {worst:.2f} stderr",
    }


def check_change_of_variables(
    n_balls: int = 10, n: int = 400_000, seed: int = 0, radius: float = 0.05
) -> dict:
    """Criterion 11: Jacobian integral over ball preimages matches volume."""
    rng = np.random.default_rng(seed)
    reports = []
    count = 0
    while count < n_balls:
        r = rng.uniform(0.2, 1.8)
        th = rng.uniform(-_PI, _PI)
        z = rng.uniform(-0.9, 0.9)
        y = np.array([float(v) for v in mapping.eval_many(r, th, z)])
        # stay clear of the collapsed half-line by at least the radius
        if y[0] <= radius and math.hypot(y[1], y[2]) < 2.0 * radius:
            continue
        rep = quadrature.change_of_variables_check(
            y, radius, n=n, seed=seed + count
        )
        rep["center"] = [float(v) for v in y]
        reports.append(rep)
        count += 1
    ok = all(rep["pass"] for rep in reports)
    return {
        "name": "change_of_variables",
        "pass": bool(ok),
        "balls": reports,
        "detail": f"{sum(rep['pass'] for rep in reports)}/{n_balls} balls within "
        "3 stderr + 1%",
    }


_FIG1_EXPECTED = {
    3: ["1/2", "1/2"],
    4: ["1", "1", "1"],
    5: ["3/2", "2/3", "2/3", "3/2"],
    6: ["2", "1", "1", "1", "2"],
    7: ["5/2", "4/3", "3/4", "3/4", "4/3", "5/2"],
    8: ["3", "5/3", "1", "1", "1", "5/3", "3"],
}


def check_tables() -> dict:
    """Criterion 12: exact exponent tables and the named special values."""
    table = thresholds.fig1_table(8)
    rows_ok = True
    for n, row in _FIG1_EXPECTED.items():
        got = table.row(n)
        vals = [str(v) for v, _ in got]
        parens = [paren for _, paren in got]
        rows_ok = rows_ok and vals == row and parens == [False] * (n - 2) + [True]
    specials = (
        thresholds.hausdorff_exponent(3, 2) == 1
        and thresholds.hausdorff_exponent(3, Fraction(1, 2)) == 2
        and thresholds.cellularity_p(3) == Fraction(1, 2)
    )
    ok = rows_ok and specials
    return {
        "name": "exponent_tables",
        "pass": bool(ok),
        "rows_ok": rows_ok,
        "specials_ok": specials,
        "detail": f"table rows exact: {rows_ok}; special values exact: {specials}",
    }


def check_dimension(n_points: int = 5000, seed: int = 0) -> dict:
    """Criterion 13: box-counting dimension of fiber clouds.

    Consistency note: positive H^1-dimensional fibers would require
    distortion integrability below the observed p = 1/2 threshold, so
    1-dimensional loops here do not contradict the measure bound H^2 = 0.
    """
    scales = [0.2 / 2**i for i in range(9)]
    dims = {}
    for label, t in (("circle", 0.0), ("figure_eight", 0.5), ("arc", 1.5)):
        fib = mapping.fiber(CartPoint(-t, 0.0, 0.0))
        dims[label] = quadrature.box_counting(fib.sample(n_points), scales)
    singleton = mapping.fiber(CartPoint(0.5, 0.3, 0.2), seed=seed)
    dims["point"] = quadrature.box_counting(
        singleton.sample(max(n_points // 4, 1000)), scales
    )
    ok = (
        all(0.9 <= dims[k] <= 1.1 for k in ("circle", "figure_eight", "arc"))
        and dims["point"] < 0.2
    )
    return {
        "name": "dimension_estimates",
        "pass": bool(ok),
        "dims": dims,
        "detail": ", ".join(f"{k}: {v:.3f}" for k, v in dims.items()),
    }


def check_meshes(resolution: int = 48) -> dict:
    """Criterion 14: Euler characteristics and the collapsed image ring."""
    chi = {}
    for c in (0.25, 0.5, 0.75, 1.5, 2.0):
        chi[c] = mesh.level_mesh(c, resolution).euler_characteristic()
    chi_ok = all(chi[c] == 0 for c in (0.25, 0.5, 0.75)) and all(
        chi[c] == 2 for c in (1.5, 2.0)
    )
    c = 0.5
    dom = mesh.level_mesh(c, resolution)
    img = mesh.image_mesh(c, resolution)
    on_ring = (
        np.abs(np.arctan2(dom.vertices[:, 1], dom.vertices[:, 0])) < 1e-15
    )
    spread = float(
        np.max(
            np.linalg.norm(img.vertices[on_ring] - np.array([-c, 0.0, 0.0]), axis=1)
        )
    )
    ok = chi_ok and spread <= 1e-12
    return {
        "name": "meshes",
        "pass": bool(ok),
        "euler": {str(k): v for k, v in chi.items()},
        "ring_spread": spread,
        "detail": f"chi: {chi}; theta=0 ring collapse spread {spread:.3e}",
    }


_CHECKS = (
    ("interface_continuity", lambda s, seed: check_interface_continuity(max(int(10**6 * s), 1000), seed)),
    ("derivative_correctness", lambda s, seed: check_derivative(max(int(10**4 * s), 50), seed)),
    ("jacobian_consistency", lambda s, seed: check_jacobian(max(int(10**4 * s), 50), max(int(10**6 * s), 1000), seed)),
    ("integrability_threshold", lambda s, seed: check_integrability(max(int(10**7 * s), 10**5), seed)),
    ("fiber_catalogue", lambda s, seed: check_fibers(max(int(1000 * s), 100))),
    ("inversion_roundtrip", lambda s, seed: check_inversion(max(int(10**4 * s), 50), seed)),
    ("monotonicity_h0", lambda s, seed: check_monotonicity(max(int(100 * s), 12), 128, seed)),
    ("wedge_inequality", lambda s, seed: check_wedge_inequality(max(int(10**5 * s), 1000), max(int(10**4 * s), 100), seed)),
    ("pullback_norm_estimate", lambda s, seed: check_pullback_estimate(max(int(10**6 * s), 10**4), seed)),
    ("weak_commutation", lambda s, seed: check_commutation(max(int(10**6 * s), 10**4), seed)),
    ("change_of_variables", lambda s, seed: check_change_of_variables(max(int(10 * s), 3), max(int(4 * 10**5 * s), 10**4), seed)),
    ("exponent_tables", lambda s, seed: check_tables()),
    ("dimension_estimates", lambda s, seed: check_dimension(5000, seed)),
    ("meshes", lambda s, seed: check_meshes()),
)


def run_all(scale: float = 1.0, seed: int = 0, timings: bool = False) -> dict:
    """Run the full checklist; scale < 1 shrinks all sample budgets."""
    import time

    results = []
    for _, fn in _CHECKS:
        t0 = time.perf_counter()
        res = fn(scale, seed)
        if timings:
            res["seconds"] = round(time.perf_counter() - t0, 3)
        results.append(res)
    return {
        "scale": scale,
        "seed": seed,
        "checks": results,
        "pass": bool(all(r["pass"] for r in results)),
    }
