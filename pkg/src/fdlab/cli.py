"""Command-line front end.

Subcommands cover point evaluation, derivatives, fibers, inversion,
singular integration and trend fitting, topology probes, exponent
tables, form-transport verification, the full acceptance checklist,
and OBJ mesh export. Reports are JSON (default) or CSV; the schema is
documented in docs/cli-schema.md. Exit codes: 0 ok, 1 a verification
flag failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, is_dataclass
from importlib import metadata

import numpy as np

from . import exterior, mapping, mesh, quadrature, thresholds, verify
from .coords import CartPoint, CylPoint, cart_to_cyl, cyl
from .errors import FdlabError

SCHEMA_VERSION = "1"


def _version() -> str:
    try:
        return metadata.version("fdlab")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "value") and obj.__class__.__name__.endswith("Kind"):
        return obj.value
    return obj


def _parse_triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z triple, got {text!r}")
    return tuple(float(p) for p in parts)


def _point_from_args(args) -> CylPoint:
    if args.point is not None:
        r, th, z = args.point
        return cyl(r, th, z)
    if args.cart is not None:
        return cart_to_cyl(CartPoint(*args.cart))
    raise SystemExit(2)


def _emit(args, report: dict, rows=None) -> None:
    """Write the report as JSON, or `rows` (header + records) as CSV."""
    if getattr(args, "format", "json") == "csv" and rows is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in rows:
            w.writerow(row)
        text = buf.getvalue()
    else:
        text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _base_report(args, **results) -> dict:
    cfg = {
        k: v
        for k, v in sorted(vars(args).items())
        if k != "func" and v is not None
    }
    return {
        "schema": SCHEMA_VERSION,
        "version": _version(),
        "config": _jsonable(cfg),
        **results,
    }


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_eval(args) -> int:
    p = _point_from_args(args)
    h = mapping.eval_map(p)
    _emit(args, _base_report(args, point=list(p), value=list(h)))
    return 0


def _cmd_jac(args) -> int:
    p = _point_from_args(args)
    M = mapping.frame_differential(p)
    _emit(
        args,
        _base_report(
            args,
            point=list(p),
            jacobian=mapping.jacobian(p),
            frame_differential=M.tolist(),
        ),
    )
    return 0


def _cmd_distortion(args) -> int:
    p = _point_from_args(args)
    _emit(args, _base_report(args, point=list(p), distortion=mapping.distortion(p)))
    return 0


def _cmd_fiber(args) -> int:
    y = CartPoint(*args.target)
    fib = mapping.fiber(y, seed=args.seed)
    samples = fib.sample(args.samples)
    report = _base_report(
        args,
        kind=fib.kind.value,
        components=len(fib.components),
        wedge=list(fib.wedge) if fib.wedge else None,
        samples=samples.tolist() if args.samples <= 64 else None,
        n_samples=len(samples),
    )
    rows = [("x", "y", "z")] + [tuple(pt) for pt in samples]
    _emit(args, report, rows)
    return 0


def _cmd_invert(args) -> int:
    y = CartPoint(*args.target)
    x = mapping.invert(y, tol=args.tol, seed=args.seed)
    h = mapping.eval_map(x)
    residual = float(np.linalg.norm(np.array(h) - np.array(y)))
    _emit(
        args,
        _base_report(args, preimage=list(x), residual=residual),
    )
    return 0


def _cmd_integrate(args) -> int:
    tube = quadrature.ExclusionTube(args.eps, args.eps)
    est = quadrature.integrate_Kp(
        args.p, tube=tube, n=args.samples, seed=args.seed
    )
    _emit(
        args,
        _base_report(
            args,
            value=est.value,
            stderr=est.stderr,
            by_case=est.by_case,
        ),
    )
    return 0


def _cmd_fit(args) -> int:
    eps_list = args.eps_schedule
    res = quadrature.integrate_Kp_schedule(
        [args.p], eps_list, n=args.samples, seed=args.seed
    )[args.p]
    series = [(e.tube.eps_theta, e.value) for e in res]
    fit = quadrature.divergence_fit(series)
    report = _base_report(
        args,
        series=[{"eps": e, "value": v} for e, v in series],
        model=fit.model,
        a=fit.a,
        b=fit.b,
        r2=fit.r2,
        alpha=fit.alpha,
    )
    rows = [("eps", "value")] + series
    _emit(args, report, rows)
    return 0


def _cmd_components(args) -> int:
    count = quadrature.preimage_components(
        np.array(args.target), args.radius, resolution=args.resolution
    )
    _emit(args, _base_report(args, components=count))
    return 0


def _cmd_dimension(args) -> int:
    fib = mapping.fiber(CartPoint(*args.target), seed=args.seed)
    scales = [0.2 / 2**i for i in range(9)]
    dim = quadrature.box_counting(fib.sample(args.samples), scales)
    _emit(args, _base_report(args, kind=fib.kind.value, dimension=dim))
    return 0


def _cmd_energy(args) -> int:
    tube = quadrature.ExclusionTube(args.eps, args.eps)
    est = quadrature.energy_Epq(
        args.p, args.q, tube=tube, n=args.samples, seed=args.seed
    )
    _emit(args, _base_report(args, value=est.value, stderr=est.stderr))
    return 0


def _cmd_table(args) -> int:
    table = thresholds.fig1_table(args.nmax)
    report = _base_report(
        args,
        rows={
            str(n): [
                {"k": k + 1, "p": str(v), "parenthetical": paren}
                for k, (v, paren) in enumerate(table.row(n))
            ]
            for n in range(3, args.nmax + 1)
        },
    )
    rows = [line.split(",") for line in table.to_csv().splitlines()]
    _emit(args, report, rows)
    return 0


def _cmd_verify_forms(args) -> int:
    pull = verify.check_pullback_estimate(n=args.samples, seed=args.seed)
    comm = verify.check_commutation(n=args.samples, seed=args.seed)
    wedge = verify.check_wedge_inequality(seed=args.seed)
    ok = pull["pass"] and comm["pass"] and wedge["pass"]
    _emit(
        args,
        _base_report(
            args,
            checks=[_jsonable(pull), _jsonable(comm), _jsonable(wedge)],
            **{"pass": ok},
        ),
    )
    return 0 if ok else 1


def _cmd_verify_all(args) -> int:
    report = verify.run_all(scale=args.scale, seed=args.seed, timings=args.timings)
    full = _base_report(args, **report)
    rows = [("check", "pass", "detail")] + [
        (c["name"], c["pass"], c["detail"]) for c in report["checks"]
    ]
    _emit(args, full, rows)
    return 0 if report["pass"] else 1


def _cmd_export_mesh(args) -> int:
    if args.level == 0.0:
        mesh.write_obj_polyline(args.mesh_path, mesh.circle_polyline(args.resolution))
        _emit(
            args,
            _base_report(
                args, kind="polyline", path=args.mesh_path, degenerate=True
            ),
        )
        return 0
    if args.which == "domain":
        m = mesh.level_mesh(args.level, args.resolution)
    else:
        m = mesh.image_mesh(args.level, args.resolution)
    mesh.write_obj(args.mesh_path, m)
    _emit(
        args,
        _base_report(
            args,
            kind="trimesh",
            path=args.mesh_path,
            vertices=len(m.vertices),
            faces=len(m.faces),
            euler_characteristic=m.euler_characteristic(),
        ),
    )
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_point_args(sp):
    sp.add_argument("--point", type=_parse_triple, help="cylindrical r,theta,z")
    sp.add_argument("--cart", type=_parse_triple, help="Cartesian x,y,z")


def _add_common(sp):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--output", help="write the report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="fdlab",
        description="Verification laboratory for a monotone finite-distortion map",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("eval", help="evaluate the map at a point")
    _add_point_args(sp)
    _add_common(sp)
    sp.set_defaults(func=_cmd_eval)

    sp = sub.add_parser("jac", help="Jacobian and frame differential")
    _add_point_args(sp)
    _add_common(sp)
    sp.set_defaults(func=_cmd_jac)

    sp = sub.add_parser("distortion", help="pointwise distortion")
    _add_point_args(sp)
    _add_common(sp)
    sp.set_defaults(func=_cmd_distortion)

    sp = sub.add_parser("fiber", help="classify the preimage of a target")
    sp.add_argument("--target", type=_parse_triple, required=True)
    sp.add_argument("--samples", type=int, default=256)
    _add_common(sp)
    sp.set_defaults(func=_cmd_fiber)

    sp = sub.add_parser("invert", help="numeric inversion at a generic target")
    sp.add_argument("--target", type=_parse_triple, required=True)
    sp.add_argument("--tol", type=float, default=1e-10)
    _add_common(sp)
    sp.set_defaults(func=_cmd_invert)

    sp = sub.add_parser("integrate", help="distortion power integral off a tube")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--eps", type=float, default=1e-4)
    sp.add_argument("--samples", type=int, default=10**6)
    _add_common(sp)
    sp.set_defaults(func=_cmd_integrate)

    sp = sub.add_parser("fit", help="divergence trend over an eps schedule")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument(
        "--eps-schedule",
        type=lambda s: [float(x) for x in s.split(",")],
        default=[1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
    )
    sp.add_argument("--samples", type=int, default=10**6)
    _add_common(sp)
    sp.set_defaults(func=_cmd_fit)

    sp = sub.add_parser("components", help="connected components of a ball preimage")
    sp.add_argument("--target", type=_parse_triple, required=True)
    sp.add_argument("--radius", type=float, default=0.1)
    sp.add_argument("--resolution", type=int, default=128)
    _add_common(sp)
    sp.set_defaults(func=_cmd_components)

    sp = sub.add_parser("dimension", help="box-counting dimension of a fiber")
    sp.add_argument("--target", type=_parse_triple, required=True)
    sp.add_argument("--samples", type=int, default=5000)
    _add_common(sp)
    sp.set_defaults(func=_cmd_dimension)

    sp = sub.add_parser("energy", help="stored-energy integral off a tube")
    sp.add_argument("--p", type=float, default=3.0)
    sp.add_argument("--q", type=float, default=0.25)
    sp.add_argument("--eps", type=float, default=1e-3)
    sp.add_argument("--samples", type=int, default=10**6)
    _add_common(sp)
    sp.set_defaults(func=_cmd_energy)

    sp = sub.add_parser("table", help="exact critical-exponent table")
    sp.add_argument("--nmax", type=int, default=8)
    _add_common(sp)
    sp.set_defaults(func=_cmd_table)

    sp = sub.add_parser("verify-forms", help="form-transport checks only")
    sp.add_argument("--samples", type=int, default=10**6)
    _add_common(sp)
    sp.set_defaults(func=_cmd_verify_forms)

    sp = sub.add_parser("verify-all", help="run the full acceptance checklist")
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument(
        "--timings",
        action="store_true",
        help="include wall-clock times (breaks byte-for-byte determinism)",
    )
    _add_common(sp)
    sp.set_defaults(func=_cmd_verify_all)

    sp = sub.add_parser("export-mesh", help="level-set mesh as OBJ")
    sp.add_argument("--level", type=float, required=True)
    sp.add_argument("--resolution", type=int, default=64)
    sp.add_argument("--which", choices=("domain", "image"), default="domain")
    sp.add_argument("--mesh-path", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_export_mesh)

    return ap


def main(argv=None) -> int:
    threads = os.environ.get("FDLAB_THREADS")
    if threads:
        # numpy reads these at import time in the worst case, but BLAS
        # pools honor runtime updates; record the request regardless
        os.environ.setdefault("OMP_NUM_THREADS", threads)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FdlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
