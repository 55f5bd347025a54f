"""Command line driver: ``finsler-torus {check-norm,build,verify,plot-data}``.

Exit status: 0 on success/PASS, 1 on a FAIL or an exhausted construction,
2 on unreadable input or invalid arguments.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from ._numerics import TWO_PI, unit
from .config import PipelineConfig
from .errors import ConfigurationError, FinslerError, InvalidArgument, NumericalFailure
from .geodesics import chart_from_spec, integrate, unit_velocity
from .glue import run_pipeline
from .norms import check_quadratic_convexity, norm_from_spec
from .serialization import atomic_write, load_artifact, read_json, save_artifact, write_json
from .verify import verify_all

log = logging.getLogger("finsler_torus")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _default_seed() -> int:
    raw = os.environ.get("FINSLER_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise InvalidArgument(f"FINSLER_SEED must be an integer, got {raw!r}") from None


def _load_spec(path) -> dict:
    try:
        spec = read_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgument(f"cannot read spec {path}: {exc}") from None
    if not isinstance(spec, dict):
        raise InvalidArgument("spec must be a JSON object")
    return spec


def _say(args, text):
    if not args.quiet:
        print(text)


def _csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v for v in row])
    return atomic_write(path, buf.getvalue())


# ----------------------------------------------------------------------------
# subcommands


def cmd_check_norm(args) -> int:
    spec = _load_spec(args.spec)
    norm = norm_from_spec(spec.get("norm", spec))
    rep = check_quadratic_convexity(norm, n_dirs=args.dirs)
    _say(args, f"min eigenvalue {rep.min_eigenvalue:.6e} at direction {rep.worst_direction:.6f} rad: {'PASS' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _resolve_config(spec: dict, args) -> PipelineConfig:
    values = dict(spec.get("config", {}))
    for key, flag in (("eps", args.eps), ("r", args.r), ("l", args.l), ("n_theta", args.n_theta), ("n_x", args.n_x)):
        if flag is not None:
            values[key] = flag
    if args.l is None and args.r is not None and "l" in values and values["l"] <= args.r:
        values.pop("l")
    return PipelineConfig.from_dict(values)


def cmd_build(args) -> int:
    spec = _load_spec(args.spec)
    cfg = _resolve_config(spec, args)
    chart = chart_from_spec(spec)
    base = norm_from_spec(spec.get("norm", spec))
    convex = check_quadratic_convexity(base, tol=cfg.tol_convex)
    if not convex.passed:
        _say(args, f"norm is not quadratically convex (min eigenvalue {convex.min_eigenvalue:.3e})")
        return EXIT_FAIL
    t0 = time.perf_counter()
    try:
        result = run_pipeline(chart, cfg, symmetric=bool(spec.get("symmetric", False)), threads=args.threads)
    except (ConfigurationError, NumericalFailure) as exc:
        _say(args, f"build failed: {exc}")
        return EXIT_FAIL
    out = Path(args.out_dir)
    artifact = save_artifact(result, spec, out, stem=args.name)
    manifest = {
        "tool_version": _version(),
        "input_spec": str(args.spec),
        "config": result.cfg.to_dict(),
        "artifacts": [artifact.name, f"{args.name}_envelope.json"],
        "timings": {**result.timings, "wall": time.perf_counter() - t0},
    }
    write_json(out / f"{args.name}_manifest.json", manifest)
    c = result.cfg
    _say(args, f"wrote {artifact} (eps={c.eps:g}, r={c.r:g}, l={c.l}, escalations={result.escalations})")
    return EXIT_OK


def cmd_verify(args) -> int:
    art = load_artifact(args.artifact)
    seed = _default_seed() if args.seed is None else args.seed
    report = verify_all(art.metric, art.chart, n_geodesics=args.geodesics, T=args.length, seed=seed, n_curves=args.curves, dt=args.dt)
    stem = Path(args.artifact).stem
    out = Path(args.out_dir)
    atomic_write(out / f"{stem}_report.json", report.to_json() + "\n")
    atomic_write(out / f"{stem}_report.txt", report.to_text() + "\n")
    _say(args, report.to_text())
    return EXIT_OK if report.passed else EXIT_FAIL


def _grid(extent, n):
    g = np.linspace(-extent, extent, n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def cmd_plot_data(args) -> int:
    art = load_artifact(args.artifact)
    metric = art.metric
    stem = Path(args.artifact).stem
    out = Path(args.out_dir) / f"{stem}_{args.what}.csv"
    extent = 2 * metric.eps if args.extent is None else args.extent
    if args.what == "indicatrices":
        pts = _grid(extent, 9)
        psi = np.arange(64) * (TWO_PI / 64)
        x = np.repeat(pts, psi.size, axis=0)
        ang = np.tile(psi, pts.shape[0])
        phi = metric.norm(x, unit(ang))
        _csv(out, ["x", "y", "theta_v", "phi"], zip(x[:, 0], x[:, 1], ang, phi))
    elif args.what == "geodesics":
        chart = metric.chart()
        angles = np.arange(16) * (TWO_PI / 16)
        x0 = np.zeros((16, 2))
        n = int(np.ceil(args.length / args.dt))
        xs, vs = integrate(chart, x0, unit_velocity(chart, x0, angles), args.length / n, n)
        t = np.arange(n + 1) * (args.length / n)
        rows = ((k, t[i], *xs[i, k], *vs[i, k]) for k in range(16) for i in range(n + 1))
        _csv(out, ["curve", "t", "x", "y", "vx", "vy"], rows)
    elif args.what == "cosphere":
        pts = _grid(extent, 9)
        cov = metric.field.covectors(pts)
        rows = ((*pts[i], th, *cov[i, k]) for i in range(pts.shape[0]) for k, th in enumerate(metric.field.theta))
        _csv(out, ["x", "y", "theta", "a1", "a2"], rows)
    else:
        F = metric.field
        theta = np.full(F.axis.size**2, args.theta)
        pts = F.grid_points().reshape(-1, 2)
        _csv(out, ["x", "y", "F"], zip(pts[:, 0], pts[:, 1], F.value(theta, pts)))
    _say(args, f"wrote {out}")
    return EXIT_OK


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="finsler-torus", description="Embed a planar Finsler patch into a torus without conjugate points.")
    p.add_argument("--threads", type=int, default=1, help="worker threads for tabulation")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    p.add_argument("--out-dir", default=".", help="directory for artifacts and reports")
    p.add_argument("--version", action="version", version=_version())
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check-norm", help="quadratic convexity of the base norm")
    s.add_argument("spec")
    s.add_argument("--dirs", type=int, default=64)
    s.set_defaults(func=cmd_check_norm)

    s = sub.add_parser("build", help="run the construction and write a torus artifact")
    s.add_argument("spec")
    s.add_argument("--eps", type=float)
    s.add_argument("--r", type=float)
    s.add_argument("--l", type=int)
    s.add_argument("--n-theta", type=int)
    s.add_argument("--n-x", type=int)
    s.add_argument("--name", default="torus", help="artifact file stem")
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("verify", help="certify a torus artifact")
    s.add_argument("artifact")
    s.add_argument("--geodesics", type=int, default=100)
    s.add_argument("--length", type=float, help="scan length (default 4 l)")
    s.add_argument("--seed", type=int, help="defaults to $FINSLER_SEED or 0")
    s.add_argument("--curves", type=int, default=50, help="gradient-flow curves")
    s.add_argument("--dt", type=float, default=1e-2, help="conjugate scan step")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("plot-data", help="CSV dumps for external plotting")
    s.add_argument("artifact")
    s.add_argument("what", choices=["indicatrices", "geodesics", "cosphere", "envelope"])
    s.add_argument("--theta", type=float, default=0.0, help="envelope slice")
    s.add_argument("--extent", type=float, help="half-width of the sample grid (default 2 eps)")
    s.add_argument("--length", type=float, default=2.0, help="fan geodesic length")
    s.add_argument("--dt", type=float, default=1e-2)
    s.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be positive")
    try:
        return args.func(args)
    except (InvalidArgument, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FinslerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
