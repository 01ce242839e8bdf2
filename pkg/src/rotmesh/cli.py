"""Command line front end.

Three subcommands: ``reconstruct`` runs the full pipeline on a point cloud
and writes a mesh (plus an optional metrics JSON), ``synth`` emits the
built-in test shapes as PLY, and ``metrics`` recomputes quality numbers
for an existing mesh file. Verbosity comes from the RSR_LOG environment
variable (debug/info/warning/error).

Exit codes: 0 success, 1 flag or configuration error, 2 file error
(missing, unreadable, or malformed input, unwritable output), 3
reconstruction consistency failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import cloud as pointcloud
from .core import Params
from .errors import (
    ConfigError,
    EmptyInput,
    InconsistentState,
    IoError,
    ParseError,
    RotmeshError,
    UnsupportedFormat,
)
from .mesh import (
    compute_metrics,
    export,
    extract_triangles,
    load_mesh,
    write_metrics,
)
from .reconstruct import reconstruct_cloud
from .synth import sample_sphere, sample_torus, sample_two_sheets

log = logging.getLogger("rotmesh")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; remap to our exit code 1."""

    def exit(self, status=0, message=None):
        if message:
            self._print_message(message, sys.stderr)
        raise SystemExit(0 if status == 0 else 1)


def build_parser() -> argparse.ArgumentParser:
    d = Params()
    p = _Parser(prog="rotmesh",
                description="Point cloud surface reconstruction.")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("reconstruct", help="reconstruct a mesh from points")
    pr.add_argument("input", help="point cloud (xyz, obj, or ply)")
    pr.add_argument("-o", "--output", default=None,
                    help="mesh path, .obj or .ply (default: input + .mesh.obj)")
    pr.add_argument("--metrics", default=None, metavar="PATH",
                    help="write metrics JSON here")
    pr.add_argument("--k", type=int, default=d.k,
                    help=f"neighbors per point (default {d.k})")
    pr.add_argument("--r", type=float, default=d.r,
                    help=f"length filter multiplier (default {d.r})")
    pr.add_argument("--theta", type=float, default=d.theta_deg,
                    help=f"normal agreement cutoff, degrees (default {d.theta_deg:g})")
    pr.add_argument("--n", type=int, default=d.n,
                    help=f"min hop distance for handles (default {d.n})")
    pr.add_argument("--max-genus", type=int, default=None,
                    help="cap on handles per component (default: unlimited)")
    pr.add_argument("--genus0", action="store_true",
                    help="skip the handle stage entirely")
    pr.add_argument("--noisy", action="store_true",
                    help="smooth and project before meshing")
    pr.add_argument("--no-estimate-normals", action="store_true",
                    help="require normals in the input file")

    ps = sub.add_parser("synth", help="generate a synthetic point cloud")
    ps.add_argument("shape", choices=["sphere", "torus", "two-sheets"])
    ps.add_argument("--n", type=int, default=2000, help="point budget")
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--big-radius", type=float, default=2.0,
                    help="torus only: sweep radius")
    ps.add_argument("--tube-radius", type=float, default=0.7,
                    help="torus only: tube radius")
    ps.add_argument("--gap", type=float, default=1.0,
                    help="two-sheets only: sheet separation")
    ps.add_argument("-o", "--output", default=None,
                    help="output PLY (default: <shape>.ply)")

    pm = sub.add_parser("metrics", help="recompute metrics for a mesh file")
    pm.add_argument("mesh", help="triangle mesh (obj or ply)")
    pm.add_argument("--cloud", default=None,
                    help="original point cloud, for the r_v denominator")
    pm.add_argument("-o", "--output", default=None,
                    help="metrics JSON path (default: stdout)")
    return p


def _setup_logging():
    level = os.environ.get("RSR_LOG", "warning").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        level = "WARNING"
    logging.basicConfig(level=getattr(logging, level),
                        format="%(levelname)s %(name)s: %(message)s")


def _cmd_reconstruct(args) -> int:
    if args.genus0:
        if args.max_genus not in (None, 0):
            raise ConfigError("--genus0 conflicts with --max-genus > 0")
        args.max_genus = 0
    params = Params(k=args.k, r=args.r, theta_deg=args.theta, n=args.n,
                    max_genus=args.max_genus, noisy=args.noisy)
    pc = pointcloud.load(args.input)
    if args.no_estimate_normals and pc.normals is None:
        raise ConfigError(
            f"{args.input} has no normals and estimation is disabled")
    log.info("loaded %d points from %s", len(pc.positions), args.input)
    mesh, timings = reconstruct_cloud(pc, params)
    tm = extract_triangles(mesh)
    out = args.output or args.input + ".mesh.obj"
    export(tm, out)
    metrics = compute_metrics(tm, len(pc.positions), timings)
    if args.metrics:
        write_metrics(metrics, args.metrics)
    log.info(
        "wrote %s: %d triangles, %d component(s), r_v=%.4f, "
        "boundary edges=%d",
        out, tm.n_triangles, tm.n_components, metrics["r_v"],
        metrics["boundary_edges"])
    for i, comp in enumerate(metrics["components"]):
        log.info("component %d: chi=%s genus=%s loops=%s triangles=%s",
                 i, comp["chi"], comp["genus"], comp["boundary_loops"],
                 comp["triangles"])
    return 0


def _cmd_synth(args) -> int:
    if args.shape == "sphere":
        pc = sample_sphere(args.n, seed=args.seed)
    elif args.shape == "torus":
        pc = sample_torus(args.n, big_radius=args.big_radius,
                          tube_radius=args.tube_radius, seed=args.seed)
    else:
        pc = sample_two_sheets(args.n, gap=args.gap)
    out = args.output or f"{args.shape}.ply"
    pointcloud.save(pc, out)
    log.info("wrote %d points to %s", len(pc.positions), out)
    return 0


def _cmd_metrics(args) -> int:
    tm = load_mesh(args.mesh)
    if args.cloud is not None:
        n_input = len(pointcloud.load(args.cloud).positions)
    else:
        n_input = len(tm.vertices)
    metrics = compute_metrics(tm, n_input)
    if args.output:
        write_metrics(metrics, args.output)
    else:
        json.dump(metrics, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def run(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "reconstruct":
            return _cmd_reconstruct(args)
        if args.command == "synth":
            return _cmd_synth(args)
        return _cmd_metrics(args)
    except ConfigError as exc:
        log.error("%s", exc)
        print(f"rotmesh: {exc}", file=sys.stderr)
        return 1
    except (IoError, ParseError, UnsupportedFormat, EmptyInput,
            OSError) as exc:
        print(f"rotmesh: {exc}", file=sys.stderr)
        return 2
    except (InconsistentState, RotmeshError) as exc:
        print(f"rotmesh: reconstruction failed: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
