"""Compare compiled kernels against the pure-Python fallback.

Runs the same workloads twice in subprocesses, once with RSR_NUMBA=1 and
once with RSR_NUMBA=0 (the flag is read at import time, so a fresh
interpreter per mode is the only clean way to switch). Prints a table of
wall times and verifies both modes produce identical meshes.

Usage: python3 benchmarks/benchmark.py [--points N] [--ops M]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile

WORKER = r"""
import json, sys, time
import numpy as np
from rotmesh.core import Params
from rotmesh.faces import FaceTracker
from rotmesh.mesh import extract_triangles
from rotmesh.reconstruct import reconstruct_cloud
from rotmesh.synth import sample_sphere, sample_torus

n_points, n_ops = int(sys.argv[1]), int(sys.argv[2])

# warm once so compiled mode measures steady state, not compilation
reconstruct_cloud(sample_sphere(300, seed=1), Params())

out = {}
t0 = time.perf_counter()
mesh, _ = reconstruct_cloud(sample_sphere(n_points, seed=0), Params())
out["sphere_s"] = time.perf_counter() - t0
tm = extract_triangles(mesh)
out["sphere_tris"] = sorted(map(tuple, np.sort(tm.triangles, 1).tolist()))

t0 = time.perf_counter()
mesh, _ = reconstruct_cloud(sample_torus(1500, seed=0), Params())
out["torus_s"] = time.perf_counter() - t0
out["torus_genus"] = int(mesh.genus.sum())

ft = FaceTracker(60_000)
ft.init_from_cycles(list(np.arange(60_000, dtype=np.int32).reshape(10_000, 6)))
ft.mixed_ops(1000, seed=0)
t0 = time.perf_counter()
checksum = ft.mixed_ops(n_ops, seed=3)
out["tracker_s"] = time.perf_counter() - t0
out["tracker_checksum"] = checksum

json.dump(out, sys.stdout)
"""


def run_mode(numba_on: bool, n_points: int, n_ops: int) -> dict:
    env = dict(os.environ, RSR_NUMBA="1" if numba_on else "0")
    with tempfile.NamedTemporaryFile("w", suffix=".py", delete=False) as fh:
        fh.write(WORKER)
        path = fh.name
    try:
        proc = subprocess.run(
            [sys.executable, path, str(n_points), str(n_ops)],
            env=env, capture_output=True, text=True, check=True)
    finally:
        os.unlink(path)
    return json.loads(proc.stdout)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=4000,
                    help="sphere size for the reconstruction row")
    ap.add_argument("--ops", type=int, default=200_000,
                    help="mixed tracker op count")
    args = ap.parse_args()

    print(f"workloads: sphere {args.points} pts, torus 1500 pts, "
          f"{args.ops} tracker ops")
    fast = run_mode(True, args.points, args.ops)
    slow = run_mode(False, args.points, args.ops)

    rows = [
        ("sphere reconstruction", "sphere_s"),
        ("torus reconstruction", "torus_s"),
        ("face-tracker mixed ops", "tracker_s"),
    ]
    print(f"\n{'workload':<24} {'numba':>10} {'python':>10} {'speedup':>9}")
    for label, key in rows:
        a, b = fast[key], slow[key]
        print(f"{label:<24} {a:>9.3f}s {b:>9.3f}s {b / a:>8.1f}x")

    same = (fast["sphere_tris"] == slow["sphere_tris"]
            and fast["torus_genus"] == slow["torus_genus"]
            and fast["tracker_checksum"] == slow["tracker_checksum"])
    verdict = "identical outputs in both modes" if same else "OUTPUTS DIFFER"
    print(f"\nparity: {verdict}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
