"""Triangle extraction, reconstruction metrics, and mesh file output.

The finished rotation system is read back as geometry: every face cycle of
length 3 becomes an output triangle on the original (pre-smoothing)
coordinates, longer cycles are reported as holes. Metrics work purely on
the extracted triangle soup so they apply equally to a mesh loaded from
disk.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import IoError, ParseError, UnsupportedFormat


class TriangleMesh:
    """Extracted triangles over the original vertex positions.

    ``triangles`` rows are ccw per the rotation-system orientation.
    ``tri_component`` labels each triangle with its connected component;
    ``n_components`` may exceed the labels present when some components
    produced no triangles. ``holes`` holds the sizes of non-triangle faces,
    ``hole_component`` their component labels.
    """

    def __init__(self, vertices, triangles, normals=None, tri_component=None,
                 n_components=None, holes=None, hole_component=None):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(triangles, dtype=np.int32).reshape(-1, 3)
        self.normals = None if normals is None else np.asarray(
            normals, dtype=np.float64).reshape(-1, 3)
        if tri_component is None:
            tri_component = _components_from_triangles(
                len(self.vertices), self.triangles)
        self.tri_component = np.asarray(tri_component, dtype=np.int32)
        if n_components is None:
            n_components = int(self.tri_component.max()) + 1 if len(
                self.tri_component) else 0
        self.n_components = int(n_components)
        self.holes = [] if holes is None else [int(h) for h in holes]
        self.hole_component = [] if hole_component is None else [
            int(c) for c in hole_component]

    @property
    def n_triangles(self):
        return len(self.triangles)


def extract_triangles(mesh) -> TriangleMesh:
    """Read the final mesh out of a reconstruction state.

    Every τ-orbit is walked once from its smallest halfedge: size-3 orbits
    become triangles (tail vertices in orbit order), anything larger is a
    hole. Output coordinates are the loaded ones, not the smoothed working
    positions.
    """
    co, rs = mesh.co, mesh.rs
    labels = mesh.graph.labels
    seen = np.zeros(co.n_halfedges, dtype=bool)
    tris = []
    tri_comp = []
    holes = []
    hole_comp = []
    for s in range(co.n_slots):
        if not rs.in_rs[s]:
            continue
        h0 = int(co.slot_he[s])
        if seen[h0]:
            continue
        cycle = []
        cur = h0
        while True:
            seen[cur] = True
            cycle.append(cur)
            cur = int(co.slot_he[rs.nxt[co.he_slot[cur ^ 1]]])
            if cur == h0:
                break
        start = int(np.argmin(cycle))
        cycle = cycle[start:] + cycle[:start]
        tails = [co.he_tail(h) for h in cycle]
        if len(cycle) == 3:
            tris.append(tails)
            tri_comp.append(labels[tails[0]])
        else:
            holes.append(len(cycle))
            hole_comp.append(labels[tails[0]])
    vertices = mesh.cloud.original_positions
    tris = np.asarray(tris, dtype=np.int32).reshape(-1, 3)
    return TriangleMesh(
        vertices, tris, normals=mesh.cloud.normals,
        tri_component=np.asarray(tri_comp, dtype=np.int32),
        n_components=max(1, mesh.graph.n_components),
        holes=holes, hole_component=hole_comp,
    )


def _components_from_triangles(n_vertices, triangles):
    """Union-find over shared triangle vertices; labels per triangle."""
    parent = np.arange(n_vertices, dtype=np.int64)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b, c in triangles:
        ra, rb, rc = find(a), find(b), find(c)
        parent[rb] = ra
        parent[find(rc)] = ra
    roots = {}
    out = np.empty(len(triangles), dtype=np.int32)
    for i, (a, _, _) in enumerate(triangles):
        r = find(a)
        out[i] = roots.setdefault(r, len(roots))
    return out


def _edge_keys(triangles, n):
    """Canonical undirected edge key per triangle side, as one int64."""
    t = triangles.astype(np.int64)
    u = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
    v = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    return lo * n + hi


def compute_metrics(tm: TriangleMesh, input_vertices: int,
                    timings_ms=None) -> dict:
    """Reconstruction quality numbers for a triangle mesh.

    r_v is the referenced share of the input vertices; boundary edges bound
    exactly one triangle. Per component, chi = V - E + F over the
    triangles, boundary loops are the connected pieces of the boundary
    subgraph, and genus follows from chi and the loop count.
    """
    n = len(tm.vertices)
    referenced = np.unique(tm.triangles) if len(tm.triangles) else np.empty(
        0, dtype=np.int32)
    keys = _edge_keys(tm.triangles, n)
    _, counts = np.unique(keys, return_counts=True)
    boundary_total = int((counts == 1).sum())
    components = []
    for comp in range(tm.n_components):
        mask = tm.tri_component == comp
        f = int(mask.sum())
        if f == 0:
            components.append(
                {"chi": 0, "genus": 0, "boundary_loops": 0, "triangles": 0})
            continue
        tris = tm.triangles[mask]
        verts = np.unique(tris)
        ck = _edge_keys(tris, n)
        cu, cc = np.unique(ck, return_counts=True)
        chi = int(len(verts)) - int(len(cu)) + f
        bkeys = cu[cc == 1]
        loops = _count_loops(bkeys, n)
        g2 = 2 - loops - chi
        genus = g2 // 2 if g2 % 2 == 0 else g2 / 2.0
        components.append(
            {
                "chi": chi,
                "genus": genus,
                "boundary_loops": loops,
                "triangles": f,
            }
        )
    metrics = {
        "input_vertices": int(input_vertices),
        "referenced_vertices": int(len(referenced)),
        "r_v": float(len(referenced)) / input_vertices if input_vertices else 0.0,
        "boundary_edges": boundary_total,
        "components": components,
        "holes": len(tm.holes),
        "timings_ms": dict(timings_ms) if timings_ms else
        {"init": 0.0, "insertion": 0.0, "handles": 0.0, "triangulation": 0.0},
    }
    return metrics


def _count_loops(edge_keys, n):
    """Connected components of the boundary subgraph given edge keys."""
    if len(edge_keys) == 0:
        return 0
    u = (edge_keys // n).astype(np.int64)
    v = (edge_keys % n).astype(np.int64)
    verts = np.unique(np.concatenate([u, v]))
    index = {int(x): i for i, x in enumerate(verts)}
    parent = list(range(len(verts)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in zip(u, v):
        ra, rb = find(index[int(a)]), find(index[int(b)])
        if ra != rb:
            parent[rb] = ra
    return len({find(i) for i in range(len(verts))})


def write_metrics(metrics: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2)
        fh.write("\n")


# ------------------------------------------------------------------- files


def _infer(path, fmt):
    if fmt is not None:
        return fmt.lower()
    text = str(path).lower()
    for ext in ("obj", "ply"):
        if text.endswith("." + ext):
            return ext
    raise UnsupportedFormat(f"cannot infer mesh format from {path!r}")


def export(tm: TriangleMesh, path, fmt: str | None = None) -> None:
    """Write the mesh as OBJ or ascii PLY (1-based f records for OBJ).

    Holes are left open rather than written as polygons. An empty mesh
    produces a valid header-only file.
    """
    fmt = _infer(path, fmt)
    try:
        if fmt == "obj":
            _export_obj(tm, path)
        elif fmt == "ply":
            _export_ply(tm, path)
        else:
            raise UnsupportedFormat(f"unknown mesh format {fmt!r}")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _export_obj(tm, path):
    # tolist() first: repr on python floats, no per-row ndarray churn
    chunks = [f"v {x!r} {y!r} {z!r}" for x, y, z in tm.vertices.tolist()]
    has_n = tm.normals is not None
    if has_n:
        chunks += [f"vn {x!r} {y!r} {z!r}" for x, y, z in tm.normals.tolist()]
        chunks += [f"f {a + 1}//{a + 1} {b + 1}//{b + 1} {c + 1}//{c + 1}"
                   for a, b, c in tm.triangles.tolist()]
    else:
        chunks += [f"f {a + 1} {b + 1} {c + 1}"
                   for a, b, c in tm.triangles.tolist()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(chunks))
        if chunks:
            fh.write("\n")


def _export_ply(tm, path):
    has_n = tm.normals is not None
    header = ["ply", "format ascii 1.0",
              f"element vertex {len(tm.vertices)}",
              "property double x", "property double y", "property double z"]
    if has_n:
        header += ["property double nx", "property double ny",
                   "property double nz"]
    header += [f"element face {len(tm.triangles)}",
               "property list uchar int vertex_indices", "end_header"]
    chunks = header
    if has_n:
        cols = np.hstack([tm.vertices, tm.normals]).tolist()
        chunks += [f"{x!r} {y!r} {z!r} {a!r} {b!r} {c!r}"
                   for x, y, z, a, b, c in cols]
    else:
        chunks += [f"{x!r} {y!r} {z!r}" for x, y, z in tm.vertices.tolist()]
    chunks += [f"3 {a} {b} {c}" for a, b, c in tm.triangles.tolist()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(chunks))
        fh.write("\n")


def load_mesh(path, fmt: str | None = None) -> TriangleMesh:
    """Read a triangle mesh back from OBJ or ascii PLY."""
    fmt = _infer(path, fmt)
    try:
        if fmt == "obj":
            return _load_obj_mesh(path)
        if fmt == "ply":
            return _load_ply_mesh(path)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    raise UnsupportedFormat(f"unknown mesh format {fmt!r}")


def _load_obj_mesh(path):
    verts, normals, tris = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ParseError("short v record", path, ln)
                verts.append([float(x) for x in parts[1:4]])
            elif tag == "vn":
                normals.append([float(x) for x in parts[1:4]])
            elif tag == "f":
                if len(parts) != 4:
                    raise ParseError(
                        "only triangle faces are supported", path, ln)
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                tris.append(idx)
    verts = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    nrm = None
    if normals:
        if len(normals) != len(verts):
            raise ParseError("vn count differs from v count", path)
        nrm = np.asarray(normals, dtype=np.float64)
    tris = np.asarray(tris, dtype=np.int32).reshape(-1, 3)
    if len(tris) and (tris.min() < 0 or tris.max() >= len(verts)):
        raise ParseError("face index out of range", path)
    return TriangleMesh(verts, tris, normals=nrm)


def _load_ply_mesh(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError("missing ply magic", path, 1)
    n_vert = n_face = 0
    props = []
    in_vertex = False
    body_at = None
    for i, line in enumerate(lines[1:], 1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise UnsupportedFormat(f"only ascii ply meshes: {path}")
        elif parts[0] == "element":
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                n_vert = int(parts[2])
            elif parts[1] == "face":
                n_face = int(parts[2])
        elif parts[0] == "property" and in_vertex and parts[1] != "list":
            props.append(parts[-1])
        elif parts[0] == "end_header":
            body_at = i + 1
            break
    if body_at is None:
        raise ParseError("unterminated header", path)
    need = {"x", "y", "z"}
    if not need.issubset(props):
        raise ParseError("vertex element lacks x/y/z", path)
    cols = {name: j for j, name in enumerate(props)}
    rows = lines[body_at:body_at + n_vert]
    if len(rows) < n_vert:
        raise ParseError("truncated vertex block", path)
    data = np.array([[float(x) for x in r.split()] for r in rows],
                    dtype=np.float64).reshape(n_vert, len(props))
    verts = data[:, [cols["x"], cols["y"], cols["z"]]]
    nrm = None
    if {"nx", "ny", "nz"}.issubset(props):
        nrm = data[:, [cols["nx"], cols["ny"], cols["nz"]]]
    tris = []
    for r in lines[body_at + n_vert:body_at + n_vert + n_face]:
        parts = r.split()
        if not parts:
            raise ParseError("truncated face block", path)
        if parts[0] != "3" or len(parts) != 4:
            raise ParseError("only triangle faces are supported", path)
        tris.append([int(x) for x in parts[1:]])
    tris = np.asarray(tris, dtype=np.int32).reshape(-1, 3)
    if len(tris) and (tris.min() < 0 or tris.max() >= n_vert):
        raise ParseError("face index out of range", path)
    return TriangleMesh(verts, tris, normals=nrm)
