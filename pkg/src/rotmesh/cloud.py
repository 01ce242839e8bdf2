"""Point-cloud ingestion, normals, and the noisy-data smoothing pass.

Loading populates positions plus normals when the file carries them; user
normals are kept verbatim (normalized) and never re-estimated. Estimated
normals come from PCA over each point's k-neighborhood, with orientation
made globally consistent by propagating along a minimum spanning tree of
the neighborhood graph under the cost 1 - |N_i . N_j|.

``original_positions`` always preserves the loaded coordinates bit-exact;
the smoothing projection works on a copy and the final mesh is emitted
against the originals.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ._accel import jit
from .core import EPS, reference_direction
from .errors import EmptyInput, ParseError, UnsupportedFormat
from .spatial import KdTree

_EIGH_CHUNK = 50_000


class PointCloud:
    """Positions with optional unit normals.

    Attributes
    ----------
    positions : (n, 3) float64
        Working coordinates; smoothing rewrites these.
    normals : (n, 3) float64 or None
    original_positions : (n, 3) float64
        Input coordinates, preserved bit-exact.
    degenerate_normals : (n,) bool or None
        Set by :func:`estimate_normals` for vertices whose neighborhood
        covariance was rank-deficient.
    """

    __slots__ = ("positions", "normals", "original_positions", "degenerate_normals")

    def __init__(self, positions, normals=None, original_positions=None):
        pts = np.ascontiguousarray(positions, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("positions must be an (n, 3) array")
        if not np.isfinite(pts).all():
            raise ValueError("positions contain NaN or Inf")
        self.positions = pts
        if normals is not None:
            nrm = np.ascontiguousarray(normals, dtype=np.float64)
            if nrm.shape != pts.shape:
                raise ValueError("normals shape must match positions")
            if not np.isfinite(nrm).all():
                raise ValueError("normals contain NaN or Inf")
            lens = np.linalg.norm(nrm, axis=1)
            if np.any(lens < EPS):
                raise ValueError("zero-length normal")
            if np.any(np.abs(lens - 1.0) > 1e-6):
                nrm = nrm / lens[:, None]
            self.normals = nrm
        else:
            self.normals = None
        if original_positions is None:
            self.original_positions = pts.copy()
        else:
            orig = np.ascontiguousarray(original_positions, dtype=np.float64)
            if orig.shape != pts.shape:
                raise ValueError("original_positions shape must match positions")
            self.original_positions = orig
        self.degenerate_normals = None

    def __len__(self):
        return len(self.positions)


# --------------------------------------------------------------------- I/O

_PLY_SCALARS = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _infer_format(path, fmt):
    if fmt is not None:
        return fmt.lower()
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix in ("ply", "obj", "xyz"):
        return suffix
    raise UnsupportedFormat(f"cannot infer format from {path!r}")


def load(path, fmt: str | None = None) -> PointCloud:
    """Read a point cloud from a PLY, OBJ, or XYZ file.

    Normals are populated iff the file carries them. Raises ParseError with
    the offending line for malformed input, UnsupportedFormat for unknown
    extensions.
    """
    fmt = _infer_format(path, fmt)
    if fmt == "xyz":
        return _load_xyz(path)
    if fmt == "obj":
        return _load_obj(path)
    if fmt == "ply":
        return _load_ply(path)
    raise UnsupportedFormat(f"unknown point-cloud format {fmt!r}")


def _load_xyz(path) -> PointCloud:
    positions = []
    normals = []
    width = 0
    with open(path, "r", errors="replace") as fh:
        for ln, raw in enumerate(fh, start=1):
            toks = raw.split()
            if not toks:
                continue
            if len(toks) not in (3, 6):
                raise ParseError(
                    f"expected 3 or 6 values, got {len(toks)}", path, ln
                )
            if width == 0:
                width = len(toks)
            elif len(toks) != width:
                raise ParseError("inconsistent column count", path, ln)
            try:
                vals = [float(t) for t in toks]
            except ValueError:
                raise ParseError("non-numeric value", path, ln) from None
            positions.append(vals[:3])
            if width == 6:
                normals.append(vals[3:])
    if not positions:
        raise EmptyInput(f"{path}: no points")
    return PointCloud(positions, normals if normals else None)


def _load_obj(path) -> PointCloud:
    positions = []
    normals = []
    with open(path, "r", errors="replace") as fh:
        for ln, raw in enumerate(fh, start=1):
            toks = raw.split()
            if not toks or toks[0].startswith("#"):
                continue
            if toks[0] == "v":
                if len(toks) < 4:
                    raise ParseError("short v record", path, ln)
                try:
                    positions.append([float(t) for t in toks[1:4]])
                except ValueError:
                    raise ParseError("non-numeric v record", path, ln) from None
            elif toks[0] == "vn":
                if len(toks) < 4:
                    raise ParseError("short vn record", path, ln)
                try:
                    normals.append([float(t) for t in toks[1:4]])
                except ValueError:
                    raise ParseError("non-numeric vn record", path, ln) from None
    if not positions:
        raise EmptyInput(f"{path}: no points")
    # vn records map to points only when the counts line up; OBJ normals are
    # otherwise indexed through faces, which a point cloud does not have
    use_normals = len(normals) == len(positions)
    return PointCloud(positions, normals if use_normals else None)


def _load_ply(path) -> PointCloud:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"ply":
            raise ParseError("missing ply magic", path, 1)
        fmt = None
        elements = []  # (name, count, [(prop_name, np_type)])
        ln = 1
        while True:
            raw = fh.readline()
            if not raw:
                raise ParseError("unterminated header", path, ln)
            ln += 1
            toks = raw.decode("ascii", errors="replace").split()
            if not toks or toks[0] == "comment":
                continue
            if toks[0] == "format":
                if toks[1] == "ascii":
                    fmt = "ascii"
                elif toks[1] == "binary_little_endian":
                    fmt = "binary"
                else:
                    raise UnsupportedFormat(f"ply format {toks[1]!r}")
            elif toks[0] == "element":
                elements.append((toks[1], int(toks[2]), []))
            elif toks[0] == "property":
                if not elements:
                    raise ParseError("property before element", path, ln)
                if toks[1] == "list":
                    elements[-1][2].append((toks[-1], ("list", toks[2], toks[3])))
                else:
                    tp = _PLY_SCALARS.get(toks[1])
                    if tp is None:
                        raise UnsupportedFormat(f"ply property type {toks[1]!r}")
                    elements[-1][2].append((toks[-1], tp))
            elif toks[0] == "end_header":
                break
        if fmt is None:
            raise ParseError("header missing format line", path, ln)
        vertex_elem = None
        for name, count, props in elements:
            if name == "vertex":
                vertex_elem = (count, props)
                break
            if count > 0:
                raise UnsupportedFormat("elements before vertex data")
        if vertex_elem is None:
            raise ParseError("no vertex element", path, ln)
        count, props = vertex_elem
        names = [p[0] for p in props]
        if any(isinstance(p[1], tuple) for p in props):
            raise UnsupportedFormat("list property on vertex element")
        for needed in ("x", "y", "z"):
            if needed not in names:
                raise ParseError(f"vertex element lacks {needed}", path, ln)
        has_normals = all(a in names for a in ("nx", "ny", "nz"))

        if fmt == "ascii":
            rows = np.empty((count, len(props)), dtype=np.float64)
            for i in range(count):
                raw = fh.readline()
                if not raw:
                    raise ParseError("truncated vertex data", path, ln + i + 1)
                toks = raw.split()
                if len(toks) < len(props):
                    raise ParseError("short vertex record", path, ln + i + 1)
                try:
                    rows[i] = [float(t) for t in toks[: len(props)]]
                except ValueError:
                    raise ParseError(
                        "non-numeric vertex record", path, ln + i + 1
                    ) from None
        else:
            dtype = np.dtype([(n, "<" + t) for n, t in props])
            buf = fh.read(dtype.itemsize * count)
            if len(buf) < dtype.itemsize * count:
                raise ParseError("truncated binary vertex data", path, ln)
            rec = np.frombuffer(buf, dtype=dtype, count=count)
            rows = np.column_stack([rec[n].astype(np.float64) for n in names])

        cols = {n: rows[:, i] for i, n in enumerate(names)}
        positions = np.column_stack([cols["x"], cols["y"], cols["z"]])
        normals = None
        if has_normals:
            normals = np.column_stack([cols["nx"], cols["ny"], cols["nz"]])
    if count == 0:
        raise EmptyInput(f"{path}: no points")
    return PointCloud(positions, normals)


def save(cloud: PointCloud, path, fmt: str | None = None, binary: bool = False):
    """Write positions (and normals when present) to PLY, OBJ, or XYZ.

    ``%.17g`` formatting makes text round trips exact for float64.
    """
    fmt = _infer_format(path, fmt)
    pts = cloud.positions
    nrm = cloud.normals
    if fmt == "xyz":
        with open(path, "w") as fh:
            if nrm is None:
                fh.writelines(
                    "%.17g %.17g %.17g\n" % (x, y, z) for x, y, z in pts
                )
            else:
                fh.writelines(
                    "%.17g %.17g %.17g %.17g %.17g %.17g\n" % (x, y, z, a, b, c)
                    for (x, y, z), (a, b, c) in zip(pts, nrm)
                )
        return
    if fmt == "obj":
        with open(path, "w") as fh:
            fh.writelines("v %.17g %.17g %.17g\n" % (x, y, z) for x, y, z in pts)
            if nrm is not None:
                fh.writelines(
                    "vn %.17g %.17g %.17g\n" % (a, b, c) for a, b, c in nrm
                )
        return
    if fmt == "ply":
        props = ["x", "y", "z"] + (["nx", "ny", "nz"] if nrm is not None else [])
        header = ["ply"]
        header.append(
            "format binary_little_endian 1.0" if binary else "format ascii 1.0"
        )
        header.append(f"element vertex {len(pts)}")
        header.extend(f"property double {p}" for p in props)
        header.append("end_header")
        data = pts if nrm is None else np.hstack([pts, nrm])
        if binary:
            with open(path, "wb") as fh:
                fh.write(("\n".join(header) + "\n").encode("ascii"))
                fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
        else:
            row_fmt = " ".join(["%.17g"] * data.shape[1]) + "\n"
            with open(path, "w") as fh:
                fh.write("\n".join(header) + "\n")
                fh.writelines(row_fmt % tuple(row) for row in data)
        return
    raise UnsupportedFormat(f"unknown point-cloud format {fmt!r}")


# ---------------------------------------------------------- normal estimation


def _knn_table(positions, k, tree=None):
    if tree is None:
        tree = KdTree(positions)
    k = min(k, len(positions))
    idx, _ = tree.knn_all(k)
    return idx


def estimate_normals(cloud: PointCloud, k: int, tree: KdTree | None = None):
    """PCA normals over each point's k-neighborhood, consistently oriented.

    Returns ``(normals, degenerate)``. The normal is the least eigenvector
    of the neighborhood covariance (the point itself included). Vertices
    whose covariance is rank-deficient fall back to an arbitrary unit vector
    orthogonal to the dominant direction and are flagged in ``degenerate``.

    Orientation: a minimum spanning tree of the symmetrized kNN graph is
    traversed from the highest-z vertex of each component (seed oriented
    toward +z), flipping each child so N_parent . N_child >= 0.
    """
    pts = cloud.positions
    n = len(pts)
    if n < 3:
        raise EmptyInput("need at least 3 points to estimate normals")
    nbr = _knn_table(pts, k + 1, tree)
    normals = np.empty((n, 3), dtype=np.float64)
    degenerate = np.zeros(n, dtype=bool)

    for s in range(0, n, _EIGH_CHUNK):
        e = min(s + _EIGH_CHUNK, n)
        block = pts[nbr[s:e]]  # (chunk, k+1, 3)
        centered = block - block.mean(axis=1, keepdims=True)
        cov = np.einsum("nij,nik->njk", centered, centered)
        w, v = np.linalg.eigh(cov)
        normals[s:e] = v[:, :, 0]
        # rank < 2: the two smallest eigenvalues both vanish (collinear or
        # coincident neighborhoods); covariance no longer defines a plane
        degenerate[s:e] = w[:, 1] <= 1e-12 * np.maximum(w[:, 2], EPS)
        for i in np.flatnonzero(degenerate[s:e]):
            dom = v[i, :, 2]
            if w[i, 2] <= EPS:
                normals[s + i] = (0.0, 0.0, 1.0)
            else:
                normals[s + i] = reference_direction(dom)

    lens = np.linalg.norm(normals, axis=1)
    normals /= lens[:, None]

    adj_start, adj_nbr = _symmetrized_adjacency(nbr)
    z_order = np.argsort(-pts[:, 2], kind="stable").astype(np.int32)
    _orient_normals(adj_start, adj_nbr, normals, z_order)
    return normals, degenerate


def _symmetrized_adjacency(nbr):
    """CSR over the union of kNN relations (self rows excluded)."""
    n = nbr.shape[0]
    src = np.repeat(np.arange(n, dtype=np.int64), nbr.shape[1])
    dst = nbr.astype(np.int64).ravel()
    keep = (dst >= 0) & (src != dst)
    a = np.minimum(src[keep], dst[keep])
    b = np.maximum(src[keep], dst[keep])
    codes = np.unique(a * n + b)
    ea = (codes // n).astype(np.int32)
    eb = (codes % n).astype(np.int32)
    heads = np.concatenate([eb, ea])
    tails = np.concatenate([ea, eb])
    order = np.lexsort((heads, tails))
    adj_nbr = heads[order].astype(np.int32)
    adj_start = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(tails, minlength=n), out=adj_start[1:])
    return adj_start, adj_nbr


@jit
def _orient_normals(adj_start, adj_nbr, normals, z_order):
    """Flip normals in place for global consistency. Returns flip count.

    Prim growth over edge cost 1 - |N_i . N_j|; the absolute value makes
    the cost invariant under flips, so flipping during the traversal is
    safe. Heap ties break on (cost, child, parent) for determinism.
    """
    n = adj_start.shape[0] - 1
    visited = np.zeros(n, np.uint8)
    cap = adj_nbr.shape[0] + 2
    hc = np.empty(cap, np.float64)
    hv = np.empty(cap, np.int32)
    hp = np.empty(cap, np.int32)
    flips = 0
    done = 0
    seed_ptr = 0
    while done < n:
        while visited[z_order[seed_ptr]] == 1:
            seed_ptr += 1
        seed = z_order[seed_ptr]
        visited[seed] = 1
        done += 1
        if normals[seed, 2] < 0.0:
            normals[seed, 0] = -normals[seed, 0]
            normals[seed, 1] = -normals[seed, 1]
            normals[seed, 2] = -normals[seed, 2]
            flips += 1
        hsize = 0
        cur = seed
        while True:
            for j in range(adj_start[cur], adj_start[cur + 1]):
                nb = adj_nbr[j]
                if visited[nb] == 0:
                    dot = (
                        normals[cur, 0] * normals[nb, 0]
                        + normals[cur, 1] * normals[nb, 1]
                        + normals[cur, 2] * normals[nb, 2]
                    )
                    cost = 1.0 - abs(dot)
                    # sift up
                    i = hsize
                    hc[i] = cost
                    hv[i] = nb
                    hp[i] = cur
                    hsize += 1
                    while i > 0:
                        par = (i - 1) // 2
                        if hc[par] > hc[i] or (
                            hc[par] == hc[i]
                            and (
                                hv[par] > hv[i]
                                or (hv[par] == hv[i] and hp[par] > hp[i])
                            )
                        ):
                            hc[par], hc[i] = hc[i], hc[par]
                            hv[par], hv[i] = hv[i], hv[par]
                            hp[par], hp[i] = hp[i], hp[par]
                            i = par
                        else:
                            break
            # pop until an unvisited child appears
            cur = -1
            while hsize > 0:
                child = hv[0]
                parent = hp[0]
                hsize -= 1
                hc[0] = hc[hsize]
                hv[0] = hv[hsize]
                hp[0] = hp[hsize]
                i = 0
                while True:
                    l = 2 * i + 1
                    rr = l + 1
                    sm = i
                    if l < hsize and (
                        hc[l] < hc[sm]
                        or (
                            hc[l] == hc[sm]
                            and (
                                hv[l] < hv[sm]
                                or (hv[l] == hv[sm] and hp[l] < hp[sm])
                            )
                        )
                    ):
                        sm = l
                    if rr < hsize and (
                        hc[rr] < hc[sm]
                        or (
                            hc[rr] == hc[sm]
                            and (
                                hv[rr] < hv[sm]
                                or (hv[rr] == hv[sm] and hp[rr] < hp[sm])
                            )
                        )
                    ):
                        sm = rr
                    if sm == i:
                        break
                    hc[sm], hc[i] = hc[i], hc[sm]
                    hv[sm], hv[i] = hv[i], hv[sm]
                    hp[sm], hp[i] = hp[i], hp[sm]
                    i = sm
                if visited[child] == 0:
                    visited[child] = 1
                    done += 1
                    dot = (
                        normals[parent, 0] * normals[child, 0]
                        + normals[parent, 1] * normals[child, 1]
                        + normals[parent, 2] * normals[child, 2]
                    )
                    if dot < 0.0:
                        normals[child, 0] = -normals[child, 0]
                        normals[child, 1] = -normals[child, 1]
                        normals[child, 2] = -normals[child, 2]
                        flips += 1
                    cur = child
                    break
            if cur < 0:
                break
    return flips


# ----------------------------------------------------------------- smoothing


def smooth_project(
    cloud: PointCloud, k: int, iterations: int = 1, reestimate: bool = True
) -> PointCloud:
    """Project each point onto the average tangent plane of its neighborhood.

    The plane passes through the neighborhood centroid with normal equal to
    the normalized mean of the neighborhood normals. One pass by default.
    Normals are re-estimated on the projected points afterward unless
    ``reestimate`` is false (user-provided normals are kept as they are).

    ``original_positions`` carries through untouched.
    """
    if cloud.normals is None:
        raise ValueError("smooth_project needs normals; estimate them first")
    pts = cloud.positions.copy()
    nrm = cloud.normals
    for _ in range(max(1, int(iterations))):
        nbr = _knn_table(pts, k + 1)
        block = pts[nbr]
        centroid = block.mean(axis=1)
        mean_n = nrm[nbr].mean(axis=1)
        lens = np.linalg.norm(mean_n, axis=1)
        # neighborhoods with cancelling normals define no plane; leave those
        # points where they are
        ok = lens > 1e-6
        mean_n[ok] /= lens[ok, None]
        offset = np.einsum("ij,ij->i", pts - centroid, mean_n)
        pts = np.where(ok[:, None], pts - offset[:, None] * mean_n, pts)

    out = PointCloud(
        pts, nrm.copy(), original_positions=cloud.original_positions
    )
    if reestimate:
        normals, degenerate = estimate_normals(out, k)
        out.normals = normals
        out.degenerate_normals = degenerate
    return out


# --------------------------------------------------------- projection metric


def projection_distance(u: int, v: int, cloud: PointCloud) -> float:
    """Edge length averaged over its projections into both tangent planes.

    For the edge vector e between u and v, |e|_p = (|e_par_v| + |e_par_u|)/2
    where e_par_w drops the component of e along w's normal.
    """
    if cloud.normals is None:
        raise ValueError("projection_distance needs normals")
    e = cloud.positions[u] - cloud.positions[v]
    nu = cloud.normals[u]
    nv = cloud.normals[v]
    lu = np.linalg.norm(e - (e @ nu) * nu)
    lv = np.linalg.norm(e - (e @ nv) * nv)
    return float(0.5 * (lu + lv))


def projection_lengths(edge_u, edge_v, positions, normals):
    """Vectorized projection distance for edge arrays."""
    e = positions[edge_u] - positions[edge_v]
    nu = normals[edge_u]
    nv = normals[edge_v]
    pu = e - np.einsum("ij,ij->i", e, nu)[:, None] * nu
    pv = e - np.einsum("ij,ij->i", e, nv)[:, None] * nv
    return 0.5 * (np.linalg.norm(pu, axis=1) + np.linalg.norm(pv, axis=1))
