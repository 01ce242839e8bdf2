"""The reconstruction engine.

Per connected component: seed the rotation system with the MST, walk the
length-sorted edge queue inserting every candidate that passes the
topology, geometry, and quality tests, optionally connect handles (edges
that join two faces, raising genus), then ear-clip the remaining faces
down to triangles. Components never interact: the geometry test only
considers mesh edges of the component being built.

The insertion loop runs as one compiled kernel over flat arrays; the
Python surface carries the same tests individually for unit testing and
drives the stages.
"""

from __future__ import annotations

import heapq
import math
import time

import numpy as np

from ._accel import jit
from .cloud import PointCloud, estimate_normals, smooth_project
from .core import EPS
from .errors import InconsistentState
from .faces import FaceTracker, _face_split, _rank_root
from .graph import Graph, _edge_lookup, build_knn_graph, minimum_spanning_tree, sort_edges
from .rotation import RotationSystem, activate_edges, build_circular_ordering
from .rotation import _corner_scan, _splice
from .spatial import KdTree, _radius_query
from .core import _seg_isect

# hop_distance_capped result when the shortest path is longer than the cap
EXCEEDS = -1

_DEGENERATE_PLANE = 1e-6


class Mesh:
    """Evolving reconstruction state over one graph (all components)."""

    def __init__(self, cloud: PointCloud, graph: Graph, tree: KdTree, params):
        self.cloud = cloud
        self.graph = graph
        self.tree = tree
        self.params = params
        self.co = build_circular_ordering(graph, cloud.positions, cloud.normals)
        self.rs = RotationSystem(self.co)
        self.tracker = FaceTracker(self.co.n_halfedges)
        self.in_m = np.zeros(graph.n_edges, dtype=np.uint8)
        self.genus = np.zeros(max(1, graph.n_components), dtype=np.int32)
        self.handles = []
        self.inserted = np.zeros(max(1, graph.n_components), dtype=np.int64)
        # scratch for the geometry test, BFS, and corner scans
        n = graph.n
        self._ball = np.empty(n, dtype=np.int32)
        self._stamp = np.zeros(n, dtype=np.int64)
        self._stamp_val = 0
        self._dist = np.zeros(n, dtype=np.int32)
        self._vstamp = np.zeros(n, dtype=np.int64)
        self._bfs_val = 0
        self._bfsq = np.empty(n, dtype=np.int32)
        self._scanned = np.zeros(n, dtype=bool)
        md = int((graph.adj_start[1:] - graph.adj_start[:-1]).max()) if n else 0
        self._scan_e = np.empty(max(1, md), dtype=np.int32)
        self._scan_s1 = np.empty(max(1, md), dtype=np.int64)
        self._scan_s2 = np.empty(max(1, md), dtype=np.int64)

    @property
    def positions(self):
        return self.cloud.positions

    @property
    def normals(self):
        return self.cloud.normals

    def n_edges_inserted(self):
        return int(self.in_m.sum())


# --------------------------------------------------------------- the tests


def topology_test(mesh: Mesh, u: int, v: int) -> bool:
    """True iff the four corner halfedges around {u, v} share one face."""
    e = mesh.graph.edge_id(u, v)
    if e < 0 or mesh.in_m[e]:
        raise ValueError(f"{{{u}, {v}}} must be an unused graph edge")
    co, rs, ft = mesh.co, mesh.rs, mesh.tracker
    ok = _topology_check(
        e, co.he_slot, co.co_start, co.slot_vertex, co.slot_he, rs.in_rs,
        ft.left, ft.right, ft.parent, ft.size,
    )[0]
    return bool(ok)


def geometry_test(mesh: Mesh, u: int, v: int) -> bool:
    """True iff the candidate crosses no nearby mesh edge in projection."""
    comp = int(mesh.graph.labels[u])
    mesh._stamp_val += 1
    return bool(
        _geometry_check(
            u, v, mesh.positions, mesh.normals, mesh.graph.l_max_euclid,
            *mesh.tree._arrays,
            mesh.graph.adj_start, mesh.graph.adj_nbr, mesh.graph.adj_edge,
            mesh.graph.edge_u, mesh.graph.edge_v, mesh.in_m,
            mesh.graph.labels, comp,
            mesh._ball, mesh._stamp, mesh._stamp_val,
        )
    )


def quality_test(mesh: Mesh, u: int, v: int) -> bool:
    """True iff neither triangle the insertion would close is ill-shaped."""
    e = mesh.graph.edge_id(u, v)
    if e < 0 or mesh.in_m[e]:
        raise ValueError(f"{{{u}, {v}}} must be an unused graph edge")
    co, rs = mesh.co, mesh.rs
    ok, a, b, cp, d, pu, nu, pv, nv, root = _topology_check(
        e, co.he_slot, co.co_start, co.slot_vertex, co.slot_he, rs.in_rs,
        mesh.tracker.left, mesh.tracker.right, mesh.tracker.parent,
        mesh.tracker.size,
    )
    if pu < 0 or pv < 0:
        return True
    lo = math.radians(mesh.params.quality_min_deg)
    hi = math.radians(mesh.params.quality_max_deg)
    return bool(
        _quality_check(
            u, v, a, b, cp, d, nu, nv, co.slot_nbr, co.slot_he, co.he_slot,
            rs.nxt, mesh.positions, lo, hi,
        )
    )


def hop_distance_capped(mesh: Mesh, u: int, v: int, cap: int):
    """Fewest mesh edges from u to v, or EXCEEDS when every path is > cap."""
    mesh._bfs_val += 1
    return int(
        _hop_bfs(
            u, v, cap, mesh.graph.adj_start, mesh.graph.adj_nbr,
            mesh.graph.adj_edge, mesh.in_m,
            mesh._dist, mesh._bfsq, mesh._vstamp, mesh._bfs_val,
        )
    )


# ------------------------------------------------------------------ stages


def init_component(mesh: Mesh, comp: int) -> np.ndarray:
    """Seed the component: MST into the RS, its single face into the tracker.

    Returns the component's insertion queue (all component edges ascending
    by length). Single-vertex components get an empty queue.
    """
    verts = mesh.graph.component_vertices(comp)
    if len(verts) < 2:
        return np.empty(0, dtype=np.int32)
    mst = minimum_spanning_tree(mesh.graph, comp)
    activate_edges(mesh.rs, mst)
    mesh.in_m[mst] = 1
    mesh.tracker.add_cycle_from(mesh.rs, 2 * int(mst[0]))
    return sort_edges(mesh.graph, comp)


def edge_insertion_stage(mesh: Mesh, queue, params, instrument: bool = False) -> int:
    """Insert every queue candidate that passes all three tests, in order.

    With handles enabled (max_genus unbounded or positive) only the first
    ceil(2|Q|/3) entries are processed; the remainder is left to the
    triangulation stage.
    """
    if len(queue) == 0:
        return 0
    if params.max_genus == 0:
        limit = len(queue)
    else:
        limit = (2 * len(queue) + 2) // 3
    co, rs, ft, g = mesh.co, mesh.rs, mesh.tracker, mesh.graph
    comp = int(g.labels[g.edge_u[queue[0]]])
    lo = math.radians(params.quality_min_deg)
    hi = math.radians(params.quality_max_deg)
    inserted, err, sval = _insertion_stage(
        np.asarray(queue, dtype=np.int32), limit,
        co.he_slot, co.co_start, co.slot_vertex, co.slot_he, co.slot_nbr,
        rs.in_rs, rs.nxt, rs.prv,
        ft.left, ft.right, ft.parent, ft.size, ft.prio, ft.in_tree,
        g.adj_start, g.adj_nbr, g.adj_edge, g.edge_u, g.edge_v,
        g.labels, comp, g.l_max_euclid,
        mesh.positions, mesh.normals, mesh.in_m,
        *mesh.tree._arrays,
        mesh._ball, mesh._stamp, mesh._stamp_val,
        lo, hi, 1 if instrument else 0,
    )
    mesh._stamp_val = int(sval)
    inserted = int(inserted)
    mesh.rs.n_halfedges += 2 * inserted
    ft.n_faces += inserted
    mesh.inserted[comp] += inserted
    if err:
        raise InconsistentState(
            {
                1: "face split failed after a passing topology test",
                2: "corner halfedges disagree on their face",
                3: "face split lost or gained halfedges",
                4: "face split left both sides on one face",
            }[int(err)]
        )
    if instrument:
        check_component_euler(mesh, comp)
    return inserted


def check_component_euler(mesh: Mesh, comp: int) -> None:
    """Assert |V| - |E| + |F| = 2 - 2 genus over the component's orbits."""
    g = mesh.graph
    verts = g.component_vertices(comp)
    if len(verts) < 2:
        return
    n_faces = int(
        _count_faces(
            verts, mesh.co.co_start, mesh.co.slot_he, mesh.co.he_slot,
            mesh.rs.in_rs, mesh.rs.nxt,
            np.zeros(mesh.co.n_halfedges, dtype=np.uint8),
        )
    )
    comp_edges = int(
        mesh.in_m[g.labels[g.edge_u] == comp].sum()
    )
    chi = len(verts) - comp_edges + n_faces
    expected = 2 - 2 * int(mesh.genus[comp])
    if chi != expected:
        raise InconsistentState(
            f"component {comp}: V-E+F = {chi}, expected {expected}"
        )


def find_handle_candidates(mesh: Mesh, comp: int) -> np.ndarray:
    """Unused edges that would bridge two faces, both corners wider than pi.

    Survivors of the geometry test are returned ascending by length (ties
    by endpoint pair), ready for connect_handles.
    """
    g, co, rs, ft = mesh.graph, mesh.co, mesh.rs, mesh.tracker
    comp_edges = np.flatnonzero(
        (g.labels[g.edge_u] == comp) & (mesh.in_m == 0)
    ).astype(np.int32)
    if len(comp_edges) == 0:
        return comp_edges
    out = np.empty(len(comp_edges), dtype=np.int32)
    cnt, sval = _handle_scan(
        comp_edges,
        co.he_slot, co.co_start, co.slot_vertex, co.slot_he, co.slot_angle,
        rs.in_rs,
        ft.left, ft.right, ft.parent, ft.size,
        g.adj_start, g.adj_nbr, g.adj_edge, g.edge_u, g.edge_v,
        g.labels, comp, g.l_max_euclid,
        mesh.positions, mesh.normals, mesh.in_m,
        *mesh.tree._arrays,
        mesh._ball, mesh._stamp, mesh._stamp_val,
        out,
    )
    mesh._stamp_val = int(sval)
    cands = out[: int(cnt)]
    order = np.argsort(g.length[cands], kind="stable")
    return cands[order]


def connect_handles(mesh: Mesh, candidates, params, comp: int) -> int:
    """Insert candidates whose endpoints are farther than n hops apart.

    Each insertion must merge two faces, dropping |F| by one and raising
    the component genus by one. Candidates were screened against a face
    snapshot that earlier handles invalidate, so the merge condition is
    re-verified on the live orbits before splicing; a candidate whose
    corners meanwhile landed on a common face is no handle and is skipped.
    """
    g, co, rs = mesh.graph, mesh.co, mesh.rs
    n_inserted = 0
    for e in candidates:
        if params.max_genus is not None and mesh.genus[comp] >= params.max_genus:
            break
        e = int(e)
        u, v = int(g.edge_u[e]), int(g.edge_v[e])
        hops = hop_distance_capped(mesh, u, v, params.n)
        if hops != EXCEEDS:
            continue
        su = int(co.he_slot[2 * e])
        sv = int(co.he_slot[2 * e + 1])
        pu, nu = _corner_scan(su, co.co_start, co.slot_vertex, rs.in_rs)
        pv, nv = _corner_scan(sv, co.co_start, co.slot_vertex, rs.in_rs)
        if pu < 0 or pv < 0:
            raise InconsistentState("handle endpoint lost its mesh corner")
        a = int(co.slot_he[pu]) ^ 1
        cp = int(co.slot_he[pv]) ^ 1
        if _same_orbit(a, cp, co.slot_he, co.he_slot, rs.nxt):
            continue
        _splice(su, pu, nu, rs.in_rs, rs.nxt, rs.prv)
        _splice(sv, pv, nv, rs.in_rs, rs.nxt, rs.prv)
        mesh.in_m[e] = 1
        rs.n_halfedges += 2
        mesh.genus[comp] += 1
        mesh.handles.append(e)
        n_inserted += 1
    return n_inserted


def triangulate(mesh: Mesh, comp: int, params, instrument: bool = False) -> int:
    """Ear-clip every remaining face of the component down to triangles.

    Corners (h1, rho(h1)) at a vertex u propose the edge {v, w} closing
    them; proposals go through a length-ordered queue. A popped proposal is
    dropped when its edge was inserted meanwhile or its corner was split,
    and must still pass the geometry test. Handle endpoints are scanned
    first, then every component vertex, rescanning after each insertion.

    An accepted proposal must actually clip its ear: the splice at v has to
    land right before (v, u) in v's ring and the splice at w right after
    (w, u). When another crack's members bend the angular order away from
    that, the insertion would stitch a different face onto this one and
    change the genus, so such candidates are dropped; their face stays a
    hole. Instrumented runs additionally verify each insertion split a
    face.
    """
    g, co, rs = mesh.graph, mesh.co, mesh.rs
    heap: list = []
    scanned = mesh._scanned

    def scan(u: int) -> None:
        scanned[u] = True
        cnt = _scan_vertex(
            u, co.co_start, co.slot_nbr, rs.in_rs, rs.nxt,
            g.adj_start, g.adj_nbr, g.adj_edge, mesh.in_m,
            mesh._scan_e, mesh._scan_s1, mesh._scan_s2,
        )
        for i in range(cnt):
            e = int(mesh._scan_e[i])
            heapq.heappush(
                heap,
                (float(g.length[e]), e, int(mesh._scan_s1[i]), int(mesh._scan_s2[i])),
            )

    def drain() -> int:
        done = 0
        while heap:
            _, e, s1, s2 = heapq.heappop(heap)
            if mesh.in_m[e]:
                continue
            if rs.nxt[s1] != s2:
                continue  # the corner was split since the push
            u, v = int(g.edge_u[e]), int(g.edge_v[e])
            if not geometry_test(mesh, u, v):
                continue
            # ear slots: s1 aims at the endpoint needing next == (.,apex),
            # s2 at the one needing prev == (.,apex)
            ear_v = int(co.slot_nbr[s1])
            slot_vu = int(co.he_slot[int(co.slot_he[s1]) ^ 1])
            slot_wu = int(co.he_slot[int(co.slot_he[s2]) ^ 1])
            su = int(co.he_slot[2 * e])
            sv = int(co.he_slot[2 * e + 1])
            if u != ear_v:
                su, sv = sv, su
            pu, nu = _corner_scan(su, co.co_start, co.slot_vertex, rs.in_rs)
            pv, nv = _corner_scan(sv, co.co_start, co.slot_vertex, rs.in_rs)
            if nu != slot_vu or pv != slot_wu:
                continue  # splice would land in another face: not this ear
            _splice(su, pu, nu, rs.in_rs, rs.nxt, rs.prv)
            _splice(sv, pv, nv, rs.in_rs, rs.nxt, rs.prv)
            mesh.in_m[e] = 1
            rs.n_halfedges += 2
            if instrument and _same_orbit_lockstep(
                2 * e, 2 * e + 1, co.slot_he, co.he_slot, rs.nxt
            ):
                raise InconsistentState(
                    f"triangulation insert {{{u}, {v}}} merged two faces"
                )
            done += 1
            scan(u)
            scan(v)
        return done

    total = 0
    for e in mesh.handles:
        if g.labels[g.edge_u[e]] == comp:
            scan(int(g.edge_u[e]))
            scan(int(g.edge_v[e]))
    total += drain()
    for u in mesh.graph.component_vertices(comp):
        if not scanned[u]:
            scan(int(u))
            total += drain()
    mesh.inserted[comp] += total
    return total


# ------------------------------------------------------------------ driver


def reconstruct_cloud(cloud: PointCloud, params, instrument: bool = False):
    """Run the full pipeline on a cloud; returns (mesh, timings_ms).

    Normals are estimated when absent and kept verbatim when provided. In
    noisy mode the working positions are smoothed onto local tangent planes
    first (re-estimating normals only if they were estimated to begin
    with), and edge ordering uses the tangent-projection metric.
    """
    t0 = time.perf_counter()
    user_normals = cloud.normals is not None
    if not user_normals:
        nrm, degen = estimate_normals(cloud, params.k)
        cloud = PointCloud(cloud.positions, nrm,
                           original_positions=cloud.original_positions)
        cloud.degenerate_normals = degen
    if params.noisy:
        cloud = smooth_project(cloud, params.k, reestimate=not user_normals)
    tree = KdTree(cloud.positions)
    graph = build_knn_graph(cloud, params, tree)
    mesh = Mesh(cloud, graph, tree, params)
    timings = {"init": 0.0, "insertion": 0.0, "handles": 0.0, "triangulation": 0.0}
    timings["init"] += time.perf_counter() - t0

    for comp in range(graph.n_components):
        t = time.perf_counter()
        queue = init_component(mesh, comp)
        timings["init"] += time.perf_counter() - t
        if len(queue) == 0:
            continue

        t = time.perf_counter()
        edge_insertion_stage(mesh, queue, params, instrument=instrument)
        timings["insertion"] += time.perf_counter() - t

        if params.max_genus != 0:
            t = time.perf_counter()
            cands = find_handle_candidates(mesh, comp)
            connect_handles(mesh, cands, params, comp)
            timings["handles"] += time.perf_counter() - t

        t = time.perf_counter()
        triangulate(mesh, comp, params, instrument=instrument)
        timings["triangulation"] += time.perf_counter() - t
        if instrument:
            check_component_euler(mesh, comp)

    return mesh, {k: v * 1000.0 for k, v in timings.items()}


# ------------------------------------------------------------------ kernels


@jit
def _topology_check(e, he_slot, co_start, slot_vertex, slot_he, in_rs,
                    left, right, parent, size):
    """Resolve corners and test the one-face condition for edge e.

    Returns (ok, a, b, cp, d, pu, nu, pv, nv, root): the four old-cycle
    halfedges around the prospective corners, the corner slots, and the
    shared face root. ok=0 with pu/pv = -1 marks an isolated endpoint.
    """
    su = he_slot[2 * e]
    sv = he_slot[2 * e + 1]
    pu, nu = _corner_scan(su, co_start, slot_vertex, in_rs)
    if pu < 0:
        return 0, -1, -1, -1, -1, np.int64(-1), np.int64(-1), np.int64(-1), np.int64(-1), np.int64(-1)
    pv, nv = _corner_scan(sv, co_start, slot_vertex, in_rs)
    if pv < 0:
        return 0, -1, -1, -1, -1, np.int64(-1), np.int64(-1), np.int64(-1), np.int64(-1), np.int64(-1)
    a = slot_he[pu] ^ 1
    b = slot_he[nu]
    cp = slot_he[pv] ^ 1
    d = slot_he[nv]
    root_a, _ = _rank_root(a, left, right, parent, size)
    root_c, _ = _rank_root(cp, left, right, parent, size)
    ok = 1 if root_a == root_c else 0
    return ok, int(a), int(b), int(cp), int(d), pu, nu, pv, nv, np.int64(root_a)


@jit
def _tri_shape_ok(pts, i0, i1, i2, lo, hi):
    """All three angles within [lo, hi] radians; zero-length side fails."""
    ax = pts[i1, 0] - pts[i0, 0]
    ay = pts[i1, 1] - pts[i0, 1]
    az = pts[i1, 2] - pts[i0, 2]
    bx = pts[i2, 0] - pts[i0, 0]
    by = pts[i2, 1] - pts[i0, 1]
    bz = pts[i2, 2] - pts[i0, 2]
    cx = pts[i2, 0] - pts[i1, 0]
    cy = pts[i2, 1] - pts[i1, 1]
    cz = pts[i2, 2] - pts[i1, 2]
    la = ax * ax + ay * ay + az * az
    lb = bx * bx + by * by + bz * bz
    lc = cx * cx + cy * cy + cz * cz
    if la < EPS * EPS or lb < EPS * EPS or lc < EPS * EPS:
        return False
    # angle at i0 between (i1 - i0) and (i2 - i0)
    crx = ay * bz - az * by
    cry = az * bx - ax * bz
    crz = ax * by - ay * bx
    cr = (crx * crx + cry * cry + crz * crz) ** 0.5
    ang0 = np.arctan2(cr, ax * bx + ay * by + az * bz)
    # angle at i1 between (i0 - i1) and (i2 - i1)
    ang1 = np.arctan2(cr, -(ax * cx + ay * cy + az * cz))
    ang2 = np.pi - ang0 - ang1
    mn = min(ang0, min(ang1, ang2))
    mx = max(ang0, max(ang1, ang2))
    return lo <= mn and mx <= hi


@jit
def _quality_check(u, v, a, b, cp, d, nu, nv, slot_nbr, slot_he, he_slot,
                   nxt, pts, lo, hi):
    """Shape-check the one or two triangles the insertion would close."""
    tb = slot_he[nxt[he_slot[b ^ 1]]]
    if tb == cp:
        w = slot_nbr[nu]
        if not _tri_shape_ok(pts, v, u, w, lo, hi):
            return False
    td = slot_he[nxt[he_slot[d ^ 1]]]
    if td == a:
        w = slot_nbr[nv]
        if not _tri_shape_ok(pts, u, v, w, lo, hi):
            return False
    return True


@jit
def _geometry_check(u, v, pts, normals, l_max,
                    tpts, split_dim, split_val, tleft, tright, tstart, tend,
                    perm,
                    adj_start, adj_nbr, adj_edge, edge_u, edge_v, in_m,
                    labels, comp, ball, stamp, stamp_val):
    """No component mesh edge near the candidate may cross it in projection.

    The neighborhood is the ball of radius l/2 + l_max around the candidate
    midpoint; the projection plane uses the averaged endpoint normals.
    Near-opposite normals define no plane and reject the candidate.
    """
    ux = pts[u, 0]
    uy = pts[u, 1]
    uz = pts[u, 2]
    vx = pts[v, 0]
    vy = pts[v, 1]
    vz = pts[v, 2]
    dx = vx - ux
    dy = vy - uy
    dz = vz - uz
    l = (dx * dx + dy * dy + dz * dz) ** 0.5
    mx = (ux + vx) * 0.5
    my = (uy + vy) * 0.5
    mz = (uz + vz) * 0.5
    rad = 0.5 * l + l_max
    nx = normals[u, 0] + normals[v, 0]
    ny = normals[u, 1] + normals[v, 1]
    nz = normals[u, 2] + normals[v, 2]
    nn = (nx * nx + ny * ny + nz * nz) ** 0.5
    if nn < _DEGENERATE_PLANE:
        return False
    nx /= nn
    ny /= nn
    nz /= nn
    # in-plane frame: project the global axis least aligned with the normal
    anx = abs(nx)
    any_ = abs(ny)
    anz = abs(nz)
    if anx <= any_ and anx <= anz:
        rx = 1.0 - nx * nx
        ry = -nx * ny
        rz = -nx * nz
    elif any_ <= anz:
        rx = -ny * nx
        ry = 1.0 - ny * ny
        rz = -ny * nz
    else:
        rx = -nz * nx
        ry = -nz * ny
        rz = 1.0 - nz * nz
    rn = (rx * rx + ry * ry + rz * rz) ** 0.5
    rx /= rn
    ry /= rn
    rz /= rn
    qx = ny * rz - nz * ry
    qy = nz * rx - nx * rz
    qz = nx * ry - ny * rx
    a1x = (ux - mx) * rx + (uy - my) * ry + (uz - mz) * rz
    a1y = (ux - mx) * qx + (uy - my) * qy + (uz - mz) * qz
    a2x = (vx - mx) * rx + (vy - my) * ry + (vz - mz) * rz
    a2y = (vx - mx) * qx + (vy - my) * qy + (vz - mz) * qz
    cnt = _radius_query(
        tpts, split_dim, split_val, tleft, tright, tstart, tend, perm,
        mx, my, mz, rad, ball,
    )
    for i in range(cnt):
        stamp[ball[i]] = stamp_val
    for i in range(cnt):
        w = ball[i]
        if labels[w] != comp:
            continue
        for j in range(adj_start[w], adj_start[w + 1]):
            eid = adj_edge[j]
            if in_m[eid] == 0:
                continue
            x = adj_nbr[j]
            if stamp[x] == stamp_val and x < w:
                continue  # both ends in the ball: counted once
            b1x = (pts[w, 0] - mx) * rx + (pts[w, 1] - my) * ry + (pts[w, 2] - mz) * rz
            b1y = (pts[w, 0] - mx) * qx + (pts[w, 1] - my) * qy + (pts[w, 2] - mz) * qz
            b2x = (pts[x, 0] - mx) * rx + (pts[x, 1] - my) * ry + (pts[x, 2] - mz) * rz
            b2y = (pts[x, 0] - mx) * qx + (pts[x, 1] - my) * qy + (pts[x, 2] - mz) * qz
            if _seg_isect(a1x, a1y, a2x, a2y, b1x, b1y, b2x, b2y,
                          u, v, w, x):
                return False
    return True


@jit
def _insertion_stage(queue, limit,
                     he_slot, co_start, slot_vertex, slot_he, slot_nbr,
                     in_rs, nxt, prv,
                     left, right, parent, size, prio, in_tree,
                     adj_start, adj_nbr, adj_edge, edge_u, edge_v,
                     labels, comp, l_max,
                     pts, normals, in_m,
                     tpts, split_dim, split_val, tleft, tright, tstart, tend,
                     perm,
                     ball, stamp, stamp_val,
                     lo, hi, instrument):
    inserted = 0
    sval = stamp_val
    for qi in range(limit):
        e = queue[qi]
        if in_m[e] == 1:
            continue
        ok, a, b, cp, d, pu, nu, pv, nv, root = _topology_check(
            e, he_slot, co_start, slot_vertex, slot_he, in_rs,
            left, right, parent, size,
        )
        if ok == 0:
            continue
        if instrument == 1:
            rb, _ = _rank_root(b, left, right, parent, size)
            rd, _ = _rank_root(d, left, right, parent, size)
            if rb != root or rd != root:
                return inserted, 2, sval
        u = edge_u[e]
        v = edge_v[e]
        sval += 1
        if not _geometry_check(
            u, v, pts, normals, l_max,
            tpts, split_dim, split_val, tleft, tright, tstart, tend, perm,
            adj_start, adj_nbr, adj_edge, edge_u, edge_v, in_m,
            labels, comp, ball, stamp, sval,
        ):
            continue
        if not _quality_check(
            u, v, a, b, cp, d, nu, nv, slot_nbr, slot_he, he_slot, nxt,
            pts, lo, hi,
        ):
            continue
        old_size = size[root]
        su = he_slot[2 * e]
        sv = he_slot[2 * e + 1]
        _splice(su, pu, nu, in_rs, nxt, prv)
        _splice(sv, pv, nv, in_rs, nxt, prv)
        g1 = 2 * e
        g2 = 2 * e + 1
        f1, f2 = _face_split(a, cp, g1, g2, left, right, parent, size, prio)
        if f1 < 0:
            return inserted, 1, sval
        in_tree[g1] = 1
        in_tree[g2] = 1
        in_m[e] = 1
        inserted += 1
        if instrument == 1:
            if size[f1] + size[f2] != old_size + 2:
                return inserted, 3, sval
            rg1, _ = _rank_root(g1, left, right, parent, size)
            rg2, _ = _rank_root(g2, left, right, parent, size)
            if rg1 == rg2:
                return inserted, 4, sval
    return inserted, 0, sval


@jit
def _same_orbit(a, cp, slot_he, he_slot, nxt):
    """True iff halfedges a and cp lie on the same face cycle."""
    cur = np.int64(a)
    while True:
        cur = np.int64(slot_he[nxt[he_slot[cur ^ 1]]])
        if cur == cp:
            return True
        if cur == a:
            return False


@jit
def _same_orbit_lockstep(g1, g2, slot_he, he_slot, nxt):
    """Like _same_orbit but walks both cycles in lockstep.

    Costs O(min of the two face sizes) when the faces differ, which keeps
    a per-insertion split check cheap while the clipped ear is a triangle.
    """
    c1 = np.int64(g1)
    c2 = np.int64(g2)
    while True:
        c1 = np.int64(slot_he[nxt[he_slot[c1 ^ 1]]])
        if c1 == g2:
            return True
        if c1 == g1:
            return False
        c2 = np.int64(slot_he[nxt[he_slot[c2 ^ 1]]])
        if c2 == g1:
            return True
        if c2 == g2:
            return False


@jit
def _count_faces(verts, co_start, slot_he, he_slot, in_rs, nxt, seen):
    count = 0
    for vi in range(len(verts)):
        u = verts[vi]
        for s in range(co_start[u], co_start[u + 1]):
            if in_rs[s] == 0:
                continue
            h0 = slot_he[s]
            if seen[h0] == 1:
                continue
            cur = np.int64(h0)
            while True:
                seen[cur] = 1
                cur = np.int64(slot_he[nxt[he_slot[cur ^ 1]]])
                if cur == h0:
                    break
            count += 1
    return count


@jit
def _handle_scan(comp_edges,
                 he_slot, co_start, slot_vertex, slot_he, slot_angle, in_rs,
                 left, right, parent, size,
                 adj_start, adj_nbr, adj_edge, edge_u, edge_v,
                 labels, comp, l_max,
                 pts, normals, in_m,
                 tpts, split_dim, split_val, tleft, tright, tstart, tend,
                 perm,
                 ball, stamp, stamp_val,
                 out):
    cnt = 0
    sval = stamp_val
    two_pi = 2.0 * np.pi
    for i in range(len(comp_edges)):
        e = comp_edges[i]
        su = he_slot[2 * e]
        sv = he_slot[2 * e + 1]
        pu, nu = _corner_scan(su, co_start, slot_vertex, in_rs)
        if pu < 0:
            continue
        pv, nv = _corner_scan(sv, co_start, slot_vertex, in_rs)
        if pv < 0:
            continue
        if pu == nu:
            ang_u = two_pi
        else:
            ang_u = (slot_angle[nu] - slot_angle[pu]) % two_pi
        if ang_u <= np.pi:
            continue
        if pv == nv:
            ang_v = two_pi
        else:
            ang_v = (slot_angle[nv] - slot_angle[pv]) % two_pi
        if ang_v <= np.pi:
            continue
        a = slot_he[pu] ^ 1
        cp = slot_he[pv] ^ 1
        root_a, _ = _rank_root(a, left, right, parent, size)
        root_c, _ = _rank_root(cp, left, right, parent, size)
        if root_a == root_c:
            continue  # same face: a chord, not a handle
        u = edge_u[e]
        v = edge_v[e]
        sval += 1
        if not _geometry_check(
            u, v, pts, normals, l_max,
            tpts, split_dim, split_val, tleft, tright, tstart, tend, perm,
            adj_start, adj_nbr, adj_edge, edge_u, edge_v, in_m,
            labels, comp, ball, stamp, sval,
        ):
            continue
        out[cnt] = e
        cnt += 1
    return cnt, sval


@jit
def _hop_bfs(src, dst, cap, adj_start, adj_nbr, adj_edge, in_m,
             dist, queue, vstamp, val):
    queue[0] = src
    vstamp[src] = val
    dist[src] = 0
    head = 0
    tail = 1
    while head < tail:
        w = queue[head]
        head += 1
        dw = dist[w]
        if dw >= cap:
            continue
        for j in range(adj_start[w], adj_start[w + 1]):
            if in_m[adj_edge[j]] == 0:
                continue
            x = adj_nbr[j]
            if vstamp[x] == val:
                continue
            if x == dst:
                return dw + 1
            vstamp[x] = val
            dist[x] = dw + 1
            queue[tail] = x
            tail += 1
    return -1


@jit
def _scan_vertex(u, co_start, slot_nbr, in_rs, nxt,
                 adj_start, adj_nbr, adj_edge, in_m,
                 out_e, out_s1, out_s2):
    cnt = 0
    for s1 in range(co_start[u], co_start[u + 1]):
        if in_rs[s1] == 0:
            continue
        s2 = nxt[s1]
        if s2 == s1:
            continue
        v = slot_nbr[s1]
        w = slot_nbr[s2]
        e = _edge_lookup(adj_start, adj_nbr, adj_edge, v, w)
        if e < 0 or in_m[e] == 1:
            continue
        out_e[cnt] = e
        out_s1[cnt] = s1
        out_s2[cnt] = s2
        cnt += 1
    return cnt
