"""Rotation-system mesh kernel.

A halfedge is an int: edge id ``e`` yields halfedges ``2e`` (from the lower
vertex to the higher) and ``2e + 1`` (the reverse), so ``iota`` is a bit
flip. Every directed graph edge owns a slot in a per-vertex CSR ordered by
the neighbor's counterclockwise angle in the tangent plane (the circular
ordering, fixed at build time). The live rotation system is a doubly linked
cyclic list threaded through the member slots of each vertex, so ``rho`` is
one array hop and inserting an edge splices two slots into their rings.

Faces are orbits of ``tau = rho . iota``; nothing stores them explicitly
here, the face tracker keeps its own balanced-tree view.
"""

from __future__ import annotations

import numpy as np

from ._accel import jit
from .core import EPS, TWO_PI
from .errors import IsolatedVertex, UnknownHalfedge

# stored CO angles get k * TIE_STEP added within exact-tie groups so every
# vertex's angle sequence is strictly increasing
TIE_STEP = 1e-9


class CircularOrdering:
    """Per-vertex neighbor slots sorted by tangent-plane angle.

    Slot arrays are parallel: ``slot_nbr[s]`` is the neighbor the slot points
    at, ``slot_vertex[s]`` its owner, ``slot_he[s]`` the outgoing halfedge,
    ``slot_angle[s]`` the (tie-resolved) angle. ``he_slot`` inverts
    ``slot_he``. Rows are ``co_start[u] : co_start[u + 1]``.
    """

    def __init__(self, graph, co_start, slot_nbr, slot_edge, slot_he,
                 slot_vertex, slot_angle, slot_degenerate, he_slot):
        self.graph = graph
        self.co_start = co_start
        self.slot_nbr = slot_nbr
        self.slot_edge = slot_edge
        self.slot_he = slot_he
        self.slot_vertex = slot_vertex
        self.slot_angle = slot_angle
        self.slot_degenerate = slot_degenerate
        self.he_slot = he_slot

    @property
    def n_slots(self):
        return len(self.slot_nbr)

    @property
    def n_halfedges(self):
        return len(self.slot_nbr)

    def neighbors_in_order(self, u):
        return self.slot_nbr[self.co_start[u] : self.co_start[u + 1]]

    def angles_of(self, u):
        return self.slot_angle[self.co_start[u] : self.co_start[u + 1]]

    def he_tail(self, h):
        e = h >> 1
        return int(self.graph.edge_u[e] if h & 1 == 0 else self.graph.edge_v[e])

    def he_head(self, h):
        e = h >> 1
        return int(self.graph.edge_v[e] if h & 1 == 0 else self.graph.edge_u[e])

    def slot_of(self, u, v):
        """Slot of halfedge (u -> v); -1 when v is not a G-neighbor of u."""
        e = self.graph.edge_id(u, v)
        if e < 0:
            return -1
        h = 2 * e if self.graph.edge_u[e] == u else 2 * e + 1
        return int(self.he_slot[h])


def build_circular_ordering(graph, positions, normals) -> CircularOrdering:
    """Sort every vertex's G-neighbors counterclockwise about its normal.

    The angle reference is the global axis least aligned with the vertex
    normal, projected into the tangent plane. Neighbors whose direction is
    parallel to the normal have no defined angle; they get the index-scaled
    placeholder ``head * TIE_STEP`` and a degenerate flag. Exact angle ties
    are ordered by neighbor index and separated by TIE_STEP so stored angles
    strictly increase within each vertex.
    """
    n = graph.n
    m = graph.n_edges
    eids = np.arange(m, dtype=np.int32)
    tails = np.concatenate([graph.edge_u, graph.edge_v]).astype(np.int64)
    heads = np.concatenate([graph.edge_v, graph.edge_u]).astype(np.int64)
    edges2 = np.concatenate([eids, eids])
    hes = np.concatenate([2 * eids, 2 * eids + 1]).astype(np.int32)

    nt = normals[tails]
    axis = np.argmin(np.abs(normals), axis=1)
    ref = -(normals[np.arange(n), axis][:, None]) * normals
    ref[np.arange(n), axis] += 1.0
    ref /= np.linalg.norm(ref, axis=1, keepdims=True)
    rt = ref[tails]

    vec = positions[heads] - positions[tails]
    w = vec - np.einsum("ij,ij->i", vec, nt)[:, None] * nt
    wn2 = np.einsum("ij,ij->i", w, w)
    s = np.einsum("ij,ij->i", np.cross(nt, rt), w)
    c = np.einsum("ij,ij->i", rt, w)
    ang = np.arctan2(s, c) % TWO_PI
    degenerate = wn2 < EPS * EPS
    ang[degenerate] = heads[degenerate] * TIE_STEP

    order = np.lexsort((heads, ang, tails))
    st = tails[order]
    sa = ang[order].copy()
    new_group = np.empty(len(order), dtype=bool)
    new_group[0] = True
    new_group[1:] = (st[1:] != st[:-1]) | (sa[1:] != sa[:-1])
    starts = np.flatnonzero(new_group)
    gid = np.cumsum(new_group) - 1
    rank = np.arange(len(order)) - starts[gid]
    sa += rank * TIE_STEP

    co_start = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(tails, minlength=n), out=co_start[1:])
    slot_he = hes[order]
    he_slot = np.empty(2 * m, dtype=np.int32)
    he_slot[slot_he] = np.arange(2 * m, dtype=np.int32)

    return CircularOrdering(
        graph,
        co_start,
        heads[order].astype(np.int32),
        edges2[order].astype(np.int32),
        slot_he,
        st.astype(np.int32),
        sa,
        degenerate[order],
        he_slot,
    )


class RotationSystem:
    """Membership flags plus the per-vertex cyclic ring over member slots."""

    def __init__(self, co: CircularOrdering):
        self.co = co
        ns = co.n_slots
        self.in_rs = np.zeros(ns, dtype=np.uint8)
        self.nxt = np.full(ns, -1, dtype=np.int32)
        self.prv = np.full(ns, -1, dtype=np.int32)
        self.n_halfedges = 0

    # -- validation helpers

    def _slot_checked(self, h):
        if h < 0 or h >= self.co.n_slots:
            raise UnknownHalfedge(h)
        s = self.co.he_slot[h]
        if not self.in_rs[s]:
            raise UnknownHalfedge(h)
        return s

    def contains(self, h) -> bool:
        return 0 <= h < self.co.n_slots and bool(self.in_rs[self.co.he_slot[h]])

    # -- operators

    def rho(self, h) -> int:
        return int(self.co.slot_he[self.nxt[self._slot_checked(h)]])

    def rho_inv(self, h) -> int:
        return int(self.co.slot_he[self.prv[self._slot_checked(h)]])

    def iota(self, h) -> int:
        self._slot_checked(h)
        return h ^ 1

    def tau(self, h) -> int:
        return self.rho(self.iota(h))

    def orbit(self, h):
        """The face cycle of h under tau."""
        start = h
        out = [h]
        cur = self.tau(h)
        while cur != start:
            out.append(cur)
            cur = self.tau(cur)
        return out

    def active_halfedges(self):
        return self.co.slot_he[np.flatnonzero(self.in_rs)]

    def degree(self, u) -> int:
        lo = self.co.co_start[u]
        hi = self.co.co_start[u + 1]
        return int(self.in_rs[lo:hi].sum())

    def ring_slots(self, u):
        """Member slots of u in ring order, starting at the lowest."""
        lo = self.co.co_start[u]
        hi = self.co.co_start[u + 1]
        active = np.flatnonzero(self.in_rs[lo:hi]) + lo
        if len(active) == 0:
            return []
        out = [int(active[0])]
        cur = self.nxt[active[0]]
        while cur != active[0]:
            out.append(int(cur))
            cur = self.nxt[cur]
        return out


def activate_edges(rs: RotationSystem, edge_ids) -> None:
    """Activate a batch of edges whose vertices hold no member slots yet.

    Per vertex, the new slots are linked cyclically in CO order. Intended
    for seeding whole components (an MST at a time); vertices that already
    carry members would need splicing instead, so mixing is not allowed.
    """
    co = rs.co
    edge_ids = np.asarray(edge_ids, dtype=np.int32)
    if len(edge_ids) == 0:
        return
    act = np.concatenate([co.he_slot[2 * edge_ids], co.he_slot[2 * edge_ids + 1]])
    act = np.sort(act)
    if rs.in_rs[act].any():
        raise ValueError("activate_edges hit a vertex with existing members")
    rs.in_rs[act] = 1
    verts = co.slot_vertex[act]
    starts = np.flatnonzero(np.r_[True, verts[1:] != verts[:-1]])
    idx = np.arange(len(act))
    nxt_pos = idx + 1
    ends = np.r_[starts[1:], len(act)]
    nxt_pos[ends - 1] = starts
    rs.nxt[act] = act[nxt_pos]
    rs.prv[act[nxt_pos]] = act
    rs.n_halfedges += 2 * len(edge_ids)


def init_rs(edge_ids, co: CircularOrdering) -> RotationSystem:
    """Rotation system holding exactly the given edges (typically an MST).

    Per vertex, member slots are linked cyclically in CO order.
    """
    rs = RotationSystem(co)
    activate_edges(rs, edge_ids)
    return rs


# ------------------------------------------------------- spec-shaped surface


def rho(rs: RotationSystem, h: int) -> int:
    """Next outgoing halfedge counterclockwise at the tail of h."""
    return rs.rho(h)


def iota(h: int) -> int:
    """The reverse halfedge."""
    return h ^ 1


def tau(rs: RotationSystem, h: int) -> int:
    """Next halfedge around the face of h (rho after iota)."""
    return rs.tau(h)


def corner_of(rs: RotationSystem, u: int, v: int):
    """The RS corner at u that the halfedge (u -> v) would split.

    Returns ``(h_prev, h_next)``: the member halfedges whose slots sit
    immediately before and after (u -> v) in CO order. A degree-1 vertex
    yields ``(h, h)``.

    Raises IsolatedVertex when u has no member halfedge, ValueError when v
    is not a G-neighbor of u or the edge is already a member.
    """
    s = rs.co.slot_of(u, v)
    if s < 0:
        raise ValueError(f"{v} is not a graph neighbor of {u}")
    if rs.in_rs[s]:
        raise ValueError(f"edge {{{u}, {v}}} is already in the mesh")
    ps, ns = _corner_scan(s, rs.co.co_start, rs.co.slot_vertex, rs.in_rs)
    if ps < 0:
        raise IsolatedVertex(u)
    return int(rs.co.slot_he[ps]), int(rs.co.slot_he[ns])


def insert_edge_rs(rs: RotationSystem, u: int, v: int) -> None:
    """Splice (u -> v) and (v -> u) into their corners."""
    su = rs.co.slot_of(u, v)
    if su < 0:
        raise ValueError(f"{v} is not a graph neighbor of {u}")
    sv = rs.co.he_slot[rs.co.slot_he[su] ^ 1]
    if rs.in_rs[su] or rs.in_rs[sv]:
        raise ValueError(f"edge {{{u}, {v}}} is already in the mesh")
    for s, vert in ((su, u), (sv, v)):
        ps, ns = _corner_scan(s, rs.co.co_start, rs.co.slot_vertex, rs.in_rs)
        if ps < 0:
            raise IsolatedVertex(vert)
        _splice(s, ps, ns, rs.in_rs, rs.nxt, rs.prv)
    rs.n_halfedges += 2


def corner_angle(rs: RotationSystem, u: int, corner) -> float:
    """Counterclockwise angular extent of a corner at u; 2*pi at degree 1."""
    h_prev, h_next = corner
    if h_prev == h_next:
        return TWO_PI
    a_prev = rs.co.slot_angle[rs._slot_checked(h_prev)]
    a_next = rs.co.slot_angle[rs._slot_checked(h_next)]
    return float((a_next - a_prev) % TWO_PI)


# ------------------------------------------------------------------- kernels


@jit
def _corner_scan(slot, co_start, slot_vertex, in_rs):
    """Nearest member slots before/after `slot` in its vertex row, cyclically.

    Returns (-1, -1) when the vertex has no member slot.
    """
    v = slot_vertex[slot]
    lo = co_start[v]
    hi = co_start[v + 1]
    nxt_s = np.int64(-1)
    j = slot + 1
    while True:
        if j == hi:
            j = lo
        if j == slot:
            break
        if in_rs[j] == 1:
            nxt_s = j
            break
        j += 1
    if nxt_s < 0:
        return np.int64(-1), np.int64(-1)
    prv_s = np.int64(-1)
    j = slot - 1
    while True:
        if j < lo:
            j = hi - 1
        if j == slot:
            break
        if in_rs[j] == 1:
            prv_s = j
            break
        j -= 1
    return prv_s, nxt_s


@jit
def _splice(slot, prev_slot, next_slot, in_rs, nxt, prv):
    in_rs[slot] = 1
    nxt[prev_slot] = slot
    prv[slot] = prev_slot
    nxt[slot] = next_slot
    prv[next_slot] = slot
