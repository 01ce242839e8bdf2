"""Dynamic face tracker.

Faces of the evolving mesh are the tau-orbits of its rotation system. Each
face is held as a treap whose in-order traversal spells the cycle (the
rotation point is arbitrary); node ids are halfedge ids, so the whole
structure lives in a few flat arrays sized at construction and never
reallocates. A same-face query walks parent pointers to the root; inserting
an edge replaces one face by two with at most two splits and three joins,
all O(log face size) expected.

Treap priorities are a stateless integer hash of the halfedge id, so the
tree shape is a pure function of the face contents: no RNG state, identical
shapes on every run, and join(split(T)) reproduces T bit for bit.
"""

from __future__ import annotations

import numpy as np

from ._accel import jit
from .errors import InconsistentState, UnknownHalfedge


def _priorities(n):
    # splitmix64 finalizer over 1..n; uint64 array ops wrap silently
    z = np.arange(1, n + 1, dtype=np.uint64)
    z = z * np.uint64(0x9E3779B97F4A7C15)
    z ^= z >> np.uint64(30)
    z *= np.uint64(0xBF58476D1CE4E5B9)
    z ^= z >> np.uint64(27)
    z *= np.uint64(0x94D049BB133111EB)
    z ^= z >> np.uint64(31)
    return z


class FaceTracker:
    def __init__(self, n_halfedges: int):
        n = int(n_halfedges)
        self.n_halfedges = n
        self.left = np.full(n, -1, dtype=np.int32)
        self.right = np.full(n, -1, dtype=np.int32)
        self.parent = np.full(n, -1, dtype=np.int32)
        self.size = np.zeros(n, dtype=np.int32)
        self.prio = _priorities(n)
        self.in_tree = np.zeros(n, dtype=np.uint8)
        self.n_faces = 0

    # -- construction

    def init_faces(self, rs) -> None:
        """Build one tree per tau-orbit of the rotation system."""
        self.left.fill(-1)
        self.right.fill(-1)
        self.parent.fill(-1)
        self.size.fill(0)
        self.in_tree.fill(0)
        co = rs.co
        self.n_faces = int(
            _init_faces(
                co.slot_he, co.he_slot, rs.nxt, rs.in_rs,
                self.left, self.right, self.parent, self.size, self.prio,
                self.in_tree,
            )
        )

    def init_from_cycles(self, cycles) -> None:
        """Adopt explicit cycles (test and benchmark entry point)."""
        nodes = np.concatenate([np.asarray(c, dtype=np.int32) for c in cycles])
        if len(np.unique(nodes)) != len(nodes):
            raise InconsistentState("cycles overlap")
        if nodes.min() < 0 or nodes.max() >= self.n_halfedges:
            raise UnknownHalfedge(int(nodes.min()) if nodes.min() < 0 else int(nodes.max()))
        starts = np.zeros(len(cycles) + 1, dtype=np.int64)
        np.cumsum([len(c) for c in cycles], out=starts[1:])
        self.left.fill(-1)
        self.right.fill(-1)
        self.parent.fill(-1)
        self.size.fill(0)
        self.in_tree.fill(0)
        _join_cycles(
            nodes, starts,
            self.left, self.right, self.parent, self.size, self.prio,
            self.in_tree,
        )
        self.n_faces = len(cycles)

    def add_cycle_from(self, rs, h0: int) -> int:
        """Track the single tau-orbit through h0; returns its size.

        Used when components are seeded one at a time: the orbit's
        halfedges must not be tracked yet.
        """
        if self.in_tree[h0]:
            raise InconsistentState(f"halfedge {h0} is already tracked")
        co = rs.co
        n = int(
            _init_cycle(
                h0, co.slot_he, co.he_slot, rs.nxt,
                self.left, self.right, self.parent, self.size, self.prio,
                self.in_tree,
            )
        )
        self.n_faces += 1
        return n

    # -- queries

    def _checked(self, h):
        if h < 0 or h >= self.n_halfedges or not self.in_tree[h]:
            raise UnknownHalfedge(h)
        return h

    def root_of(self, h) -> int:
        root, _ = _rank_root(
            self._checked(h), self.left, self.right, self.parent, self.size
        )
        return int(root)

    def same_face(self, h1, h2) -> bool:
        return self.root_of(h1) == self.root_of(h2)

    def face_size(self, h) -> int:
        return int(self.size[self.root_of(h)])

    def face_cycle(self, h):
        """The cycle containing h, as the tree's in-order list."""
        out = []
        stack = []
        cur = self.root_of(h)
        while stack or cur != -1:
            while cur != -1:
                stack.append(cur)
                cur = self.left[cur]
            cur = stack.pop()
            out.append(int(cur))
            cur = self.right[cur]
        return out

    # -- updates

    def split_on_insert(self, a, c_prime, g1, g2):
        """Replace the face carrying the corners by the two new cycles.

        `a` and `c_prime` are the incoming corner halfedges at the new
        edge's endpoints (tau-predecessors of g1 and g2 in the updated
        system); g1, g2 are the new edge's halfedges, not yet tracked.
        Returns the roots of the faces now holding g1 and g2.
        """
        self._checked(a)
        self._checked(c_prime)
        for g in (g1, g2):
            if g < 0 or g >= self.n_halfedges:
                raise UnknownHalfedge(g)
            if self.in_tree[g]:
                raise InconsistentState(f"halfedge {g} is already tracked")
        f1, f2 = _face_split(
            a, c_prime, g1, g2,
            self.left, self.right, self.parent, self.size, self.prio,
        )
        if f1 < 0:
            raise InconsistentState(
                f"corner halfedges {a} and {c_prime} lie on different faces"
            )
        self.in_tree[g1] = 1
        self.in_tree[g2] = 1
        self.n_faces += 1
        return int(f1), int(f2)

    # -- benchmark entry

    def mixed_ops(self, n_ops: int, seed: int = 0) -> int:
        """Run a deterministic stream of queries and split+rejoin updates.

        4 of 5 ops are same-face queries, 1 of 5 splits a face at a random
        rank and joins it back (which restores the identical tree). Returns
        a checksum so the work cannot be optimized away.
        """
        active = np.flatnonzero(self.in_tree).astype(np.int32)
        if len(active) == 0:
            raise InconsistentState("tracker is empty")
        rng = np.random.default_rng(seed)
        r1 = rng.integers(0, len(active), n_ops).astype(np.int64)
        r2 = rng.integers(0, 1 << 62, n_ops).astype(np.int64)
        ops = rng.integers(0, 5, n_ops).astype(np.int8)
        return int(
            _bench_mixed(
                active, r1, r2, ops,
                self.left, self.right, self.parent, self.size, self.prio,
            )
        )


# ------------------------------------------------------------------- kernels


@jit
def _rank_root(h, left, right, parent, size):
    """Tree root of h and h's in-order rank within it."""
    r = size[left[h]] if left[h] != -1 else 0
    cur = h
    p = parent[cur]
    while p != -1:
        if right[p] == cur:
            r += (size[left[p]] if left[p] != -1 else 0) + 1
        cur = p
        p = parent[cur]
    return cur, r


@jit
def _split(root, k, left, right, parent, size):
    """Detach the first k in-order nodes; returns (left root, right root)."""
    l_root = np.int64(-1)
    r_root = np.int64(-1)
    l_at = np.int64(-1)
    r_at = np.int64(-1)
    cur = np.int64(root)
    while cur != -1:
        ls = (size[left[cur]] if left[cur] != -1 else 0) + 1
        if ls <= k:
            k -= ls
            nxt = right[cur]
            if l_at == -1:
                l_root = cur
                parent[cur] = -1
            else:
                right[l_at] = cur
                parent[cur] = l_at
            l_at = cur
            cur = np.int64(nxt)
        else:
            nxt = left[cur]
            if r_at == -1:
                r_root = cur
                parent[cur] = -1
            else:
                left[r_at] = cur
                parent[cur] = r_at
            r_at = cur
            cur = np.int64(nxt)
    # the last node attached on each side still holds a stale child pointer
    if l_at != -1:
        right[l_at] = -1
        cur = l_at
        while cur != -1:
            sl = size[left[cur]] if left[cur] != -1 else 0
            sr = size[right[cur]] if right[cur] != -1 else 0
            size[cur] = 1 + sl + sr
            cur = parent[cur]
    if r_at != -1:
        left[r_at] = -1
        cur = r_at
        while cur != -1:
            sl = size[left[cur]] if left[cur] != -1 else 0
            sr = size[right[cur]] if right[cur] != -1 else 0
            size[cur] = 1 + sl + sr
            cur = parent[cur]
    return l_root, r_root


@jit
def _join(a, b, left, right, parent, size, prio):
    """Concatenate two trees (all of a before all of b); returns the root."""
    if a == -1:
        return np.int64(b)
    if b == -1:
        return np.int64(a)
    a = np.int64(a)
    b = np.int64(b)
    root = np.int64(-1)
    attach = np.int64(-1)
    attach_left = False
    sub = np.int64(-1)
    while True:
        if a == -1 or b == -1:
            sub = a if b == -1 else b
            break
        if prio[a] > prio[b]:
            node = a
            a = np.int64(right[a])
            go_left = False
        else:
            node = b
            b = np.int64(left[b])
            go_left = True
        if attach == -1:
            root = node
            parent[node] = -1
        elif attach_left:
            left[attach] = node
            parent[node] = attach
        else:
            right[attach] = node
            parent[node] = attach
        attach = node
        attach_left = go_left
    if attach_left:
        left[attach] = sub
    else:
        right[attach] = sub
    if sub != -1:
        parent[sub] = attach
    cur = attach
    while cur != -1:
        sl = size[left[cur]] if left[cur] != -1 else 0
        sr = size[right[cur]] if right[cur] != -1 else 0
        size[cur] = 1 + sl + sr
        cur = parent[cur]
    return root


@jit
def _face_split(a, cp, g1, g2, left, right, parent, size, prio):
    """Split the face holding corners a and cp into the two insertion faces.

    Cycle algebra: the old cycle reads [... a, b, ... cp, d, ...] where b
    and d are the old tau-successors. The new faces are [g1, d, ... a] and
    [g2, b, ... cp]. Returns (-1, -1) if a and cp are on different faces.
    """
    root_a, ra = _rank_root(a, left, right, parent, size)
    root_c, rc = _rank_root(cp, left, right, parent, size)
    if root_a != root_c:
        return np.int64(-1), np.int64(-1)
    left[g1] = -1
    right[g1] = -1
    parent[g1] = -1
    size[g1] = 1
    left[g2] = -1
    right[g2] = -1
    parent[g2] = -1
    size[g2] = 1
    if ra < rc:
        p, r = _split(root_a, ra + 1, left, right, parent, size)
        mid, suf = _split(r, rc - ra, left, right, parent, size)
        f2 = _join(np.int64(g2), mid, left, right, parent, size, prio)
        f1 = _join(_join(suf, p, left, right, parent, size, prio),
                   np.int64(g1), left, right, parent, size, prio)
    else:
        p, r = _split(root_a, rc + 1, left, right, parent, size)
        mid, suf = _split(r, ra - rc, left, right, parent, size)
        f1 = _join(np.int64(g1), mid, left, right, parent, size, prio)
        f2 = _join(_join(suf, p, left, right, parent, size, prio),
                   np.int64(g2), left, right, parent, size, prio)
    return f1, f2


@jit
def _init_faces(slot_he, he_slot, nxt, in_rs, left, right, parent, size, prio,
                in_tree):
    count = 0
    for s in range(len(in_rs)):
        if in_rs[s] == 0:
            continue
        h0 = np.int64(slot_he[s])
        if in_tree[h0] == 1:
            continue
        root = np.int64(-1)
        cur = h0
        while True:
            in_tree[cur] = 1
            left[cur] = -1
            right[cur] = -1
            parent[cur] = -1
            size[cur] = 1
            root = _join(root, cur, left, right, parent, size, prio)
            cur = np.int64(slot_he[nxt[he_slot[cur ^ 1]]])
            if cur == h0:
                break
        count += 1
    return count


@jit
def _init_cycle(h0, slot_he, he_slot, nxt, left, right, parent, size, prio,
                in_tree):
    root = np.int64(-1)
    cur = np.int64(h0)
    count = 0
    while True:
        in_tree[cur] = 1
        left[cur] = -1
        right[cur] = -1
        parent[cur] = -1
        size[cur] = 1
        root = _join(root, cur, left, right, parent, size, prio)
        count += 1
        cur = np.int64(slot_he[nxt[he_slot[cur ^ 1]]])
        if cur == h0:
            break
    return count


@jit
def _join_cycles(nodes, starts, left, right, parent, size, prio, in_tree):
    for c in range(len(starts) - 1):
        root = np.int64(-1)
        for i in range(starts[c], starts[c + 1]):
            h = np.int64(nodes[i])
            in_tree[h] = 1
            left[h] = -1
            right[h] = -1
            parent[h] = -1
            size[h] = 1
            root = _join(root, h, left, right, parent, size, prio)


@jit
def _bench_mixed(active, r1, r2, ops, left, right, parent, size, prio):
    na = len(active)
    checksum = np.int64(0)
    for i in range(len(ops)):
        h1 = np.int64(active[r1[i]])
        if ops[i] < 4:
            h2 = np.int64(active[r2[i] % na])
            root1, _ = _rank_root(h1, left, right, parent, size)
            root2, _ = _rank_root(h2, left, right, parent, size)
            if root1 == root2:
                checksum += 1
        else:
            root, _ = _rank_root(h1, left, right, parent, size)
            sz = np.int64(size[root])
            k = 1 + r2[i] % sz
            l, r = _split(root, k, left, right, parent, size)
            _join(l, r, left, right, parent, size, prio)
            checksum += sz
    return checksum
