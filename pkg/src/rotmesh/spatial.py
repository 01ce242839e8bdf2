"""kd-tree over 3D points: kNN and radius queries.

Array-based so the query kernels can run inside compiled code; the geometry
test calls them once per candidate edge, which is far too hot for object
traversal. Build is numpy-side (median split along the widest axis, ties
broken by point index via a stable sort), queries are kernels.
"""

from __future__ import annotations

import numpy as np

from ._accel import jit
from .errors import EmptyInput

LEAF_SIZE = 16

# generous bound for a balanced tree; query stacks are sized to this
MAX_DEPTH = 96


def _build_nodes(pts: np.ndarray):
    n = len(pts)
    cap = 4 * (n // LEAF_SIZE + 2)
    split_dim = np.full(cap, -1, np.int32)
    split_val = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    start = np.zeros(cap, np.int32)
    end = np.zeros(cap, np.int32)
    perm = np.arange(n, dtype=np.int32)

    n_nodes = 1
    stack = [(0, 0, n)]
    while stack:
        node, s, e = stack.pop()
        start[node] = s
        end[node] = e
        if e - s <= LEAF_SIZE:
            continue
        seg = perm[s:e]
        coords = pts[seg]
        widths = coords.max(axis=0) - coords.min(axis=0)
        ax = int(np.argmax(widths))
        # stable sort keeps equal coordinates in index order
        order = np.argsort(coords[:, ax], kind="stable")
        perm[s:e] = seg[order]
        m = (s + e) // 2
        split_dim[node] = ax
        split_val[node] = pts[perm[m], ax]
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack.append((n_nodes, s, m))
        stack.append((n_nodes + 1, m, e))
        n_nodes += 2

    return (
        split_dim[:n_nodes].copy(),
        split_val[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        start[:n_nodes].copy(),
        end[:n_nodes].copy(),
        perm,
    )


@jit
def _knn_query(
    pts, split_dim, split_val, left, right, start, end, perm,
    qx, qy, qz, k, out_idx, out_d2,
):
    """k nearest points to q, sorted by (distance, index). Returns count."""
    node_stack = np.empty(MAX_DEPTH, np.int32)
    dist_stack = np.empty(MAX_DEPTH, np.float64)
    node_stack[0] = 0
    dist_stack[0] = 0.0
    sp = 1
    cnt = 0
    worst = np.inf
    while sp > 0:
        sp -= 1
        nd = node_stack[sp]
        if cnt == k and dist_stack[sp] > worst:
            continue
        while split_dim[nd] >= 0:
            ax = split_dim[nd]
            if ax == 0:
                delta = qx - split_val[nd]
            elif ax == 1:
                delta = qy - split_val[nd]
            else:
                delta = qz - split_val[nd]
            if delta <= 0.0:
                near = left[nd]
                far = right[nd]
            else:
                near = right[nd]
                far = left[nd]
            fd = delta * delta
            if cnt < k or fd <= worst:
                node_stack[sp] = far
                dist_stack[sp] = fd
                sp += 1
            nd = near
        for i in range(start[nd], end[nd]):
            p = perm[i]
            dx = pts[p, 0] - qx
            dy = pts[p, 1] - qy
            dz = pts[p, 2] - qz
            d2 = dx * dx + dy * dy + dz * dz
            if cnt < k:
                j = cnt
                while j > 0 and (
                    out_d2[j - 1] > d2
                    or (out_d2[j - 1] == d2 and out_idx[j - 1] > p)
                ):
                    out_d2[j] = out_d2[j - 1]
                    out_idx[j] = out_idx[j - 1]
                    j -= 1
                out_d2[j] = d2
                out_idx[j] = p
                cnt += 1
                if cnt == k:
                    worst = out_d2[k - 1]
            elif d2 < worst or (d2 == worst and p < out_idx[k - 1]):
                j = k - 1
                while j > 0 and (
                    out_d2[j - 1] > d2
                    or (out_d2[j - 1] == d2 and out_idx[j - 1] > p)
                ):
                    out_d2[j] = out_d2[j - 1]
                    out_idx[j] = out_idx[j - 1]
                    j -= 1
                out_d2[j] = d2
                out_idx[j] = p
                worst = out_d2[k - 1]
    return cnt


@jit
def _radius_query(
    pts, split_dim, split_val, left, right, start, end, perm,
    qx, qy, qz, rad, out,
):
    """Indices within rad of q, written to out. Returns count."""
    r2 = rad * rad
    node_stack = np.empty(MAX_DEPTH, np.int32)
    node_stack[0] = 0
    sp = 1
    cnt = 0
    while sp > 0:
        sp -= 1
        nd = node_stack[sp]
        while split_dim[nd] >= 0:
            ax = split_dim[nd]
            if ax == 0:
                delta = qx - split_val[nd]
            elif ax == 1:
                delta = qy - split_val[nd]
            else:
                delta = qz - split_val[nd]
            if delta <= 0.0:
                near = left[nd]
                far = right[nd]
            else:
                near = right[nd]
                far = left[nd]
            if delta * delta <= r2:
                node_stack[sp] = far
                sp += 1
            nd = near
        for i in range(start[nd], end[nd]):
            p = perm[i]
            dx = pts[p, 0] - qx
            dy = pts[p, 1] - qy
            dz = pts[p, 2] - qz
            if dx * dx + dy * dy + dz * dz <= r2:
                out[cnt] = p
                cnt += 1
    return cnt


@jit
def _knn_all(pts, split_dim, split_val, left, right, start, end, perm, k):
    """kNN for every indexed point at once. Rows sorted by (distance, index)."""
    n = pts.shape[0]
    idx = np.empty((n, k), np.int32)
    d2 = np.empty((n, k), np.float64)
    row_idx = np.empty(k, np.int32)
    row_d2 = np.empty(k, np.float64)
    for i in range(n):
        cnt = _knn_query(
            pts, split_dim, split_val, left, right, start, end, perm,
            pts[i, 0], pts[i, 1], pts[i, 2], k, row_idx, row_d2,
        )
        for j in range(cnt):
            idx[i, j] = row_idx[j]
            d2[i, j] = row_d2[j]
        for j in range(cnt, k):
            idx[i, j] = -1
            d2[i, j] = np.inf
    return idx, d2


class KdTree:
    """Immutable spatial index over an (n, 3) float64 array."""

    def __init__(self, points):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must be an (n, 3) array")
        if len(pts) == 0:
            raise EmptyInput("cannot index an empty point set")
        self.points = pts
        (
            self.split_dim,
            self.split_val,
            self.left,
            self.right,
            self.start,
            self.end,
            self.perm,
        ) = _build_nodes(pts)

    def __len__(self):
        return len(self.points)

    @property
    def _arrays(self):
        return (
            self.points,
            self.split_dim,
            self.split_val,
            self.left,
            self.right,
            self.start,
            self.end,
            self.perm,
        )

    def knn(self, q, k: int):
        """The k nearest indexed points to q.

        Returns (indices, distances) with distances non-decreasing and ties
        broken by ascending index. When q is itself an indexed point it is
        included. k larger than the point count returns all points.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        k = min(int(k), len(self.points))
        q = np.asarray(q, dtype=np.float64)
        out_idx = np.empty(k, np.int32)
        out_d2 = np.empty(k, np.float64)
        cnt = _knn_query(*self._arrays, q[0], q[1], q[2], k, out_idx, out_d2)
        return out_idx[:cnt].copy(), np.sqrt(out_d2[:cnt])

    def radius_query(self, c, rad: float):
        """Indices of all points within rad of c, ascending."""
        if rad < 0:
            raise ValueError("rad must be >= 0")
        c = np.asarray(c, dtype=np.float64)
        out = np.empty(len(self.points), np.int32)
        cnt = _radius_query(*self._arrays, c[0], c[1], c[2], float(rad), out)
        res = out[:cnt]
        res.sort()
        return res.copy()

    def knn_all(self, k: int):
        """Per-point kNN table (each point queries itself too)."""
        k = min(int(k), len(self.points))
        return _knn_all(*self._arrays, k)

    def depth(self):
        """Maximum node depth, for balance checks."""
        d = 0
        stack = [(0, 1)]
        while stack:
            node, lvl = stack.pop()
            d = max(d, lvl)
            if self.split_dim[node] >= 0:
                stack.append((self.left[node], lvl + 1))
                stack.append((self.right[node], lvl + 1))
        return d
