"""The filtered kNN graph, its components, MSTs, and the edge queue.

Graph edges start as the symmetrized union of kNN relations, then two culls
run in a fixed order: edges whose endpoint normals disagree beyond theta go
first, then edges longer than r times the mean length of what survived the
normal cull. The working metric is Euclidean normally and the projection
distance in noisy mode; the spatial test radius always uses Euclidean
lengths, so both are kept.
"""

from __future__ import annotations

import numpy as np

from ._accel import jit
from .cloud import projection_lengths
from .spatial import KdTree


class Graph:
    """Immutable undirected graph over vertex indices 0..n-1.

    Edges are stored once with edge_u < edge_v, sorted lexicographically,
    plus a CSR adjacency whose rows are sorted by neighbor index. ``length``
    is the working metric; ``length_euclid`` the Euclidean one.
    """

    def __init__(self, n, edge_u, edge_v, length, length_euclid=None):
        self.n = int(n)
        edge_u = np.asarray(edge_u, dtype=np.int32)
        edge_v = np.asarray(edge_v, dtype=np.int32)
        if np.any(edge_u >= edge_v):
            raise ValueError("edges must satisfy u < v")
        order = np.lexsort((edge_v, edge_u))
        self.edge_u = edge_u[order]
        self.edge_v = edge_v[order]
        self.length = np.asarray(length, dtype=np.float64)[order]
        if length_euclid is None:
            self.length_euclid = self.length
        else:
            self.length_euclid = np.asarray(length_euclid, dtype=np.float64)[order]

        m = len(self.edge_u)
        codes = self.edge_u.astype(np.int64) * n + self.edge_v
        if len(np.unique(codes)) != m:
            raise ValueError("duplicate edges")

        eids = np.arange(m, dtype=np.int32)
        tails = np.concatenate([self.edge_u, self.edge_v])
        heads = np.concatenate([self.edge_v, self.edge_u])
        all_eids = np.concatenate([eids, eids])
        order = np.lexsort((heads, tails))
        self.adj_nbr = np.ascontiguousarray(heads[order], dtype=np.int32)
        self.adj_edge = np.ascontiguousarray(all_eids[order], dtype=np.int32)
        self.adj_start = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(tails, minlength=n), out=self.adj_start[1:])

        self.labels, self.n_components = _components(self.adj_start, self.adj_nbr)
        self.l_max = float(self.length.max()) if m else 0.0
        self.l_max_euclid = float(self.length_euclid.max()) if m else 0.0

    @property
    def n_edges(self):
        return len(self.edge_u)

    def edge_id(self, u, v):
        """Edge id of {u, v}, or -1 when absent."""
        return int(
            _edge_lookup(
                self.adj_start, self.adj_nbr, self.adj_edge, int(u), int(v)
            )
        )

    def degree(self, u):
        return int(self.adj_start[u + 1] - self.adj_start[u])

    def component_vertices(self, comp):
        return np.flatnonzero(self.labels == comp).astype(np.int32)


def build_knn_graph(cloud, params, tree: KdTree | None = None) -> Graph:
    """Symmetrized kNN graph with the normal and length culls applied.

    Requires normals on the cloud. The graph may be disconnected and may
    leave vertices isolated; both are reported through component labels.
    """
    if cloud.normals is None:
        raise ValueError("build_knn_graph needs normals")
    pts = cloud.positions
    nrm = cloud.normals
    n = len(pts)
    if tree is None:
        tree = KdTree(pts)
    nbr, _ = tree.knn_all(min(params.k + 1, n))

    src = np.repeat(np.arange(n, dtype=np.int64), nbr.shape[1])
    dst = nbr.astype(np.int64).ravel()
    keep = (dst >= 0) & (src != dst)
    a = np.minimum(src[keep], dst[keep])
    b = np.maximum(src[keep], dst[keep])
    codes = np.unique(a * n + b)
    eu = (codes // n).astype(np.int32)
    ev = (codes % n).astype(np.int32)

    dots = np.einsum("ij,ij->i", nrm[eu], nrm[ev])
    keep_n = dots >= params.cos_theta

    euclid = np.linalg.norm(pts[eu] - pts[ev], axis=1)
    if params.noisy:
        metric = projection_lengths(eu, ev, pts, nrm)
    else:
        metric = euclid

    # mean over the edges that survived the normal cull
    if keep_n.any():
        mean_len = metric[keep_n].mean()
        keep_all = keep_n & (metric <= params.r * mean_len)
    else:
        keep_all = keep_n

    return Graph(n, eu[keep_all], ev[keep_all], metric[keep_all], euclid[keep_all])


def connected_components(g: Graph):
    """Component labels; two vertices share a label iff connected."""
    return g.labels


def minimum_spanning_tree(g: Graph, component: int) -> np.ndarray:
    """Edge ids of the component's MST under the working metric.

    Prim from the component's lowest-index vertex; heap ties break on edge
    id, which is (u, v)-lexicographic by construction.
    """
    verts = np.flatnonzero(g.labels == component)
    if len(verts) == 0:
        raise ValueError(f"no such component {component}")
    if len(verts) == 1:
        return np.empty(0, dtype=np.int32)
    seed = int(verts[0])
    visited = np.zeros(g.n, dtype=np.uint8)
    out = np.empty(len(verts) - 1, dtype=np.int32)
    cnt = _prim(
        g.adj_start, g.adj_nbr, g.adj_edge, g.edge_u, g.edge_v, g.length,
        seed, visited, out,
    )
    if cnt != len(verts) - 1:
        raise ValueError("component not connected")
    return out


def sort_edges(g: Graph, component: int) -> np.ndarray:
    """Edge ids of one component ascending by (length, u, v)."""
    in_comp = g.labels[g.edge_u] == component
    ids = np.flatnonzero(in_comp)
    order = np.lexsort((g.edge_v[ids], g.edge_u[ids], g.length[ids]))
    return ids[order].astype(np.int32)


@jit
def _components(adj_start, adj_nbr):
    n = adj_start.shape[0] - 1
    labels = np.full(n, -1, np.int32)
    queue = np.empty(n, np.int32)
    c = 0
    for s in range(n):
        if labels[s] >= 0:
            continue
        labels[s] = c
        queue[0] = s
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            for j in range(adj_start[u], adj_start[u + 1]):
                v = adj_nbr[j]
                if labels[v] < 0:
                    labels[v] = c
                    queue[tail] = v
                    tail += 1
        c += 1
    return labels, c


@jit
def _edge_lookup(adj_start, adj_nbr, adj_edge, u, v):
    lo = adj_start[u]
    hi = adj_start[u + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if adj_nbr[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    if lo < adj_start[u + 1] and adj_nbr[lo] == v:
        return adj_edge[lo]
    return np.int32(-1)


@jit
def _prim(adj_start, adj_nbr, adj_edge, edge_u, edge_v, weights, seed, visited, out):
    """Lazy Prim; fills out with MST edge ids, returns how many were placed."""
    cap = adj_nbr.shape[0] + 2
    hw = np.empty(cap, np.float64)
    he = np.empty(cap, np.int32)
    hv = np.empty(cap, np.int32)
    hsize = 0
    out_cnt = 0

    visited[seed] = 1
    cur = seed
    while True:
        for j in range(adj_start[cur], adj_start[cur + 1]):
            nb = adj_nbr[j]
            if visited[nb] == 0:
                e = adj_edge[j]
                w = weights[e]
                i = hsize
                hw[i] = w
                he[i] = e
                hv[i] = nb
                hsize += 1
                while i > 0:
                    par = (i - 1) // 2
                    if hw[par] > hw[i] or (hw[par] == hw[i] and he[par] > he[i]):
                        hw[par], hw[i] = hw[i], hw[par]
                        he[par], he[i] = he[i], he[par]
                        hv[par], hv[i] = hv[i], hv[par]
                        i = par
                    else:
                        break
        cur = -1
        while hsize > 0:
            e = he[0]
            v = hv[0]
            hsize -= 1
            hw[0] = hw[hsize]
            he[0] = he[hsize]
            hv[0] = hv[hsize]
            i = 0
            while True:
                l = 2 * i + 1
                r = l + 1
                sm = i
                if l < hsize and (
                    hw[l] < hw[sm] or (hw[l] == hw[sm] and he[l] < he[sm])
                ):
                    sm = l
                if r < hsize and (
                    hw[r] < hw[sm] or (hw[r] == hw[sm] and he[r] < he[sm])
                ):
                    sm = r
                if sm == i:
                    break
                hw[sm], hw[i] = hw[i], hw[sm]
                he[sm], he[i] = he[i], he[sm]
                hv[sm], hv[i] = hv[i], hv[sm]
                i = sm
            if visited[v] == 0:
                visited[v] = 1
                out[out_cnt] = e
                out_cnt += 1
                cur = v
                break
        if cur < 0:
            break
    return out_cnt
