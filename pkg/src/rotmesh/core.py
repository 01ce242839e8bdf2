"""Geometric primitives and the run configuration.

Small pure helpers used everywhere else: tangent-plane angles (the basis of
the per-vertex cyclic neighbor ordering), triangle angles for the quality
check, and the 2D segment intersection predicate behind the geometry test.

Angles are radians everywhere inside the package; degrees appear only at the
CLI boundary and in :class:`Params` fields explicitly suffixed ``_deg``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import jit
from .errors import ConfigError, DegenerateProjection, DegenerateTriangle

# WARNING: degeneracy threshold on vector norms. Comparisons happen on
# squared norms against EPS * EPS to avoid the sqrt.
EPS = 1e-12

TWO_PI = 2.0 * np.pi


@dataclass
class Params:
    """Reconstruction parameters.

    Attributes
    ----------
    k : int
        Neighbors per vertex for the kNN graph (also reused for normal
        estimation and smoothing neighborhoods).
    r : float
        Length cull factor: graph edges longer than ``r`` times the mean
        surviving edge length are dropped.
    theta_deg : float
        Maximum angle between endpoint normals for a graph edge to survive.
    n : int
        Hop threshold for handle culling; a handle is accepted only when the
        shortest existing path between its endpoints exceeds ``n`` edges.
    max_genus : int or None
        Per-component cap on inserted handles. ``None`` means unbounded,
        ``0`` skips the handle stage entirely.
    noisy : bool
        Use projected distances as the edge metric and run one smoothing
        pass before building the graph.
    quality_min_deg, quality_max_deg : float
        Accepted interior-angle range for triangles formed during the
        insertion stage.
    """

    k: int = 30
    r: float = 20.0
    theta_deg: float = 60.0
    n: int = 50
    max_genus: int | None = None
    noisy: bool = False
    quality_min_deg: float = 5.0
    quality_max_deg: float = 175.0

    def __post_init__(self):
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if not self.r > 0:
            raise ConfigError(f"r must be > 0, got {self.r}")
        if not 0.0 < self.theta_deg <= 180.0:
            raise ConfigError(f"theta must be in (0, 180], got {self.theta_deg}")
        if self.n < 0:
            raise ConfigError(f"n must be >= 0, got {self.n}")
        if self.max_genus is not None and self.max_genus < 0:
            raise ConfigError(f"max_genus must be >= 0, got {self.max_genus}")
        if not self.quality_min_deg < self.quality_max_deg:
            raise ConfigError("quality_min_deg must be below quality_max_deg")

    @property
    def cos_theta(self) -> float:
        return float(np.cos(np.radians(self.theta_deg)))


def unit(v) -> np.ndarray:
    """Return ``v`` normalized to unit length.

    Raises
    ------
    ValueError
        If ``v`` is shorter than the degeneracy threshold.
    """
    v = np.asarray(v, dtype=np.float64)
    n2 = float(v @ v)
    if n2 < EPS * EPS:
        raise ValueError("cannot normalize a near-zero vector")
    return v / np.sqrt(n2)


def project_to_plane(p, origin, normal) -> np.ndarray:
    """Orthogonal projection of ``p`` onto the plane through ``origin``.

    ``normal`` must be unit length.
    """
    p = np.asarray(p, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    normal = np.asarray(normal, dtype=np.float64)
    d = p - origin
    return p - (d @ normal) * normal


def reference_direction(normal) -> np.ndarray:
    """In-plane reference for measuring angles about ``normal``.

    The global axis least aligned with ``normal`` is projected into the
    tangent plane and normalized. The least-aligned component is at most
    1/sqrt(3) in magnitude, so the projection never degenerates.
    """
    n = np.asarray(normal, dtype=np.float64)
    axis = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[axis] = 1.0
    w = e - (e @ n) * n
    return w / np.linalg.norm(w)


def plane_angle(p, origin, normal, reference) -> float:
    """Counterclockwise angle of ``p`` about ``normal``, in [0, 2*pi).

    ``p`` is projected into the plane through ``origin``; the angle is
    measured from ``reference``, which must lie in the plane and be nonzero.

    Raises
    ------
    DegenerateProjection
        If ``p`` projects onto (nearly) the origin; the caller must perturb
        or reject such a neighbor.
    """
    p = np.asarray(p, dtype=np.float64)
    origin = np.asarray(origin, dtype=np.float64)
    normal = np.asarray(normal, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    d = p - origin
    w = d - (d @ normal) * normal
    if float(w @ w) < EPS * EPS:
        raise DegenerateProjection("direction projects onto the plane origin")
    s = float(np.cross(normal, reference) @ w)
    c = float(reference @ w)
    return float(np.arctan2(s, c)) % TWO_PI


def triangle_angles(p0, p1, p2) -> tuple[float, float, float]:
    """Interior angles of the triangle (p0, p1, p2), in radians.

    Raises
    ------
    DegenerateTriangle
        If any side is shorter than the degeneracy threshold.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    p2 = np.asarray(p2, dtype=np.float64)
    u = p1 - p0
    v = p2 - p0
    w = p2 - p1
    for side in (u, v, w):
        if float(side @ side) < EPS * EPS:
            raise DegenerateTriangle("triangle has a near-zero side")
    # atan2 of (|cross|, dot) is accurate for both tiny and near-pi angles
    a0 = np.arctan2(np.linalg.norm(np.cross(u, v)), float(u @ v))
    a1 = np.arctan2(np.linalg.norm(np.cross(w, -u)), float(w @ -u))
    a2 = np.arctan2(np.linalg.norm(np.cross(-v, -w)), float(-v @ -w))
    return float(a0), float(a1), float(a2)


@jit
def _orient2d(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@jit
def _on_segment(px, py, qx, qy, rx, ry):
    # assumes r collinear with pq; bounding-box containment
    lo = px if px < qx else qx
    hi = px if px > qx else qx
    if rx < lo or rx > hi:
        return False
    lo = py if py < qy else qy
    hi = py if py > qy else qy
    return lo <= ry <= hi


@jit
def _seg_isect(ax, ay, bx, by, cx, cy, dx, dy, ia, ib, ic, idd):
    """Closed-segment intersection with the shared-vertex exemption.

    Segment 1 is (a, b) with vertex ids (ia, ib), segment 2 is (c, d) with
    (ic, idd). Sharing exactly one vertex id is contact, not intersection,
    unless the segments additionally overlap collinearly beyond the shared
    point. Coincident coordinates under distinct ids still intersect.
    """
    share_a = ia == ic or ia == idd
    share_b = ib == ic or ib == idd
    if share_a and share_b:
        return True
    if share_a or share_b:
        if share_a:
            sx, sy = ax, ay
            o1x, o1y = bx, by
            other_is_d = ia == ic
        else:
            sx, sy = bx, by
            o1x, o1y = ax, ay
            other_is_d = ib == ic
        if other_is_d:
            o2x, o2y = dx, dy
        else:
            o2x, o2y = cx, cy
        u1x = o1x - sx
        u1y = o1y - sy
        u2x = o2x - sx
        u2y = o2y - sy
        cr = u1x * u2y - u1y * u2x
        dt = u1x * u2x + u1y * u2y
        l1 = np.sqrt(u1x * u1x + u1y * u1y)
        l2 = np.sqrt(u2x * u2x + u2y * u2y)
        # collinear overlap of positive length counts as intersecting
        return abs(cr) <= EPS * l1 * l2 and dt > 0.0
    d1 = _orient2d(cx, cy, dx, dy, ax, ay)
    d2 = _orient2d(cx, cy, dx, dy, bx, by)
    d3 = _orient2d(ax, ay, bx, by, cx, cy)
    d4 = _orient2d(ax, ay, bx, by, dx, dy)
    if ((d1 > 0.0 and d2 < 0.0) or (d1 < 0.0 and d2 > 0.0)) and (
        (d3 > 0.0 and d4 < 0.0) or (d3 < 0.0 and d4 > 0.0)
    ):
        return True
    if d1 == 0.0 and _on_segment(cx, cy, dx, dy, ax, ay):
        return True
    if d2 == 0.0 and _on_segment(cx, cy, dx, dy, bx, by):
        return True
    if d3 == 0.0 and _on_segment(ax, ay, bx, by, cx, cy):
        return True
    if d4 == 0.0 and _on_segment(ax, ay, bx, by, dx, dy):
        return True
    return False


def segments_intersect_2d(a1, a2, b1, b2, ids=None) -> bool:
    """Do the closed 2D segments (a1, a2) and (b1, b2) intersect?

    ``ids``, when given, is ``(ia1, ia2, ib1, ib2)``: the vertex indices of
    the four endpoints. Segments sharing exactly one vertex index (identical
    index, not merely coincident coordinates) do not count as intersecting
    unless they overlap collinearly beyond the shared point. Without ids all
    endpoints are treated as distinct vertices.
    """
    if ids is None:
        ids = (-1, -2, -3, -4)
    ia, ib, ic, idd = (int(x) for x in ids)
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    b1 = np.asarray(b1, dtype=np.float64)
    b2 = np.asarray(b2, dtype=np.float64)
    return bool(
        _seg_isect(
            a1[0], a1[1], a2[0], a2[1], b1[0], b1[1], b2[0], b2[1], ia, ib, ic, idd
        )
    )
