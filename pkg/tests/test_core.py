"""Geometry primitives against independent oracles."""

import numpy as np
import pytest

from rotmesh.core import (
    Params,
    plane_angle,
    project_to_plane,
    reference_direction,
    segments_intersect_2d,
    triangle_angles,
    unit,
)
from rotmesh.errors import ConfigError, DegenerateProjection, DegenerateTriangle

TWO_PI = 2.0 * np.pi


def angle_close(a, b, tol=1e-9):
    d = (a - b + np.pi) % TWO_PI - np.pi
    return abs(d) <= tol


# ---------------------------------------------------------------- projection


def test_project_fixed_point():
    p = np.array([3.0, -1.0, 0.0])
    assert np.allclose(project_to_plane(p, [0, 0, 0], [0, 0, 1]), p)


def test_project_pure_normal_offset():
    origin = np.array([1.0, 2.0, 3.0])
    n = unit([1.0, 1.0, 1.0])
    assert np.allclose(project_to_plane(origin + n, origin, n), origin)


def test_project_axis_aligned():
    assert np.allclose(project_to_plane([1, 2, 3], [0, 0, 0], [0, 0, 1]), [1, 2, 0])


def test_project_idempotent():
    rng = np.random.default_rng(11)
    for _ in range(200):
        p = rng.normal(size=3) * 10
        origin = rng.normal(size=3)
        n = unit(rng.normal(size=3))
        q = project_to_plane(p, origin, n)
        assert np.allclose(project_to_plane(q, origin, n), q, atol=1e-12)


# --------------------------------------------------------------- plane angle


def test_plane_angle_of_reference_is_zero():
    assert plane_angle([2, 0, 0], [0, 0, 0], [0, 0, 1], [1, 0, 0]) == 0.0


def test_plane_angle_quarter_turn():
    a = plane_angle([0, 1, 0], [0, 0, 0], [0, 0, 1], [1, 0, 0])
    assert angle_close(a, np.pi / 2)


def test_plane_angle_matches_explicit_frame():
    # oracle: build an orthonormal basis by hand and use atan2 directly
    rng = np.random.default_rng(23)
    for _ in range(500):
        n = unit(rng.normal(size=3))
        w = rng.normal(size=3)
        b1 = unit(w - (w @ n) * n)
        b2 = np.cross(n, b1)
        origin = rng.normal(size=3)
        x, y = rng.normal(size=2) * 5
        z = rng.normal() * 5
        p = origin + x * b1 + y * b2 + z * n
        if x * x + y * y < 1e-12:
            continue
        expected = np.arctan2(y, x) % TWO_PI
        got = plane_angle(p, origin, n, b1)
        assert 0.0 <= got < TWO_PI
        assert angle_close(got, expected)


def test_plane_angle_degenerate_raises():
    with pytest.raises(DegenerateProjection):
        plane_angle([0, 0, 5], [0, 0, 0], [0, 0, 1], [1, 0, 0])


def test_reference_direction_in_plane():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = unit(rng.normal(size=3))
        ref = reference_direction(n)
        assert abs(ref @ n) < 1e-12
        assert abs(ref @ ref - 1.0) < 1e-12


# ------------------------------------------------------- segment intersection


def _pt_seg_dist(p, a, b):
    d = b - a
    den = float(d @ d)
    if den == 0.0:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ d / den, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * d)))


def _seg_min_dist(a1, a2, b1, b2):
    """Brute-force parametric solver: solve for the crossing of the two
    parametric lines; fall back to endpoint-to-segment distances."""
    d1 = a2 - a1
    d2 = b2 - b1
    best = min(
        _pt_seg_dist(a1, b1, b2),
        _pt_seg_dist(a2, b1, b2),
        _pt_seg_dist(b1, a1, a2),
        _pt_seg_dist(b2, a1, a2),
    )
    det = d1[0] * d2[1] - d1[1] * d2[0]
    if det != 0.0:
        r = b1 - a1
        t = (r[0] * d2[1] - r[1] * d2[0]) / det
        s = (r[0] * d1[1] - r[1] * d1[0]) / det
        if 0.0 <= t <= 1.0 and 0.0 <= s <= 1.0:
            return 0.0, t, s
        return best, t, s
    return best, -1.0, -1.0


def test_segments_crossing_x():
    assert segments_intersect_2d([-1, -1], [1, 1], [-1, 1], [1, -1])


def test_segments_shared_vertex_not_intersecting():
    # same vertex index at the contact point: adjacency, not intersection
    assert not segments_intersect_2d(
        [0, 0], [1, 0], [0, 0], [0, 1], ids=(7, 8, 7, 9)
    )


def test_segments_coincident_point_distinct_ids_intersects():
    assert segments_intersect_2d([0, 0], [1, 0], [0, 0], [0, 1], ids=(7, 8, 3, 9))


def test_segments_collinear_overlap_through_shared_vertex():
    # overlap of positive length counts even with a shared index
    assert segments_intersect_2d([0, 0], [2, 0], [0, 0], [1, 0], ids=(1, 2, 1, 3))
    # pointing away from the shared vertex: contact only
    assert not segments_intersect_2d([0, 0], [2, 0], [0, 0], [-1, 0], ids=(1, 2, 1, 3))


def test_segments_identical_edge_intersects():
    assert segments_intersect_2d([0, 0], [2, 0], [0, 0], [2, 0], ids=(1, 2, 1, 2))


def test_segments_touching_t_shape():
    assert segments_intersect_2d([-1, 0], [1, 0], [0, 0], [0, 1])


def test_segments_disjoint():
    assert not segments_intersect_2d([0, 0], [1, 0], [0, 1], [1, 1])


def test_segments_agree_with_parametric_oracle():
    rng = np.random.default_rng(97)
    checked = 0
    for _ in range(10_000):
        pts = rng.uniform(-1, 1, size=(4, 2))
        a1, a2, b1, b2 = pts
        dist, t, s = _seg_min_dist(a1, a2, b1, b2)
        # skip cases too close to the decision boundary for a float oracle
        if 0.0 < dist < 1e-9:
            continue
        if dist == 0.0 and min(t, s, 1 - t, 1 - s) < 1e-12:
            continue
        got = segments_intersect_2d(a1, a2, b1, b2)
        assert got == (dist == 0.0), (a1, a2, b1, b2, dist, t, s)
        checked += 1
    assert checked > 9_000


def test_segments_symmetric():
    rng = np.random.default_rng(3)
    for _ in range(300):
        pts = rng.uniform(-1, 1, size=(4, 2))
        a1, a2, b1, b2 = pts
        base = segments_intersect_2d(a1, a2, b1, b2)
        assert segments_intersect_2d(a2, a1, b1, b2, ids=(-2, -1, -3, -4)) == base
        assert segments_intersect_2d(a1, a2, b2, b1, ids=(-1, -2, -4, -3)) == base
        assert segments_intersect_2d(b1, b2, a1, a2, ids=(-3, -4, -1, -2)) == base


# ------------------------------------------------------------ triangle angles


def test_triangle_equilateral():
    a = triangle_angles([0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0])
    assert np.allclose(a, np.pi / 3)


def test_triangle_right_isoceles():
    a0, a1, a2 = triangle_angles([0, 0, 0], [1, 0, 0], [0, 1, 0])
    assert angle_close(a0, np.pi / 2)
    assert angle_close(a1, np.pi / 4)
    assert angle_close(a2, np.pi / 4)


def test_triangle_angle_sum():
    rng = np.random.default_rng(41)
    for _ in range(500):
        p = rng.normal(size=(3, 3)) * 10
        if min(
            np.linalg.norm(p[0] - p[1]),
            np.linalg.norm(p[1] - p[2]),
            np.linalg.norm(p[0] - p[2]),
        ) < 1e-6:
            continue
        angles = triangle_angles(*p)
        assert abs(sum(angles) - np.pi) < 1e-9


def test_triangle_degenerate_raises():
    with pytest.raises(DegenerateTriangle):
        triangle_angles([0, 0, 0], [0, 0, 0], [1, 0, 0])


# ------------------------------------------------------------------- params


def test_params_defaults():
    p = Params()
    assert (p.k, p.r, p.theta_deg, p.n) == (30, 20.0, 60.0, 50)
    assert p.max_genus is None and not p.noisy


def test_params_cos_theta():
    assert abs(Params(theta_deg=60).cos_theta - 0.5) < 1e-12


@pytest.mark.parametrize(
    "kw",
    [
        {"k": 1},
        {"r": 0.0},
        {"r": -2.0},
        {"theta_deg": 0.0},
        {"theta_deg": 200.0},
        {"n": -1},
        {"max_genus": -1},
        {"quality_min_deg": 90.0, "quality_max_deg": 80.0},
    ],
)
def test_params_validation(kw):
    with pytest.raises(ConfigError):
        Params(**kw)
