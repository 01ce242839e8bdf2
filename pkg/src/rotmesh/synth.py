"""Synthetic fixtures and controlled corruption for the test harness.

Samplers produce clouds with analytic normals; injectors model sensor
defects. Everything is deterministic under a fixed seed, and the noisy
cloud a generator returns is treated as the input itself: its
original_positions are the noisy coordinates, not the clean ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .core import EPS, TWO_PI, reference_direction
from .errors import ConfigError

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0

NOISE_MODES = ("full", "tangential", "normal-only")


@dataclass(frozen=True)
class NoiseSpec:
    """Scale-free position noise: offset = amplitude * e_bar * g * v."""

    amplitude: float
    mode: str = "full"
    seed: int = 0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigError("noise amplitude must be >= 0")
        if self.mode not in NOISE_MODES:
            raise ConfigError(f"noise mode must be one of {NOISE_MODES}")


def _rotation(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def sample_sphere(n: int, seed=None) -> PointCloud:
    """Fibonacci lattice on the unit sphere; normals point outward.

    A seed applies a random global rotation (the lattice itself is fixed).
    """
    if n < 4:
        raise ConfigError("sphere sample needs n >= 4")
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    rxy = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    ang = TWO_PI * i / _GOLDEN
    pts = np.column_stack([rxy * np.cos(ang), rxy * np.sin(ang), z])
    if seed is not None:
        pts = pts @ _rotation(np.random.default_rng(seed)).T
    # renormalize so the invariant holds to the last ulp after rotation
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return PointCloud(pts, pts.copy())


def sample_torus(n: int, big_radius: float = 2.0, tube_radius: float = 0.7,
                 seed=None) -> PointCloud:
    """Torus lattice with one sparse seam and analytic normals.

    Rings around the tube are spaced to match the tube arc step; each ring
    gets a point budget proportional to its circumference (largest
    remainder, so the total is exactly n) and a half-step stagger against
    its neighbor, giving a brick-like lattice of roughly unit aspect. The
    sweep angle is warped to stretch spacing ~20% around u=0 and tighten it
    opposite, the way a scan seam thins out: ring budgets differ, so the
    seam rims zigzag instead of lining up. A seed applies global parameter
    shifts.
    """
    if not big_radius > tube_radius > 0:
        raise ConfigError("torus needs big_radius > tube_radius > 0")
    if n < 4:
        raise ConfigError("torus sample needs n >= 4")
    R, r = float(big_radius), float(tube_radius)
    n_rings = max(3, int(round(np.sqrt(n * r / R))))
    dv = du = 0.0
    if seed is not None:
        rng = np.random.default_rng(seed)
        dv, du = rng.uniform(0.0, 1.0, size=2)
    v = TWO_PI * (np.arange(n_rings) + dv) / n_rings
    weight = R + r * np.cos(v)
    share = n * weight / weight.sum()
    counts = np.floor(share).astype(np.int64)
    frac_order = np.argsort(-(share - counts), kind="stable")
    counts[frac_order[: n - int(counts.sum())]] += 1
    seam = 0.2
    us, vs = [], []
    for i in range(n_rings):
        m = int(counts[i])
        if m == 0:
            continue
        stagger = 0.5 * (i % 2)
        base = TWO_PI * (np.arange(m) + stagger + du) / m
        us.append(base + seam * np.sin(base))
        vs.append(np.full(m, v[i]))
    u = np.concatenate(us)
    v = np.concatenate(vs)
    cv, sv = np.cos(v), np.sin(v)
    cu, su = np.cos(u), np.sin(u)
    w = R + r * cv
    pts = np.column_stack([w * cu, w * su, r * sv])
    normals = np.column_stack([cv * cu, cv * su, sv])
    return PointCloud(pts, normals)


def sample_two_sheets(n: int, gap: float) -> PointCloud:
    """Two parallel unit-spacing square grids, offset by gap along z.

    The top sheet faces +z, the bottom faces -z, so the sheets are
    back to back the way two close scanned surfaces are. Returns the
    nearest even grid count to n (two s-by-s sheets).
    """
    if gap <= 0:
        raise ConfigError("gap must be positive")
    s = max(2, int(round(np.sqrt(n / 2.0))))
    jj, ii = np.meshgrid(np.arange(s, dtype=np.float64),
                         np.arange(s, dtype=np.float64))
    sheet = np.column_stack([jj.ravel(), ii.ravel(), np.zeros(s * s)])
    top = sheet.copy()
    top[:, 2] = gap / 2.0
    bot = sheet.copy()
    bot[:, 2] = -gap / 2.0
    pts = np.vstack([top, bot])
    normals = np.zeros_like(pts)
    normals[: s * s, 2] = 1.0
    normals[s * s :, 2] = -1.0
    return PointCloud(pts, normals)


def _unit_rows(a, fallback_dirs):
    norms = np.linalg.norm(a, axis=1)
    bad = norms < 1e-12
    if bad.any():
        a = a.copy()
        a[bad] = fallback_dirs[bad]
        norms = np.linalg.norm(a, axis=1)
    return a / norms[:, None]


def add_position_noise(cloud: PointCloud, spec: NoiseSpec, e_bar: float) -> PointCloud:
    """Offset every point by amplitude * e_bar * g * v, g ~ N(0,1).

    v is a uniform random unit direction, restricted by the mode to the
    tangent plane or the normal line. Normals are carried over unchanged:
    they describe the clean surface, as if computed before the corruption.
    """
    if e_bar <= 0:
        raise ConfigError("e_bar must be positive")
    if spec.mode != "full" and cloud.normals is None:
        raise ConfigError(f"{spec.mode} noise needs normals")
    n = len(cloud)
    rng = np.random.default_rng(spec.seed)
    g = rng.standard_normal(n)
    v = rng.standard_normal((n, 3))
    if spec.mode == "normal-only":
        v = cloud.normals.copy()
    else:
        if spec.mode == "tangential":
            nrm = cloud.normals
            v = v - np.einsum("ij,ij->i", v, nrm)[:, None] * nrm
            fallback = np.array([reference_direction(x) for x in nrm])
        else:
            fallback = np.tile([1.0, 0.0, 0.0], (n, 1))
        v = _unit_rows(v, fallback)
    pts = cloud.positions + (spec.amplitude * e_bar) * g[:, None] * v
    normals = None if cloud.normals is None else cloud.normals.copy()
    return PointCloud(pts, normals)


def add_normal_noise(cloud: PointCloud, theta_deg: float, seed: int = 0) -> PointCloud:
    """Tilt each normal by an angle uniform in [0, theta_deg].

    The rotation axis is a random direction orthogonal to the original
    normal, so the tilted normal makes exactly the drawn angle with it.
    Positions are untouched.
    """
    if cloud.normals is None:
        raise ConfigError("normal noise needs normals")
    if theta_deg < 0:
        raise ConfigError("theta must be >= 0")
    n = len(cloud)
    nrm = cloud.normals
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0.0, np.radians(theta_deg), n)
    axis = rng.standard_normal((n, 3))
    axis = axis - np.einsum("ij,ij->i", axis, nrm)[:, None] * nrm
    fallback = np.array([reference_direction(x) for x in nrm]) if n else axis
    axis = _unit_rows(axis, fallback)
    # axis is orthogonal to nrm, so Rodrigues reduces to two terms
    tilted = nrm * np.cos(ang)[:, None] + np.cross(axis, nrm) * np.sin(ang)[:, None]
    return PointCloud(cloud.positions.copy(), tilted)


def displace_subset(cloud: PointCloud, indices, amplitude: float, e_bar: float,
                    direction) -> PointCloud:
    """Rigidly shift the selected points by amplitude * e_bar * direction."""
    if e_bar <= 0:
        raise ConfigError("e_bar must be positive")
    idx = np.asarray(indices, dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= len(cloud)):
        raise ConfigError("displacement indices out of range")
    d = np.asarray(direction, dtype=np.float64)
    if d.shape != (3,):
        raise ConfigError("direction must be a 3-vector")
    pts = cloud.positions.copy()
    pts[idx] += amplitude * e_bar * d
    normals = None if cloud.normals is None else cloud.normals.copy()
    return PointCloud(pts, normals)
