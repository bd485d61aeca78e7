"""Exact intersection area of triangles (and meshes) with a disk."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .spline_geometry import MeshGrid

# grazing contact (half-chord below TANGENCY_TOL * r) counts as no intersection
TANGENCY_TOL = 1e-12


class DegenerateTriangleWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ObstacleCircle:
    midpoint: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "midpoint", (float(self.midpoint[0]), float(self.midpoint[1])))

    @property
    def area(self) -> float:
        return math.pi * self.radius**2


def _cross(a, b) -> float:
    return a[0] * b[1] - a[1] * b[0]


def _sector(a, b, r: float) -> float:
    """Signed area of the circular sector spanned by directions ``a`` and ``b``."""
    return 0.5 * r * r * math.atan2(_cross(a, b), a[0] * b[0] + a[1] * b[1])


def _fan_area(a: np.ndarray, b: np.ndarray, r: float) -> float:
    """Signed area of disk(0, r) intersected with triangle (0, a, b)."""
    d = b - a
    dd = d @ d
    if dd == 0.0:
        return 0.0
    ad = a @ d
    c = a @ a - r * r
    # half-chord^2 along the supporting line, in units of length^2
    h2 = (ad * ad - dd * c) / dd
    if h2 <= (TANGENCY_TOL * r) ** 2:
        return _sector(a, b, r)
    s = math.sqrt(h2 * dd)
    t1 = (-ad - s) / dd
    t2 = (-ad + s) / dd
    if t2 <= 0.0 or t1 >= 1.0:
        return _sector(a, b, r)
    t1 = max(t1, 0.0)
    t2 = min(t2, 1.0)
    p = a + t1 * d
    q = a + t2 * d
    area = 0.5 * _cross(p, q)
    if t1 > 0.0:
        area += _sector(a, p, r)
    if t2 < 1.0:
        area += _sector(q, b, r)
    return area


def triangle_circle_area(tri, circle: ObstacleCircle) -> float:
    """Area of ``tri`` (3x2 vertex array) inside ``circle``."""
    pts = np.asarray(tri, dtype=float) - np.asarray(circle.midpoint)
    tri_area = 0.5 * _cross(pts[1] - pts[0], pts[2] - pts[0])
    if abs(tri_area) <= 1e-300 or not np.isfinite(tri_area):
        warnings.warn("degenerate triangle, intersection area set to 0", DegenerateTriangleWarning)
        return 0.0
    r = circle.radius
    total = 0.0
    for k in range(3):
        total += _fan_area(pts[k], pts[(k + 1) % 3], r)
    area = abs(total)
    return min(area, abs(tri_area), circle.area)


def shape_circle_area(mesh: MeshGrid, circle: ObstacleCircle) -> float:
    """Sum of element/disk intersection areas over the mesh."""
    return float(element_circle_areas(mesh, circle).sum())


def element_circle_areas(mesh: MeshGrid, circle: ObstacleCircle) -> np.ndarray:
    p = mesh.nodes[mesh.triangles] - np.asarray(circle.midpoint)
    r = circle.radius
    out = np.zeros(len(p))
    lo = p.min(axis=1)
    hi = p.max(axis=1)
    near = np.all(lo < r, axis=1) & np.all(hi > -r, axis=1)
    inside = near & np.all(np.einsum("eki,eki->ek", p, p) <= r * r, axis=1)
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    out[inside] = 0.5 * np.abs(e1[inside, 0] * e2[inside, 1] - e1[inside, 1] * e2[inside, 0])
    origin = ObstacleCircle((0.0, 0.0), r)
    for e in np.nonzero(near & ~inside)[0]:
        out[e] = triangle_circle_area(p[e], origin)
    return out
