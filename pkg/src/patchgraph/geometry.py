"""Planar geometry: homography application, oriented boxes, convex polygons,
and convex-convex intersection/IoU.

All values are immutable after construction and all operations are pure, so
everything here is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import DegenerateInput, HorizonPoint, ValidationError

_W_EPS = 1e-12
_DET_EPS = 1e-12
_CONVEX_TOL = 1e-9


class Point2(NamedTuple):
    x: float
    y: float


def _as_point(p) -> Point2:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValidationError(f"non-finite point ({x}, {y})")
    return Point2(x, y)


@dataclass(frozen=True)
class Homography:
    """3x3 projective transform, normalized so m[2,2] == 1 when nonzero."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValidationError(f"homography must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("homography has non-finite entries")
        if abs(m[2, 2]) > _W_EPS:
            m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= _DET_EPS:
            raise DegenerateInput("homography is not invertible")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def from_flat(cls, values) -> "Homography":
        arr = np.asarray(list(values), dtype=np.float64)
        if arr.shape != (9,):
            raise ValidationError("flat homography must have 9 entries")
        return cls(arr.reshape(3, 3))

    def to_flat(self) -> list[float]:
        return [float(v) for v in self.m.reshape(-1)]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def __eq__(self, other):
        return isinstance(other, Homography) and np.array_equal(self.m, other.m)


@dataclass(frozen=True)
class OrientedBox:
    """BEV footprint of an agent: center, extent along heading, lateral
    extent, and heading angle in [-pi, pi)."""

    center: Point2
    length: float
    width: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center))
        if not (self.length > 0 and self.width > 0):
            raise ValidationError(
                f"box extents must be positive, got {self.length}x{self.width}")
        if not (math.isfinite(self.length) and math.isfinite(self.width)
                and math.isfinite(self.yaw)):
            raise ValidationError("box has non-finite fields")
        if not (-math.pi <= self.yaw < math.pi):
            raise ValidationError(f"yaw {self.yaw} outside [-pi, pi)")

    @property
    def area(self) -> float:
        return self.length * self.width

    def corners(self) -> np.ndarray:
        """4 corners in counter-clockwise order, shape (4, 2)."""
        out = np.empty((4, 2))
        _kernels.box_corners(self.center.x, self.center.y,
                             self.length, self.width, self.yaw, out)
        return out

    def polygon(self) -> "ConvexPolygon":
        return ConvexPolygon(self.corners())


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon with >= 3 counter-clockwise vertices.

    Clockwise input is reversed on construction; non-convex or degenerate
    input raises ValidationError.  Collinear vertices are tolerated within
    1e-9.
    """

    vertices: np.ndarray
    _area: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValidationError("polygon needs an (n>=3, 2) vertex array")
        if not np.all(np.isfinite(v)):
            raise ValidationError("polygon has non-finite vertices")
        area = _kernels.poly_area(v, v.shape[0])
        if area < 0:
            v = v[::-1].copy()
            area = -area
        if area <= _W_EPS:
            raise ValidationError("polygon area is not positive")
        edges = np.roll(v, -1, axis=0) - v
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] \
            - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.any(cross < -_CONVEX_TOL):
            raise ValidationError("polygon is not convex (ccw)")
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "_area", float(area))

    @property
    def area(self) -> float:
        return self._area

    @property
    def centroid(self) -> Point2:
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        w = v[:, 0] * nxt[:, 1] - nxt[:, 0] * v[:, 1]
        c = (v + nxt) * w[:, None]
        return Point2(*(c.sum(axis=0) / (6.0 * self._area)))

    @property
    def radius(self) -> float:
        """Radius of the smallest centroid-centered enclosing circle."""
        c = np.asarray(self.centroid)
        return float(np.max(np.hypot(*(self.vertices - c).T)))

    def contains(self, p, tol: float = 1e-9) -> bool:
        x, y = float(p[0]), float(p[1])
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        cross = (nxt[:, 0] - v[:, 0]) * (y - v[:, 1]) \
            - (nxt[:, 1] - v[:, 1]) * (x - v[:, 0])
        return bool(np.all(cross >= -tol))

    def scaled(self, factor: float) -> "ConvexPolygon":
        """Uniform scaling about the centroid."""
        c = np.asarray(self.centroid)
        return ConvexPolygon(c + factor * (self.vertices - c))

    def __eq__(self, other):
        return isinstance(other, ConvexPolygon) and \
            np.array_equal(self.vertices, other.vertices)


def project_point(h: Homography, p) -> Point2:
    """Apply a homography to a point; raises HorizonPoint when the point
    maps to infinity (|w| <= 1e-12)."""
    pt = _as_point(p)
    m = h.m
    w = m[2, 0] * pt.x + m[2, 1] * pt.y + m[2, 2]
    if abs(w) <= _W_EPS:
        raise HorizonPoint(f"point {pt} maps to the horizon")
    x = (m[0, 0] * pt.x + m[0, 1] * pt.y + m[0, 2]) / w
    y = (m[1, 0] * pt.x + m[1, 1] * pt.y + m[1, 2]) / w
    return Point2(x, y)


def project_box(h: Homography, box: OrientedBox) -> ConvexPolygon:
    """Project the 4 box corners; the result is re-ordered ccw.

    A box whose corners straddle the horizon (mixed homogeneous-w signs)
    has no planar image and raises HorizonPoint.
    """
    corners = box.corners()
    m = h.m
    ws = m[2, 0] * corners[:, 0] + m[2, 1] * corners[:, 1] + m[2, 2]
    if np.any(np.abs(ws) <= _W_EPS) or (np.any(ws > 0) and np.any(ws < 0)):
        raise HorizonPoint("box corners straddle or touch the horizon")
    projected = np.stack([project_point(h, c) for c in corners])
    return ConvexPolygon(projected)


def _canonical_pair(a: ConvexPolygon, b: ConvexPolygon):
    """Deterministic argument order so binary ops are exactly symmetric."""
    ka = (a.vertices.shape[0],) + tuple(a.vertices.reshape(-1))
    kb = (b.vertices.shape[0],) + tuple(b.vertices.reshape(-1))
    return (a, b) if ka <= kb else (b, a)


def intersection_area(a: ConvexPolygon, b: ConvexPolygon) -> float:
    """Exact area of a ∩ b by convex clipping; 0.0 for disjoint inputs."""
    p, q = _canonical_pair(a, b)
    return float(_kernels.clip_intersection_area(
        p.vertices, p.vertices.shape[0], q.vertices, q.vertices.shape[0]))


def iou(a: ConvexPolygon, b: ConvexPolygon) -> float:
    """Intersection over union, in [0, 1], exactly symmetric in a and b."""
    if a.area <= 1e-12 or b.area <= 1e-12:
        raise DegenerateInput("iou needs polygons with positive area")
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    value = inter / (a.area + b.area - inter)
    return min(max(value, 0.0), 1.0)


def polygon_min_distance(a: ConvexPolygon, b: ConvexPolygon) -> float:
    """Minimum distance between two polygons (0 when touching/overlapping)."""
    if a.contains(a.vertices[0]) and b.contains(a.vertices[0]):
        return 0.0
    if a.contains(b.vertices[0]):
        return 0.0
    best = math.inf
    for p, q in ((a, b), (b, a)):
        pv = p.vertices
        qv = q.vertices
        qn = np.roll(qv, -1, axis=0)
        for vert in pv:
            d = _point_segments_dist(vert, qv, qn)
            if d < best:
                best = d
    return float(best)


def _point_segments_dist(p, seg_a, seg_b) -> float:
    d = seg_b - seg_a
    len2 = np.einsum("ij,ij->i", d, d)
    len2 = np.where(len2 == 0.0, 1.0, len2)
    t = np.clip(np.einsum("ij,ij->i", p - seg_a, d) / len2, 0.0, 1.0)
    closest = seg_a + t[:, None] * d
    return float(np.min(np.hypot(*(closest - p).T)))


def segment_closest_points(p1, p2, q1, q2):
    """Closest pair of points between segments p1p2 and q1q2."""
    best = (math.inf, None, None)
    # Candidate set: each endpoint against the other segment.
    for a, (s1, s2) in ((p1, (q1, q2)), (p2, (q1, q2))):
        c = _closest_on_segment(a, s1, s2)
        d = math.hypot(a[0] - c[0], a[1] - c[1])
        if d < best[0]:
            best = (d, np.asarray(a, dtype=float), c)
    for a, (s1, s2) in ((q1, (p1, p2)), (q2, (p1, p2))):
        c = _closest_on_segment(a, s1, s2)
        d = math.hypot(a[0] - c[0], a[1] - c[1])
        if d < best[0]:
            best = (d, c, np.asarray(a, dtype=float))
    # Proper crossings beat all endpoint candidates.
    hit = _segment_intersection(p1, p2, q1, q2)
    if hit is not None:
        return 0.0, hit, hit
    return best


def _closest_on_segment(p, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    len2 = float(d @ d)
    if len2 == 0.0:
        return a
    t = min(max(float((np.asarray(p) - a) @ d) / len2, 0.0), 1.0)
    return a + t * d


def _segment_intersection(p1, p2, q1, q2):
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    r = p2 - p1
    s = q2 - q1
    denom = r[0] * s[1] - r[1] * s[0]
    if abs(denom) < 1e-15:
        return None
    qp = q1 - p1
    t = (qp[0] * s[1] - qp[1] * s[0]) / denom
    u = (qp[0] * r[1] - qp[1] * r[0]) / denom
    if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
        return p1 + t * r
    return None
