"""Planar geometry primitives: points, polygons, boxes, homographies, flows.

Coordinates are continuous pixels, origin at the top-left corner, x to the
right, y downward. Polygons are normalized to clockwise vertex order under
this convention (positive shoelace sum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from vtforge import _kernels


class GeometryError(ValueError):
    """Invalid geometric input."""


@dataclass(frozen=True)
class Point2:
    """A 2D point in pixel coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class AABox:
    """Axis-aligned box with x0 <= x1 and y0 <= y1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        vals = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(v) for v in vals):
            raise GeometryError(f"non-finite box {vals}")
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise GeometryError(f"box corners out of order {vals}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point2:
        return Point2((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)


def _signed_area2(pts: Sequence[tuple]) -> float:
    total = 0.0
    qx, qy = pts[-1]
    for px, py in pts:
        total += qx * py - px * qy
        qx, qy = px, py
    return total


def _segments_cross(a, b, c, d) -> bool:
    """Proper intersection test for segments ab and cd."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    return ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and \
        o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0


class Polygon:
    """Simple polygon with >= 3 vertices, stored clockwise (image coords).

    Construction rejects degenerate (zero-area) and self-intersecting
    input, and reverses counter-clockwise vertex lists.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices: Iterable):
        pts = [(float(p[0]), float(p[1])) for p in vertices]
        if len(pts) < 3:
            raise GeometryError(f"polygon needs >= 3 vertices, got {len(pts)}")
        for x, y in pts:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise GeometryError(f"non-finite vertex ({x}, {y})")
        signed2 = _signed_area2(pts)
        if signed2 == 0.0:
            raise GeometryError("degenerate polygon (zero area)")
        if signed2 < 0.0:
            pts.reverse()
        n = len(pts)
        for i in range(n):
            a, b = pts[i], pts[(i + 1) % n]
            if a == b:
                raise GeometryError("repeated consecutive vertex")
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue
                c, d = pts[j], pts[(j + 1) % n]
                if _segments_cross(a, b, c, d):
                    raise GeometryError("self-intersecting polygon")
        self.vertices = tuple(Point2(x, y) for x, y in pts)

    def __len__(self):
        return len(self.vertices)

    def __iter__(self):
        return iter(self.vertices)

    def __eq__(self, other):
        return isinstance(other, Polygon) and self.vertices == other.vertices

    def __hash__(self):
        return hash(self.vertices)

    def __repr__(self):
        coords = ", ".join(f"({p.x:g}, {p.y:g})" for p in self.vertices)
        return f"Polygon([{coords}])"

    def as_array(self) -> np.ndarray:
        return np.array([(p.x, p.y) for p in self.vertices], dtype=np.float64)

    def is_convex(self) -> bool:
        pts = self.vertices
        n = len(pts)
        for i in range(n):
            a, b, c = pts[i], pts[(i + 1) % n], pts[(i + 2) % n]
            cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x)
            if cross < 0.0:
                return False
        return True


class Homography:
    """3x3 invertible projective transform, normalized on construction.

    Normalization: divide by the bottom-right entry when its magnitude
    exceeds 1e-9, otherwise scale to unit Frobenius norm.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.array(matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise GeometryError(f"homography must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise GeometryError("non-finite homography entries")
        if abs(m[2, 2]) > 1e-9:
            m = m / m[2, 2]
        else:
            norm = float(np.linalg.norm(m))
            if norm == 0.0:
                raise GeometryError("zero homography matrix")
            m = m / norm
        if abs(float(np.linalg.det(m))) <= 1e-12:
            raise GeometryError("non-invertible homography")
        m.flags.writeable = False
        self.matrix = m

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "Homography":
        return cls([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def __matmul__(self, other: "Homography") -> "Homography":
        return Homography(self.matrix @ other.matrix)

    def __repr__(self):
        return f"Homography({self.matrix.tolist()})"

    def apply_array(self, points: np.ndarray) -> np.ndarray:
        """Map an (n, 2) array of points; raises on points at infinity."""
        pts = np.asarray(points, dtype=np.float64)
        ones = np.ones((pts.shape[0], 1))
        q = np.hstack([pts, ones]) @ self.matrix.T
        w = q[:, 2]
        if np.any(np.abs(w) < 1e-12):
            raise GeometryError("point maps to infinity under homography")
        return q[:, :2] / w[:, None]


class FlowField:
    """Dense per-pixel displacement grid (u right, v down), float32 storage."""

    __slots__ = ("width", "height", "u", "v", "_u64", "_v64")

    def __init__(self, u, v):
        u = np.asarray(u, dtype=np.float32)
        v = np.asarray(v, dtype=np.float32)
        if u.ndim != 2 or u.shape != v.shape:
            raise GeometryError(f"flow grids must share a 2D shape: {u.shape} vs {v.shape}")
        if u.shape[0] < 1 or u.shape[1] < 1:
            raise GeometryError("flow field needs positive dimensions")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise GeometryError("non-finite flow values")
        self.height, self.width = u.shape
        self.u = u
        self.v = v
        self._u64 = None
        self._v64 = None

    @classmethod
    def zeros(cls, width: int, height: int) -> "FlowField":
        return cls(np.zeros((height, width), np.float32), np.zeros((height, width), np.float32))

    def grids64(self):
        if self._u64 is None:
            self._u64 = self.u.astype(np.float64)
            self._v64 = self.v.astype(np.float64)
        return self._u64, self._v64

    def sample_many(self, xs: np.ndarray, ys: np.ndarray):
        """Bilinear displacement at many points; no bounds checking."""
        u64, v64 = self.grids64()
        return _kernels.bilinear_sample(u64, v64, xs, ys)


def polygon_area(p: Polygon) -> float:
    """Absolute shoelace area in square pixels."""
    return abs(_signed_area2([(v.x, v.y) for v in p.vertices])) * 0.5


def aabb(p: Polygon) -> AABox:
    """Tightest axis-aligned box containing all vertices."""
    xs = [v.x for v in p.vertices]
    ys = [v.y for v in p.vertices]
    return AABox(min(xs), min(ys), max(xs), max(ys))


def _intersection_area(a: AABox, b: AABox) -> float:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def iou_aabb(a: AABox, b: AABox) -> float:
    """Intersection over union of two boxes; errors when both are degenerate."""
    union = a.area + b.area
    if union == 0.0:
        raise GeometryError("IoU undefined for two zero-area boxes")
    inter = _intersection_area(a, b)
    return inter / (union - inter)


def giou(a: AABox, b: AABox) -> float:
    """Generalized IoU: IoU minus enclosing-box slack, in (-1, 1]."""
    if a.area <= 0.0 or b.area <= 0.0:
        raise GeometryError("GIoU requires boxes with positive area")
    inter = _intersection_area(a, b)
    union = a.area + b.area - inter
    hull = AABox(min(a.x0, b.x0), min(a.y0, b.y0), max(a.x1, b.x1), max(a.y1, b.y1))
    return inter / union - (hull.area - union) / hull.area


def points_in_polygon(xs: np.ndarray, ys: np.ndarray, p: Polygon) -> np.ndarray:
    """Even-odd point-in-polygon test, vectorized over the query points."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    inside = np.zeros(xs.shape, dtype=bool)
    verts = p.as_array()
    n = len(verts)
    j = n - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(n):
            xi, yi = verts[i]
            xj, yj = verts[j]
            crosses = (yi > ys) != (yj > ys)
            xcut = (xj - xi) * (ys - yi) / (yj - yi) + xi
            inside ^= crosses & (xs < xcut)
            j = i
    return inside


def _raster_iou(a: Polygon, b: Polygon) -> float:
    """Overlap estimate by counting 1-px cells over the joint bounding box."""
    ba, bb = aabb(a), aabb(b)
    x0 = math.floor(min(ba.x0, bb.x0))
    y0 = math.floor(min(ba.y0, bb.y0))
    x1 = math.ceil(max(ba.x1, bb.x1))
    y1 = math.ceil(max(ba.y1, bb.y1))
    xs = np.arange(x0, x1) + 0.5
    ys = np.arange(y0, y1) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    in_a = points_in_polygon(gx, gy, a)
    in_b = points_in_polygon(gx, gy, b)
    inter = int(np.sum(in_a & in_b))
    union = int(np.sum(in_a | in_b))
    if union == 0:
        return 0.0
    return inter / union


def polygon_iou(a: Polygon, b: Polygon) -> float:
    """Polygon intersection over union.

    Convex pairs use exact half-plane clipping; anything else falls back to
    a 1-px rasterized estimate over the joint bounding box.
    """
    if a.is_convex() and b.is_convex():
        inter = _kernels.convex_clip_area(a.as_array(), b.as_array())
        union = polygon_area(a) + polygon_area(b) - inter
        if union <= 0.0:
            raise GeometryError("polygon union has zero area")
        if inter <= 1e-12 * union:
            return 0.0
        return inter / union
    return _raster_iou(a, b)


def apply_homography(h: Homography, p: Point2) -> Point2:
    """Projective action on a point, dividing by the homogeneous coordinate."""
    m = h.matrix
    w = m[2, 0] * p.x + m[2, 1] * p.y + m[2, 2]
    if abs(w) < 1e-12:
        raise GeometryError("point maps to infinity under homography")
    x = (m[0, 0] * p.x + m[0, 1] * p.y + m[0, 2]) / w
    y = (m[1, 0] * p.x + m[1, 1] * p.y + m[1, 2]) / w
    return Point2(x, y)


def transform_polygon(h: Homography, p: Polygon) -> Polygon:
    """Map every vertex of a polygon through a homography."""
    return Polygon([tuple(apply_homography(h, v)) for v in p.vertices])


def sample_flow(f: FlowField, p: Point2):
    """Bilinear displacement lookup at a point inside the grid.

    Returns (du, dv). Errors for points outside [0, w-1] x [0, h-1]; the
    caller decides its own drop policy for out-of-bounds samples.
    """
    if not (0.0 <= p.x <= f.width - 1 and 0.0 <= p.y <= f.height - 1):
        raise GeometryError(f"flow sample out of bounds: ({p.x}, {p.y})")
    du, dv = f.sample_many(np.array([p.x]), np.array([p.y]))
    return float(du[0]), float(dv[0])
