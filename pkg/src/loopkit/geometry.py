"""Planar box geometry: oriented/axis-aligned rectangles, IoU metrics and
similarity transforms.

Conventions: image coordinates (x right, y down), angles in radians in
[0, 2*pi), positive rotation is clockwise on screen (i.e. the usual atan2
orientation in y-down coordinates). Degrees appear only at file/CLI
boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

__all__ = [
    "TWO_PI",
    "GeometryError",
    "DegenerateBox",
    "DegenerateReconstruction",
    "Obb",
    "Aabb",
    "Similarity2",
    "obb_angle",
    "aabb_of_obb",
    "obb_aspect_ratio",
    "reconstruct_obb",
    "polygon_iou",
    "oriented_iou",
    "transform_obb",
    "wrap_angle",
]


class GeometryError(ValueError):
    """Base class for geometry failures."""


class DegenerateBox(GeometryError):
    """Box has a (near) zero-length edge or is not a rectangle."""


class DegenerateReconstruction(GeometryError):
    """The left-edge scaling constraint cannot be solved."""


def wrap_angle(theta: float) -> float:
    """Fold an angle into [0, 2*pi)."""
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:  # fmod can land exactly on 2*pi after the add
        t -= TWO_PI
    return t


# Relative tolerance for the rectangle invariants (side equality and
# orthogonality of adjacent edges).
_RECT_RTOL = 1e-6


@dataclass(frozen=True)
class Obb:
    """Oriented bounding box stored as 4 clockwise vertices p0..p3.

    Clockwise is meant on screen (y down); the first edge p1 - p0 defines
    the box orientation vector.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.shape != (4, 2):
            raise DegenerateBox(f"expected 4x2 vertex array, got shape {v.shape}")
        object.__setattr__(self, "vertices", v)
        (x0, y0), (x1, y1), (x2, y2), (x3, y3) = v.tolist()
        if not all(map(math.isfinite, (x0, y0, x1, y1, x2, y2, x3, y3))):
            raise DegenerateBox("non-finite vertex")
        ax, ay = x1 - x0, y1 - y0
        bx, by = x2 - x1, y2 - y1
        cx, cy = x3 - x2, y3 - y2
        dx, dy = x0 - x3, y0 - y3
        la = math.hypot(ax, ay)
        lb = math.hypot(bx, by)
        scale = max(la, lb)
        if la < 1e-12 or lb < 1e-12:
            raise DegenerateBox("zero-length edge")
        if abs(la - math.hypot(cx, cy)) > _RECT_RTOL * scale or abs(
            lb - math.hypot(dx, dy)
        ) > _RECT_RTOL * scale:
            raise DegenerateBox("opposite sides differ in length")
        if abs(ax * bx + ay * by) > _RECT_RTOL * la * lb:
            raise DegenerateBox("adjacent sides not orthogonal")
        if ax * by - ay * bx <= 0.0:
            raise DegenerateBox("vertices not in clockwise order")

    @classmethod
    def from_center_size_angle(
        cls, center, width: float, height: float, theta: float = 0.0
    ) -> "Obb":
        """Build a box from its center, full extents and orientation.

        ``width`` runs along the orientation vector (p0 -> p1), ``height``
        along p0 -> p3.
        """
        cx, cy = float(center[0]), float(center[1])
        hw, hh = 0.5 * float(width), 0.5 * float(height)
        c, s = math.cos(theta), math.sin(theta)
        verts = []
        for lx, ly in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)):
            verts.append((cx + lx * c - ly * s, cy + lx * s + ly * c))
        return cls(np.array(verts))

    @property
    def center(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def width(self) -> float:
        """Length of the first edge p0 -> p1."""
        d = self.vertices[1] - self.vertices[0]
        return float(math.hypot(d[0], d[1]))

    @property
    def height(self) -> float:
        """Length of the edge p0 -> p3."""
        d = self.vertices[3] - self.vertices[0]
        return float(math.hypot(d[0], d[1]))

    @property
    def area(self) -> float:
        return self.width * self.height

    def __eq__(self, other) -> bool:
        return isinstance(other, Obb) and np.array_equal(self.vertices, other.vertices)

    def allclose(self, other: "Obb", atol: float = 1e-6) -> bool:
        return bool(np.allclose(self.vertices, other.vertices, atol=atol, rtol=0.0))


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box: center (x, y) and full extents (w, h)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise DegenerateBox(f"non-positive extents {self.w} x {self.h}")

    @property
    def x_min(self) -> float:
        return self.x - 0.5 * self.w

    @property
    def x_max(self) -> float:
        return self.x + 0.5 * self.w

    @property
    def y_min(self) -> float:
        return self.y - 0.5 * self.h

    @property
    def y_max(self) -> float:
        return self.y + 0.5 * self.h

    def intersects(self, other: "Aabb") -> bool:
        return (
            self.x_min < other.x_max
            and other.x_min < self.x_max
            and self.y_min < other.y_max
            and other.y_min < self.y_max
        )


def _as_vec2(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(2)
    if not np.all(np.isfinite(a)):
        raise GeometryError("non-finite translation")
    return a


@dataclass(frozen=True)
class Similarity2:
    """4-DoF planar transform: uniform scale, rotation, translation.

    Applies as t(p) = scale * R(rotation) p + translation.
    """

    scale: float = 1.0
    rotation: float = 0.0
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "translation", _as_vec2(self.translation))
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise GeometryError(f"scale must be positive, got {self.scale}")
        if not math.isfinite(self.rotation):
            raise GeometryError("non-finite rotation")

    @classmethod
    def identity(cls) -> "Similarity2":
        return cls()

    @classmethod
    def about_point(
        cls, center, scale: float = 1.0, rotation: float = 0.0, translation=(0.0, 0.0)
    ) -> "Similarity2":
        """Scale/rotate about ``center`` followed by an extra translation."""
        c = _as_vec2(center)
        t = _as_vec2(translation)
        rot = cls(scale=scale, rotation=rotation)
        return cls(scale=scale, rotation=rotation, translation=c + t - rot.apply(c))

    @property
    def rotation_matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array([[c, -s], [s, c]])

    def apply(self, points) -> np.ndarray:
        """Map an (..., 2) array of points."""
        p = np.asarray(points, dtype=float)
        return self.scale * (p @ self.rotation_matrix.T) + self.translation

    def compose(self, other: "Similarity2") -> "Similarity2":
        """Return self ∘ other: ``other`` is applied first."""
        return Similarity2(
            scale=self.scale * other.scale,
            rotation=self.rotation + other.rotation,
            translation=self.scale * (self.rotation_matrix @ other.translation)
            + self.translation,
        )

    def __matmul__(self, other: "Similarity2") -> "Similarity2":
        return self.compose(other)

    def inverse(self) -> "Similarity2":
        inv_scale = 1.0 / self.scale
        c, s = math.cos(-self.rotation), math.sin(-self.rotation)
        tx, ty = self.translation
        return Similarity2(
            scale=inv_scale,
            rotation=-self.rotation,
            translation=np.array(
                [-inv_scale * (c * tx - s * ty), -inv_scale * (s * tx + c * ty)]
            ),
        )

    def allclose(self, other: "Similarity2", atol: float = 1e-9) -> bool:
        return (
            abs(self.scale - other.scale) <= atol
            and abs(wrap_angle(self.rotation - other.rotation + math.pi) - math.pi)
            <= atol
            and bool(np.allclose(self.translation, other.translation, atol=atol))
        )


def obb_angle(obb: Obb) -> float:
    """Angle of the first edge against the image x axis, in [0, 2*pi).

    atan2 of the edge direction, with 2*pi added for negative-y directions
    so the full turn is covered.
    """
    (x0, y0), (x1, y1) = obb.vertices[0], obb.vertices[1]
    vx, vy = x1 - x0, y1 - y0
    if math.hypot(vx, vy) < 1e-12:
        raise DegenerateBox("zero-length orientation edge")
    if vy >= 0.0:
        t = math.atan2(vy, vx)
    else:
        t = TWO_PI + math.atan2(vy, vx)
    return wrap_angle(t)


def aabb_of_obb(obb: Obb) -> Aabb:
    """Smallest axis-aligned box containing all 4 vertices."""
    xs = obb.vertices[:, 0]
    ys = obb.vertices[:, 1]
    x_min, x_max = float(xs.min()), float(xs.max())
    y_min, y_max = float(ys.min()), float(ys.max())
    return Aabb(
        x=0.5 * (x_min + x_max),
        y=0.5 * (y_min + y_max),
        w=x_max - x_min,
        h=y_max - y_min,
    )


def obb_aspect_ratio(obb: Obb) -> float:
    """Side-length ratio |p1 - p0| / |p3 - p0|."""
    a = obb.width
    b = obb.height
    if a < 1e-9 or b < 1e-9:
        raise DegenerateBox("side length below 1e-9")
    return a / b


def reconstruct_obb(aabb: Aabb, theta: float, ratio: float) -> Obb:
    """Build the oriented box implied by an axis-aligned box, an angle and
    an aspect ratio.

    A unit-width seed box with the given ratio is centered on the aabb,
    rotated by theta, then uniformly scaled so that its leftmost vertex
    touches the aabb's left edge. For a noise-free aabb (computed from a
    real oriented box with matching theta/ratio) this inverts exactly.
    """
    if not ratio > 0:
        raise DegenerateReconstruction(f"ratio must be positive, got {ratio}")
    hw = 0.5
    hh = 0.5 / ratio
    c, s = math.cos(theta), math.sin(theta)
    local = ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh))
    offs = [(lx * c - ly * s, lx * s + ly * c) for lx, ly in local]
    # Leftmost vertex; ties resolved by lowest index (the scale is the same
    # for either choice, this only pins determinism).
    lm_x = min(ox for ox, _ in offs)
    if abs(lm_x) < 1e-9:
        raise DegenerateReconstruction("leftmost vertex of seed box at center")
    scale = (-0.5 * aabb.w) / lm_x
    cx, cy = aabb.x, aabb.y
    verts = np.array([(cx + scale * ox, cy + scale * oy) for ox, oy in offs])
    return Obb(verts)


def _clip_polygon(subject, clip):
    """Sutherland-Hodgman clipping of convex polygons given as vertex lists.

    Both polygons must wind clockwise on screen (positive shoelace sum in
    y-down coordinates), which is how Obb vertices are stored.
    """
    output = subject
    cx1, cy1 = clip[-1]
    for cx2, cy2 in clip:
        if not output:
            return []
        ex, ey = cx2 - cx1, cy2 - cy1
        input_list = output
        output = []
        sx, sy = input_list[-1]
        s_in = ex * (sy - cy1) - ey * (sx - cx1) >= 0.0
        for px, py in input_list:
            p_in = ex * (py - cy1) - ey * (px - cx1) >= 0.0
            if p_in != s_in:
                # segment crosses the clip edge: append the intersection
                dx, dy = px - sx, py - sy
                denom = ex * dy - ey * dx
                if denom != 0.0:
                    t = (ex * (cy1 - sy) - ey * (cx1 - sx)) / denom
                    output.append((sx + t * dx, sy + t * dy))
            if p_in:
                output.append((px, py))
            sx, sy, s_in = px, py, p_in
        cx1, cy1 = cx2, cy2
    return output


def _shoelace_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    area = 0.0
    x1, y1 = poly[-1]
    for x2, y2 in poly:
        area += x1 * y2 - x2 * y1
        x1, y1 = x2, y2
    return 0.5 * abs(area)


def polygon_iou(a: Obb, b: Obb) -> float:
    """Exact intersection-over-union of two oriented boxes via convex
    polygon clipping."""
    pa = [tuple(p) for p in a.vertices.tolist()]
    pb = [tuple(p) for p in b.vertices.tolist()]
    inter = _shoelace_area(_clip_polygon(pa, pb))
    if inter <= 0.0:
        return 0.0
    union = _shoelace_area(pa) + _shoelace_area(pb) - inter
    if union <= 0.0:
        return 0.0
    return min(inter / union, 1.0)


def oriented_iou(pred: Obb, gt: Obb) -> float:
    """IoU scaled by the clamped cosine between the two orientation vectors.

    Opposed angles are discarded a priori: the cosine is clamped at zero, so
    a 180-degree flip zeroes the score no matter how well the boxes overlap.
    """
    iou = polygon_iou(pred, gt)
    if iou == 0.0:
        return 0.0
    va = pred.vertices[1] - pred.vertices[0]
    vb = gt.vertices[1] - gt.vertices[0]
    na = math.hypot(va[0], va[1])
    nb = math.hypot(vb[0], vb[1])
    if na < 1e-12 or nb < 1e-12:
        raise DegenerateBox("zero-length orientation edge")
    cos = (va[0] * vb[0] + va[1] * vb[1]) / (na * nb)
    return iou * max(cos, 0.0)


def transform_obb(t: Similarity2, obb: Obb) -> Obb:
    """Map every vertex through the similarity; rectangle shape and
    clockwise order are preserved by construction."""
    return Obb(t.apply(obb.vertices))
