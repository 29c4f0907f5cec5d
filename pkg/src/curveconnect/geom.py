"""Planar polygon primitives in double precision.

Image coordinates throughout: x grows right, y grows down.  "Left of a
direction" means left as seen on screen, i.e. the normal ``(dy, -dx)``.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

import numpy as np
import shapely

EPS = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate or otherwise unusable geometry."""


class Point(NamedTuple):
    x: float
    y: float


class Polygon:
    """Simple polygon stored as an ``(n, 2)`` float array.

    The closing vertex is implicit.  Construction validates the cheap
    invariants (vertex count, no repeated consecutive vertex, nonzero area);
    simplicity is checked on demand with :meth:`is_simple` because it is
    quadratic in the vertex count.
    """

    __slots__ = ("_xy",)

    def __init__(self, vertices: Iterable[Sequence[float]] | np.ndarray):
        xy = np.array(vertices, dtype=np.float64)
        if xy.ndim != 2 or xy.shape[1] != 2:
            raise GeometryError("vertices must be a sequence of (x, y) pairs")
        if not np.all(np.isfinite(xy)):
            raise GeometryError("vertex coordinates must be finite")
        if len(xy) >= 2 and np.array_equal(xy[0], xy[-1]):
            xy = xy[:-1]
        if len(xy) < 3:
            raise GeometryError(f"polygon needs at least 3 vertices, got {len(xy)}")
        step = np.roll(xy, -1, axis=0) - xy
        if np.any(np.all(step == 0.0, axis=1)):
            raise GeometryError("polygon has repeated consecutive vertices")
        if abs(_signed_area(xy)) <= EPS:
            raise GeometryError("polygon has zero area")
        xy.setflags(write=False)
        self._xy = xy

    @property
    def xy(self) -> np.ndarray:
        return self._xy

    @property
    def vertices(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self._xy]

    def __len__(self) -> int:
        return len(self._xy)

    def __repr__(self) -> str:
        return f"Polygon({self._xy.tolist()!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polygon):
            return NotImplemented
        return np.array_equal(self._xy, other._xy)

    def __hash__(self) -> int:
        return hash(self._xy.tobytes())

    def signed_area(self) -> float:
        return _signed_area(self._xy)

    def area(self) -> float:
        return abs(_signed_area(self._xy))

    def centroid(self) -> Point:
        xy = self._xy
        nxt = np.roll(xy, -1, axis=0)
        cross = xy[:, 0] * nxt[:, 1] - nxt[:, 0] * xy[:, 1]
        a6 = 3.0 * cross.sum()
        cx = ((xy[:, 0] + nxt[:, 0]) * cross).sum() / a6
        cy = ((xy[:, 1] + nxt[:, 1]) * cross).sum() / a6
        return Point(float(cx), float(cy))

    def bounds(self) -> tuple[float, float, float, float]:
        lo = self._xy.min(axis=0)
        hi = self._xy.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def translated(self, dx: float, dy: float) -> Polygon:
        return Polygon(self._xy + (dx, dy))

    def scaled(self, factor: float, about: Sequence[float] = (0.0, 0.0)) -> Polygon:
        c = np.asarray(about, dtype=np.float64)
        return Polygon((self._xy - c) * factor + c)

    def reversed(self) -> Polygon:
        return Polygon(self._xy[::-1])

    def is_simple(self) -> bool:
        """True when no two non-adjacent edges touch and adjacent ones only share a vertex."""
        xy = self._xy
        n = len(xy)
        a = xy
        b = np.roll(xy, -1, axis=0)
        for i in range(n):
            for j in range(i + 1, n):
                adjacent = j == i + 1 or (i == 0 and j == n - 1)
                if adjacent:
                    # Adjacent edges may only meet at their shared vertex:
                    # reject a fold-back where they overlap collinearly.
                    if i == 0 and j == n - 1:
                        shared, p, q = a[0], b[0], a[n - 1]
                    else:
                        shared, p, q = b[i], a[i], b[j]
                    u, v = p - shared, q - shared
                    if abs(_cross(u, v)) <= EPS * max(1.0, np.hypot(*u) * np.hypot(*v)) and np.dot(u, v) > 0:
                        return False
                    continue
                if _segments_touch(a[i], b[i], a[j], b[j]):
                    return False
        return True

    def to_shapely(self) -> shapely.Polygon:
        return shapely.Polygon(self._xy)


def _signed_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def _orient(p, q, r) -> int:
    d = _cross(q - p, r - p)
    scale = max(1.0, float(np.abs(q - p).max() * np.abs(r - p).max()))
    if abs(d) <= EPS * scale:
        return 0
    return 1 if d > 0 else -1


def _on_segment(p, q, r) -> bool:
    # r collinear with pq; is it within the bounding box?
    return (min(p[0], q[0]) - EPS <= r[0] <= max(p[0], q[0]) + EPS
            and min(p[1], q[1]) - EPS <= r[1] <= max(p[1], q[1]) + EPS)


def _segments_touch(p1, p2, q1, q2) -> bool:
    o1, o2 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    o3, o4 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    if o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4):
        return True
    if o1 == 0 and _on_segment(p1, p2, q1):
        return True
    if o2 == 0 and _on_segment(p1, p2, q2):
        return True
    if o3 == 0 and _on_segment(q1, q2, p1):
        return True
    if o4 == 0 and _on_segment(q1, q2, p2):
        return True
    return False


def polygon_area(p: Polygon) -> float:
    """Absolute shoelace area."""
    return p.area()


def points_in_polygon(points: np.ndarray, p: Polygon) -> np.ndarray:
    """Vectorised containment test; points on the boundary count as inside.

    Args:
        points: array of shape ``(m, 2)``.
        p: the polygon.

    Returns:
        Boolean array of shape ``(m,)``.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    x0, y0, x1, y1 = p.bounds()
    near = ((pts[:, 0] >= x0 - EPS) & (pts[:, 0] <= x1 + EPS)
            & (pts[:, 1] >= y0 - EPS) & (pts[:, 1] <= y1 + EPS))
    out = np.zeros(len(pts), dtype=bool)
    if near.any():
        out[near] = _points_in_polygon_dense(pts[near], p)
    return out


def _points_in_polygon_dense(pts: np.ndarray, p: Polygon) -> np.ndarray:
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    a = p.xy[None, :, :]
    b = np.roll(p.xy, -1, axis=0)[None, :, :]
    ax, ay = a[..., 0], a[..., 1]
    bx, by = b[..., 0], b[..., 1]

    # boundary: collinear with an edge and inside its bounding box
    ex, ey = bx - ax, by - ay
    cross = ex * (py - ay) - ey * (px - ax)
    elen = np.hypot(ex, ey)
    on_line = np.abs(cross) <= EPS * np.maximum(1.0, elen)
    in_box = ((px >= np.minimum(ax, bx) - EPS) & (px <= np.maximum(ax, bx) + EPS)
              & (py >= np.minimum(ay, by) - EPS) & (py <= np.maximum(ay, by) + EPS))
    on_boundary = np.any(on_line & in_box, axis=1)

    # even-odd crossing of a ray towards +x
    straddles = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (py - ay) * ex / ey
    crossings = np.count_nonzero(straddles & (px < x_cross), axis=1)
    return on_boundary | (crossings % 2 == 1)


def point_in_polygon(pt: Sequence[float], p: Polygon) -> bool:
    return bool(points_in_polygon(np.asarray([pt], dtype=np.float64), p)[0])


def polygon_intersection_area(a: Polygon, b: Polygon) -> float:
    """Area of the overlap of two simple (possibly concave) polygons."""
    sa, sb = a.to_shapely(), b.to_shapely()
    if not (sa.is_valid and sb.is_valid):
        raise GeometryError("intersection requires simple polygons")
    inter = float(shapely.intersection(sa, sb).area)
    # clipping round-off can leave a hair above the smaller area
    return min(inter, a.area(), b.area())


def polygon_iou(a: Polygon, b: Polygon) -> float:
    inter = polygon_intersection_area(a, b)
    union = a.area() + b.area() - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def polygon_distance(a: Polygon, b: Polygon) -> float:
    """Minimum Euclidean distance between two polygons (0 if they overlap)."""
    return float(shapely.distance(a.to_shapely(), b.to_shapely()))


def oriented_rect(points: Sequence[Sequence[float]] | np.ndarray, axis: Sequence[float]) -> Polygon:
    """Smallest rectangle with one side parallel to ``axis`` enclosing ``points``.

    Vertex order: the two corners on the side left of ``axis`` come first,
    in the axis direction, then the opposite side back.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise GeometryError("oriented_rect needs at least one point")
    u = np.asarray(axis, dtype=np.float64)
    norm = np.hypot(u[0], u[1])
    if norm <= EPS:
        raise GeometryError("axis must be nonzero")
    u = u / norm
    n = np.array([u[1], -u[0]])  # screen-left of u
    t = pts @ u
    s = pts @ n
    t0, t1 = t.min(), t.max()
    s0, s1 = s.min(), s.max()
    if t1 - t0 <= EPS or s1 - s0 <= EPS:
        raise GeometryError("points span a zero-area rectangle")
    corners = [
        t0 * u + s1 * n,
        t1 * u + s1 * n,
        t1 * u + s0 * n,
        t0 * u + s0 * n,
    ]
    return Polygon(corners)


def polygon_height(p: Polygon) -> float:
    """Text height of an annotation polygon.

    14-vertex polygons are read as 7 top vertices followed by 7 bottom ones
    (in reverse), and the height is the mean top/bottom pair distance.  Any
    other polygon uses its axis-aligned bounding-box height.
    """
    xy = p.xy
    if len(xy) == 14:
        top = xy[:7]
        bottom = xy[7:][::-1]
        return float(np.mean(np.hypot(*(top - bottom).T)))
    return float(xy[:, 1].max() - xy[:, 1].min())
