"""Square anchor lattice and the positive/negative labelling rules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geom import EPS, Polygon, points_in_polygon, polygon_height
from .maskgrid import ScoreGrid

DEFAULT_STRIDES = (8, 16, 32, 64)
DEFAULT_K_SET = (2.0, 2.5, 3.0, 3.5)
HEIGHT_FACTOR = 1.8
STRONG_AREA_FRACTION = 0.5
WEAK_SCORE = 0.1


@dataclass(frozen=True)
class SquareAnchor:
    cx: float
    cy: float
    side: float
    level: int
    i: int
    j: int
    k_index: int

    def corners(self) -> np.ndarray:
        """Top-left, top-right, bottom-right, bottom-left (y grows down)."""
        h = self.side / 2.0
        return np.array([
            [self.cx - h, self.cy - h],
            [self.cx + h, self.cy - h],
            [self.cx + h, self.cy + h],
            [self.cx - h, self.cy + h],
        ])


@dataclass(frozen=True)
class AnchorLabel:
    anchor: SquareAnchor
    positive: bool
    matched_gt: int | None = None


def side_lengths(strides: Sequence[int] = DEFAULT_STRIDES,
                 k_set: Sequence[float] = DEFAULT_K_SET) -> list[list[float]]:
    """Square side lengths per level, ``stride * k`` for each k."""
    return [[float(s * k) for k in k_set] for s in strides]


def grid_anchors(level: int, w: int, h: int,
                 strides: Sequence[int] = DEFAULT_STRIDES,
                 k_set: Sequence[float] = DEFAULT_K_SET) -> list[SquareAnchor]:
    """All anchors of one feature level, row by row (j outer, i inner, k innermost)."""
    if w < 1 or h < 1:
        raise ValueError("feature map must be at least 1x1")
    stride = strides[level]
    sides = side_lengths(strides, k_set)[level]
    return [
        SquareAnchor(float(i * stride), float(j * stride), side, level, i, j, k)
        for j in range(h)
        for i in range(w)
        for k, side in enumerate(sides)
    ]


def feature_sizes(image_w: int, image_h: int,
                  strides: Sequence[int] = DEFAULT_STRIDES) -> list[tuple[int, int]]:
    """Default feature-map size per level: one lattice point per stride step."""
    return [(max(1, -(-image_w // s)), max(1, -(-image_h // s))) for s in strides]


def all_anchors(sizes: Sequence[tuple[int, int]],
                strides: Sequence[int] = DEFAULT_STRIDES,
                k_set: Sequence[float] = DEFAULT_K_SET) -> list[SquareAnchor]:
    out: list[SquareAnchor] = []
    for level, (w, h) in enumerate(sizes):
        out.extend(grid_anchors(level, w, h, strides, k_set))
    return out


def match_gt(centers: np.ndarray, sides: np.ndarray, gts: Sequence[Polygon]) -> np.ndarray:
    """Index of the matched ground truth per anchor, -1 for negatives.

    ``centers`` has shape ``(n, 2)`` and ``sides`` shape ``(n,)``.
    """
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    sides = np.asarray(sides, dtype=np.float64).reshape(-1)
    matched = np.full(len(centers), -1, dtype=np.intp)
    # top-left, top-right, bottom-left, bottom-right
    offs = np.array([[-1, -1], [1, -1], [-1, 1], [1, 1]], dtype=np.float64)
    for g, gt in enumerate(gts):
        todo = matched < 0
        if not todo.any():
            break
        x0, y0, x1, y1 = gt.bounds()
        # same boundary tolerance as points_in_polygon
        near = ((centers[:, 0] >= x0 - EPS) & (centers[:, 0] <= x1 + EPS)
                & (centers[:, 1] >= y0 - EPS) & (centers[:, 1] <= y1 + EPS))
        idx = np.nonzero(todo & near & (sides <= HEIGHT_FACTOR * polygon_height(gt)))[0]
        if idx.size == 0:
            continue
        idx = idx[points_in_polygon(centers[idx], gt)]
        if idx.size == 0:
            continue
        corners = centers[idx, None, :] + offs[None, :, :] * (sides[idx, None, None] / 2.0)
        inside = points_in_polygon(corners.reshape(-1, 2), gt).reshape(-1, 4)
        spans = ~(inside[:, 0] & inside[:, 1]) & ~(inside[:, 2] & inside[:, 3])
        matched[idx[spans]] = g
    return matched


def assign_labels(anchors: Sequence[SquareAnchor], gts: Sequence[Polygon]) -> list[AnchorLabel]:
    """Label many anchors at once.

    An anchor is positive for a ground-truth polygon when its centre lies in
    the polygon with ``side <= 1.8 * height``, and the square spans the text
    vertically: one of its top corners and one of its bottom corners fall
    outside the polygon.  The first qualifying polygon wins.
    """
    if not anchors:
        return []
    centers = np.array([(a.cx, a.cy) for a in anchors])
    sides = np.array([a.side for a in anchors])
    matched = match_gt(centers, sides, gts)
    return [
        AnchorLabel(a, True, int(m)) if m >= 0 else AnchorLabel(a, False, None)
        for a, m in zip(anchors, matched)
    ]


def assign_label(anchor: SquareAnchor, gts: Sequence[Polygon]) -> AnchorLabel:
    return assign_labels([anchor], gts)[0]


def shrink_polygon(gt: Polygon, area_fraction: float = STRONG_AREA_FRACTION) -> Polygon:
    """Scale about the area centroid so the area becomes ``area_fraction`` of the original."""
    return gt.scaled(np.sqrt(area_fraction), about=gt.centroid())


def square_cell_centers(cx: float, cy: float, side: float, resolution: int) -> np.ndarray:
    """Cell centres of a ``resolution x resolution`` grid over a square, shape ``(res, res, 2)``."""
    step = side / resolution
    coords = (np.arange(resolution) + 0.5) * step
    xs = cx - side / 2.0 + coords
    ys = cy - side / 2.0 + coords
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx, gy], axis=-1)


def segment_label(anchor: SquareAnchor, gt: Polygon, resolution: int) -> ScoreGrid:
    """Target mask for a positive square.

    Cells whose centre is in the inner half-area polygon score 1, cells in
    the rest of the ground truth score 0.1, everything else 0.
    """
    if resolution < 1:
        raise ValueError("resolution must be positive")
    pts = square_cell_centers(anchor.cx, anchor.cy, anchor.side, resolution).reshape(-1, 2)
    in_gt = points_in_polygon(pts, gt)
    in_strong = np.zeros_like(in_gt)
    if in_gt.any():
        in_strong[in_gt] = points_in_polygon(pts[in_gt], shrink_polygon(gt))
    values = np.where(in_strong, 1.0, np.where(in_gt, WEAK_SCORE, 0.0))
    return ScoreGrid(values.reshape(resolution, resolution), anchor.side / resolution)


def filter_positive_squares(anchors: Sequence[SquareAnchor], scores: Sequence[float],
                            s3: float = 0.4, cap: int = 2000) -> list[SquareAnchor]:
    """Anchors scoring above ``s3``, best first, at most ``cap`` of them."""
    return [anchors[i] for i in top_scoring(scores, s3, cap)]


def top_scoring(scores: Sequence[float], s3: float, cap: int) -> list[int]:
    """Indices with score > s3 sorted by descending score (stable), truncated to cap."""
    if not 0.0 <= s3 <= 1.0:
        raise ValueError("s3 must lie in [0, 1]")
    if cap < 1:
        raise ValueError("cap must be at least 1")
    s = np.asarray(scores, dtype=np.float64)
    keep = np.nonzero(s > s3)[0]
    order = keep[np.argsort(-s[keep], kind="stable")]
    return order[:cap].tolist()
