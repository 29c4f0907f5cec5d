"""Synthetic curved-text cases: ground-truth bands plus the masks an ideal segmenter would emit."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import ndimage

from .anchors import (DEFAULT_K_SET, DEFAULT_STRIDES, SquareAnchor, all_anchors,
                      feature_sizes, match_gt, square_cell_centers)
from .geom import GeometryError, Polygon, points_in_polygon, polygon_distance
from .maskgrid import SegmentMask, SegmentPrediction
from .merge import MergeConfig, merge_masks


@dataclass(frozen=True)
class SynthParams:
    image_size: tuple[int, int] = (512, 512)
    bands: tuple[int, int] = (1, 4)
    kinds: tuple[str, ...] = ("line", "arc", "sine")
    width_range: tuple[float, float] = (10.0, 40.0)
    length_range: tuple[float, float] = (100.0, 300.0)
    max_turn: float = np.deg2rad(120.0)
    max_tilt: float = np.deg2rad(30.0)
    min_radius_factor: float = 2.0
    gap: float = 16.0
    mask_resolution: int = 32
    blur: float = 0.0
    strides: tuple[int, ...] = DEFAULT_STRIDES
    k_set: tuple[float, ...] = DEFAULT_K_SET
    max_attempts: int = 200
    merge: MergeConfig = MergeConfig()


@dataclass(frozen=True, eq=False)
class SynthCase:
    image_id: str
    image_size: tuple[int, int]
    gt_polygons: list[Polygon]
    anchors: list[SquareAnchor]
    matched_gt: list[int]
    masks: list[SegmentPrediction]
    seed: int
    kinds: list[str] = field(default_factory=list)


def _dense_centerline(kind: str, length: float, width: float, rng: np.random.Generator,
                      p: SynthParams) -> np.ndarray:
    """Centre line in a local frame running along +x, about 400 samples."""
    min_radius = p.min_radius_factor * width
    if kind == "line":
        x = np.linspace(0.0, length, 400)
        return np.column_stack([x, np.zeros_like(x)])
    if kind == "arc":
        radius = rng.uniform(max(min_radius, length / p.max_turn), max(min_radius, length / p.max_turn) * 3.0)
        half = length / radius / 2.0
        phi = np.linspace(-half, half, 400)
        sign = rng.choice([-1.0, 1.0])
        return np.column_stack([radius * np.sin(phi), sign * radius * (1.0 - np.cos(phi))])
    if kind == "sine":
        wavelength = rng.uniform(0.8, 2.0) * length
        k = 2.0 * np.pi / wavelength
        amp_max = 1.0 / (min_radius * k * k)
        amp = rng.uniform(0.3, 1.0) * min(amp_max, length / 4.0)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        x = np.linspace(0.0, length, 400)
        return np.column_stack([x, amp * np.sin(k * x + phase)])
    raise ValueError(f"unknown band kind {kind!r}")


def band_polygon(centerline: np.ndarray, width: float) -> Polygon:
    """7 top vertices then 7 bottom vertices (reversed) at equal arc length, rounded to integers."""
    step = np.hypot(*np.diff(centerline, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(step)])
    at = np.linspace(0.0, cum[-1], 7)
    pts = np.column_stack([np.interp(at, cum, centerline[:, 0]), np.interp(at, cum, centerline[:, 1])])
    grad = np.column_stack([np.gradient(centerline[:, 0], cum), np.gradient(centerline[:, 1], cum)])
    tan = np.column_stack([np.interp(at, cum, grad[:, 0]), np.interp(at, cum, grad[:, 1])])
    tan /= np.hypot(tan[:, 0], tan[:, 1])[:, None]
    nrm = np.column_stack([tan[:, 1], -tan[:, 0]])
    top = pts + 0.5 * width * nrm
    bottom = pts - 0.5 * width * nrm
    return Polygon(np.rint(np.vstack([top, bottom[::-1]])))


def _place(rng: np.random.Generator, p: SynthParams, placed: Sequence[Polygon]):
    W, H = p.image_size
    width = rng.uniform(*p.width_range)
    length = rng.uniform(max(p.length_range[0], 4.0 * width), p.length_range[1])
    kind = str(rng.choice(list(p.kinds)))
    local = _dense_centerline(kind, length, width, rng, p)
    local = local - local.mean(axis=0)
    tilt = rng.uniform(-p.max_tilt, p.max_tilt)
    c, s = np.cos(tilt), np.sin(tilt)
    rotated = local @ np.array([[c, s], [-s, c]])
    margin = width + 4.0
    lo = -rotated.min(axis=0) + margin
    hi = np.array([W, H]) - rotated.max(axis=0) - margin
    if np.any(hi <= lo):
        return None
    line = rotated + rng.uniform(lo, hi)
    try:
        poly = band_polygon(line, width)
    except GeometryError:
        return None
    if not poly.is_simple():
        return None
    x0, y0, x1, y1 = poly.bounds()
    if x0 < 0 or y0 < 0 or x1 > W or y1 > H:
        return None
    if any(polygon_distance(poly, q) < p.gap for q in placed):
        return None
    return poly, kind


def _soften(scores: np.ndarray, blur: float) -> np.ndarray:
    if blur > 0:
        scores = np.clip(ndimage.gaussian_filter(scores, blur, mode="nearest"), 0.0, 1.0)
    return scores


def segment_scores(anchor: SquareAnchor, gt: Polygon, resolution: int, blur: float = 0.0) -> np.ndarray:
    """Ideal mask of one square: 1 where the cell centre lies in ``gt``, else 0."""
    return _soften(_inside_masks([anchor], gt, resolution)[0].astype(np.float64), blur)


def _inside_masks(anchors: Sequence[SquareAnchor], gt: Polygon, resolution: int) -> np.ndarray:
    """Cell-centre containment for many squares at once, shape ``(n, res, res)``."""
    if not anchors:
        return np.zeros((0, resolution, resolution), dtype=bool)
    pts = np.concatenate([square_cell_centers(a.cx, a.cy, a.side, resolution).reshape(-1, 2)
                          for a in anchors])
    return points_in_polygon(pts, gt).reshape(len(anchors), resolution, resolution)


def _band_masks(poly: Polygon, anchors: Sequence[SquareAnchor], centers: np.ndarray,
                sides: np.ndarray, p: SynthParams) -> list[tuple[int, np.ndarray]] | None:
    """Positive anchors of one band with their ideal masks.

    Returns ``None`` unless there are at least 3 of them and their masks merge
    into a single region; a band the connector would necessarily split is
    useless as a round-trip target.
    """
    idx = np.nonzero(match_gt(centers, sides, [poly]) >= 0)[0]
    if idx.size < 3:
        return None
    pos = [anchors[i] for i in idx]
    bits = _inside_masks(pos, poly, p.mask_resolution)
    masks = [SegmentMask((a.cx - a.side / 2, a.cy - a.side / 2), a.side, b) for a, b in zip(pos, bits)]
    masks = [m for m in masks if not m.is_empty()]
    if len(merge_masks(masks, p.merge)) != 1:
        return None
    return list(zip(idx.tolist(), bits))


def gen_case(seed: int, params: SynthParams = SynthParams(), image_id: str | None = None) -> SynthCase:
    """Random non-overlapping bands with their positive anchors and ideal masks."""
    W, H = params.image_size
    if params.width_range[0] <= 0 or params.width_range[0] > params.width_range[1]:
        raise ValueError("invalid width range")
    if params.width_range[1] * 3 >= min(W, H):
        raise ValueError("bands are too wide for the image")
    rng = np.random.default_rng(seed)
    anchors = all_anchors(feature_sizes(W, H, params.strides), params.strides, params.k_set)
    centers = np.array([(a.cx, a.cy) for a in anchors])
    sides = np.array([a.side for a in anchors])
    target = int(rng.integers(params.bands[0], params.bands[1] + 1))
    gts: list[Polygon] = []
    kinds: list[str] = []
    per_band: list[list[tuple[int, np.ndarray]]] = []
    for _ in range(params.max_attempts):
        if len(gts) >= target:
            break
        got = _place(rng, params, gts)
        if got is None:
            continue
        poly, kind = got
        found = _band_masks(poly, anchors, centers, sides, params)
        if found is None:
            continue
        gts.append(poly)
        kinds.append(kind)
        per_band.append(found)
    if not gts:
        raise ValueError("could not place any band with these parameters")

    # bands are disjoint, so each anchor's match is the same as in isolation
    rows = sorted((i, g, bits) for g, found in enumerate(per_band) for i, bits in found)
    iid = image_id if image_id is not None else f"synth{seed:06d}"
    masks = [
        SegmentPrediction(iid, anchors[i].cx, anchors[i].cy, anchors[i].side,
                          _soften(bits.astype(np.float64), params.blur))
        for i, _, bits in rows
    ]
    return SynthCase(iid, (W, H), gts, [anchors[i] for i, _, _ in rows], [g for _, g, _ in rows],
                     masks, seed, kinds)


def boundary_band(bits: np.ndarray, reach: int = 2) -> np.ndarray:
    """Cells within ``reach`` cells of a 0/1 transition (square borders are not edges)."""
    structure = np.ones((3, 3), dtype=bool)
    grown = ndimage.binary_dilation(bits, structure, iterations=reach)
    shrunk = ndimage.binary_erosion(bits, structure, iterations=reach, border_value=1)
    return grown & ~shrunk


def perturb(case: SynthCase, noise: float, seed: int | None = None) -> SynthCase:
    """Flip mask cells near the mask edge, each with probability ``noise``."""
    if not 0.0 <= noise <= 0.5:
        raise ValueError("noise must lie in [0, 0.5]")
    if noise == 0.0:
        return case
    rng = np.random.default_rng([case.seed if seed is None else seed, 0x5EED])
    out = []
    for m in case.masks:
        band = boundary_band(m.scores > 0.5)
        flip = band & (rng.random(m.scores.shape) < noise)
        scores = np.where(flip, 1.0 - m.scores, m.scores)
        out.append(replace(m, scores=scores))
    return replace(case, masks=out)
