"""Segments to polygons: square filtering, mask merging, center lines, polygons."""

from __future__ import annotations

import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .anchors import top_scoring
from .config import PipelineConfig
from .curve import region_polygon
from .geom import Polygon
from .maskgrid import SegmentPrediction
from .merge import MergeConfig, MergedRegion, canvas_shape, merge_masks

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Detection:
    image_id: str
    score: float
    polygon: Polygon


@dataclass
class ImageResult:
    image_id: str
    detections: list[Detection] = field(default_factory=list)
    n_regions: int = 0
    errors: list[str] = field(default_factory=list)


def group_by_image(records: Iterable[SegmentPrediction]) -> list[tuple[str, list[SegmentPrediction]]]:
    """Group records by image id, keeping first-appearance order."""
    groups: dict[str, list[SegmentPrediction]] = {}
    for r in records:
        groups.setdefault(r.image_id, []).append(r)
    return list(groups.items())


def _region_seed(seed: int, image_id: str, index: int) -> list[int]:
    return [seed, zlib.crc32(image_id.encode()), index]


def merged_regions(preds: Sequence[SegmentPrediction], cfg: PipelineConfig
                   ) -> tuple[list[SegmentPrediction], list[MergedRegion]]:
    """Filter squares by score, binarize, drop empty masks and merge.

    Returns the surviving predictions (region members index into this list)
    and the merged regions.
    """
    keep = top_scoring([p.score for p in preds], cfg.s3, cfg.max_rois)
    chosen = [preds[i] for i in keep]
    masks = [p.binarize(cfg.s1) for p in chosen]
    live = [i for i, m in enumerate(masks) if not m.is_empty()]
    chosen = [chosen[i] for i in live]
    masks = [masks[i] for i in live]
    if not masks:
        return chosen, []
    mcfg = MergeConfig(cfg.s1, cfg.s2, cfg.canvas_stride)
    return chosen, merge_masks(masks, mcfg, canvas_shape(masks, cfg.canvas_stride))


def connect_image(image_id: str, preds: Sequence[SegmentPrediction], cfg: PipelineConfig) -> ImageResult:
    """Run the curve-connection stages on one image's segment predictions."""
    result = ImageResult(image_id)
    chosen, regions = merged_regions(preds, cfg)
    result.n_regions = len(regions)
    for idx, region in enumerate(regions):
        if region.area == 0:
            continue
        try:
            poly = region_polygon(region, cfg.n_sample, _region_seed(cfg.seed, image_id, idx))
        except ValueError as exc:
            result.errors.append(f"region {idx}: {exc}")
            continue
        score = float(np.mean([chosen[m].score for m in region.members]))
        poly = Polygon(np.round(poly.xy, 3))
        result.detections.append(Detection(image_id, score, poly))
    return result


def _connect_job(args) -> ImageResult:
    image_id, preds, cfg = args
    try:
        return connect_image(image_id, preds, cfg)
    except Exception as exc:  # one bad image must not abort the batch
        return ImageResult(image_id, errors=[f"{type(exc).__name__}: {exc}"])


def run_connect(records: Iterable[SegmentPrediction], cfg: PipelineConfig, jobs: int = 1) -> list[ImageResult]:
    """Process every image; results come back in input order regardless of ``jobs``."""
    work = [(iid, preds, cfg) for iid, preds in group_by_image(records)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_connect_job, work, chunksize=1))
    else:
        results = [_connect_job(w) for w in work]
    for r in results:
        for e in r.errors:
            log.warning("%s: %s", r.image_id, e)
    return results

