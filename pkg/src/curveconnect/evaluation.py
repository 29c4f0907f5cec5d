"""Polygon-level precision / recall / F-measure at an IoU threshold."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geom import Polygon, polygon_iou


@dataclass(frozen=True)
class ImageMatch:
    image_id: str
    pairs: tuple[tuple[int, int, float], ...]  # (det, gt, iou)
    n_det: int
    n_gt: int

    @property
    def tp(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f_measure: float
    tp: int
    n_det: int
    n_gt: int
    per_image: list[ImageMatch] = field(default_factory=list)

    def line(self) -> str:
        return (f"{self.precision:.6f} {self.recall:.6f} {self.f_measure:.6f} "
                f"{self.tp} {self.n_det} {self.n_gt}")


def iou_matrix(dets: Sequence[Polygon], gts: Sequence[Polygon]) -> np.ndarray:
    out = np.zeros((len(dets), len(gts)))
    for i, d in enumerate(dets):
        for j, g in enumerate(gts):
            out[i, j] = polygon_iou(d, g)
    return out


def match_image(dets: Sequence[Polygon], gts: Sequence[Polygon], iou_thr: float = 0.5,
                image_id: str = "") -> ImageMatch:
    """Greedy one-to-one matching in order of descending IoU.

    Ties break on the lower detection index, then the lower ground-truth index.
    """
    ious = iou_matrix(dets, gts)
    cand = [(-ious[i, j], i, j) for i in range(len(dets)) for j in range(len(gts))
            if ious[i, j] >= iou_thr]
    cand.sort()
    used_d: set[int] = set()
    used_g: set[int] = set()
    pairs = []
    for neg, i, j in cand:
        if i in used_d or j in used_g:
            continue
        used_d.add(i)
        used_g.add(j)
        pairs.append((i, j, -neg))
    return ImageMatch(image_id, tuple(pairs), len(dets), len(gts))


def scores(tp: int, n_det: int, n_gt: int) -> tuple[float, float, float]:
    """(P, R, F); an image with neither detections nor ground truth scores 1, 1, 1."""
    if n_det == 0 and n_gt == 0:
        return 1.0, 1.0, 1.0
    p = tp / n_det if n_det else 0.0
    r = tp / n_gt if n_gt else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def aggregate(matches: Iterable[ImageMatch]) -> EvalReport:
    per_image = list(matches)
    tp = sum(m.tp for m in per_image)
    n_det = sum(m.n_det for m in per_image)
    n_gt = sum(m.n_gt for m in per_image)
    p, r, f = scores(tp, n_det, n_gt)
    return EvalReport(p, r, f, tp, n_det, n_gt, per_image)


def evaluate(dets: Mapping[str, Sequence[Polygon]], gts: Mapping[str, Sequence[Polygon]],
             iou_thr: float = 0.5) -> EvalReport:
    """Match every image appearing in either mapping (ground-truth order first)."""
    ids = list(gts) + [k for k in dets if k not in gts]
    return aggregate(match_image(dets.get(k, []), gts.get(k, []), iou_thr, k) for k in ids)
