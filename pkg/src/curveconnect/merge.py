"""Group overlapping segment masks into per-instance regions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .maskgrid import Canvas, SegmentMask, SegmentPrediction, square_cells


@dataclass(frozen=True)
class MergeConfig:
    s1: float = 0.5
    s2: float = 0.2
    canvas_stride: float = 4.0

    def __post_init__(self):
        if not 0.0 <= self.s1 <= 1.0:
            raise ValueError("s1 must lie in [0, 1]")
        if not 0.0 <= self.s2 <= 1.0:
            raise ValueError("s2 must lie in [0, 1]")
        if not self.canvas_stride > 0:
            raise ValueError("canvas_stride must be positive")


@dataclass(frozen=True, eq=False)
class MergedRegion:
    """A merged instance.

    ``mask`` is the OR of the member masks.  ``support``, when present, keeps
    only the cells set by at least half of the members whose squares cover
    them; a single noisy member cannot widen it.
    """

    mask: Canvas
    members: tuple[int, ...]
    support: Canvas | None = None

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.mask.bits))

    def support_cells(self) -> np.ndarray:
        """Cell centres used for curve fitting and polygon building."""
        if self.support is not None and self.support.bits.any():
            return self.support.cell_centers()
        return self.mask.cell_centers()


def drop_empty(masks: Sequence[SegmentMask | SegmentPrediction], s1: float = 0.5) -> list:
    """Remove masks with no cell above ``s1`` (binary masks: no set cell)."""
    out = []
    for m in masks:
        if isinstance(m, SegmentPrediction):
            if np.any(m.scores > s1):
                out.append(m)
        elif not m.is_empty():
            out.append(m)
    return out


def canvas_shape(masks: Sequence[SegmentMask], stride: float) -> tuple[int, int]:
    """Smallest canvas from the image origin that holds every mask square."""
    if not masks:
        return (0, 0)
    right = max(m.origin[0] + m.side for m in masks)
    bottom = max(m.origin[1] + m.side for m in masks)
    return (max(1, int(np.ceil(bottom / stride))), max(1, int(np.ceil(right / stride))))


def overlap_graph(masks: Sequence[SegmentMask], cfg: MergeConfig,
                  shape: tuple[int, int] | None = None):
    """Pasted footprints and the boolean adjacency of the overlap graph.

    Returns ``(incidence, adjacency)`` where ``incidence`` is a sparse
    masks-by-cells matrix and ``adjacency[i, j]`` is True when the masks
    overlap by more than ``s2`` of the smaller footprint.
    """
    if shape is None:
        shape = canvas_shape(masks, cfg.canvas_stride)
    _, inc = _incidence(masks, shape, cfg.canvas_stride)
    return inc, _adjacency(inc, cfg.s2)


def _adjacency(inc, s2: float):
    n = inc.shape[0]
    areas = np.asarray(inc.sum(axis=1)).ravel()
    inter = (inc @ inc.T).tocoo()
    smaller = np.minimum(areas[inter.row], areas[inter.col])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(smaller > 0, inter.data / np.maximum(smaller, 1), 0.0)
    keep = (ratio > s2) & (inter.row != inter.col)
    return sparse.csr_matrix((np.ones(int(keep.sum()), dtype=bool), (inter.row[keep], inter.col[keep])),
                             shape=(n, n))


def _incidence(masks: Sequence[SegmentMask], shape: tuple[int, int], stride: float):
    """Sparse masks-by-cells matrices: cells under each square, and cells each mask sets."""
    ncells = shape[0] * shape[1]
    rows, cols, bits = [], [], []
    for k, m in enumerate(masks):
        r, c, b = square_cells(shape, stride, m)
        cols.append(r * shape[1] + c)
        rows.append(np.full(r.size, k, dtype=np.intp))
        bits.append(b)
    row = np.concatenate(rows) if rows else np.zeros(0, dtype=np.intp)
    col = np.concatenate(cols) if cols else np.zeros(0, dtype=np.intp)
    bit = np.concatenate(bits) if bits else np.zeros(0, dtype=bool)
    cover = sparse.csr_matrix((np.ones(row.size, dtype=np.int64), (row, col)), shape=(len(masks), ncells))
    inc = sparse.csr_matrix((np.ones(int(bit.sum()), dtype=np.int64), (row[bit], col[bit])),
                            shape=(len(masks), ncells))
    return cover, inc


def merge_masks(masks: Sequence[SegmentMask], cfg: MergeConfig = MergeConfig(),
                shape: tuple[int, int] | None = None) -> list[MergedRegion]:
    """Connected components of the pairwise overlap graph.

    Binary masks are pasted onto a common canvas at ``cfg.canvas_stride``;
    two masks are linked when their overlap exceeds ``cfg.s2`` of the smaller
    footprint.  Regions come back ordered by their smallest member index.
    """
    if not masks:
        return []
    if shape is None:
        shape = canvas_shape(masks, cfg.canvas_stride)
    cover, inc = _incidence(masks, shape, cfg.canvas_stride)
    adj = _adjacency(inc, cfg.s2)
    _, labels = connected_components(adj, directed=False)
    groups: dict[int, list[int]] = {}
    for idx, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(idx)
    regions = []
    for members in sorted(groups.values(), key=lambda g: g[0]):
        votes = np.asarray(inc[members].sum(axis=0)).ravel().reshape(shape)
        under = np.asarray(cover[members].sum(axis=0)).ravel().reshape(shape)
        union = Canvas(votes > 0, cfg.canvas_stride)
        majority = Canvas((votes > 0) & (2 * votes >= under), cfg.canvas_stride)
        regions.append(MergedRegion(union, tuple(members), majority))
    return regions
