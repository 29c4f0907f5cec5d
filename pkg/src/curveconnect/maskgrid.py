"""Score grids, binary canvases and per-square segment masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class ScoreGrid:
    """Row-major grid of scores in [0, 1]; ``values[row, col]``, rows along y."""

    values: np.ndarray
    stride: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("score grid must be a nonempty 2-D array")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("scores must lie in [0, 1]")
        if not self.stride > 0:
            raise ValueError("stride must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ScoreGrid):
            return NotImplemented
        return self.stride == other.stride and np.array_equal(self.values, other.values)


def binarize(grid: ScoreGrid | np.ndarray, s1: float) -> np.ndarray:
    """Cells scoring strictly above ``s1`` become True."""
    if not 0.0 <= s1 <= 1.0:
        raise ValueError("s1 must lie in [0, 1]")
    values = grid.values if isinstance(grid, ScoreGrid) else np.asarray(grid)
    return values > s1


@dataclass(frozen=True, eq=False)
class SegmentMask:
    """Binary mask covering the square ``[x0, x0+side) x [y0, y0+side)``."""

    origin: tuple[float, float]
    side: float
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.shape[0] != bits.shape[1] or bits.shape[0] == 0:
            raise ValueError("mask bits must be a nonempty square array")
        if not self.side > 0:
            raise ValueError("mask side must be positive")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def resolution(self) -> int:
        return self.bits.shape[0]

    def is_empty(self) -> bool:
        return not self.bits.any()


@dataclass(frozen=True, eq=False)
class SegmentPrediction:
    """Soft mask predicted inside one positive square, as read from a dump.

    ``score`` is the square's classification confidence.
    """

    image_id: str
    cx: float
    cy: float
    side: float
    scores: np.ndarray
    score: float = 1.0

    def __post_init__(self):
        s = np.array(self.scores, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] == 0:
            raise ValueError("segment scores must be a nonempty square array")
        if not np.all(np.isfinite(s)) or s.min() < 0.0 or s.max() > 1.0:
            raise ValueError("segment scores must lie in [0, 1]")
        if not self.side > 0:
            raise ValueError("segment side must be positive")
        if not np.all(np.isfinite([self.cx, self.cy, self.side])):
            raise ValueError("segment geometry must be finite")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("square score must lie in [0, 1]")
        if any(ch.isspace() for ch in self.image_id) or not self.image_id:
            raise ValueError("image id must be a nonempty token without whitespace")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def resolution(self) -> int:
        return self.scores.shape[0]

    @property
    def origin(self) -> tuple[float, float]:
        return (self.cx - self.side / 2.0, self.cy - self.side / 2.0)

    def binarize(self, s1: float) -> SegmentMask:
        return SegmentMask(self.origin, self.side, binarize(self.scores, s1))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SegmentPrediction):
            return NotImplemented
        return (self.image_id == other.image_id
                and (self.cx, self.cy, self.side, self.score) == (other.cx, other.cy, other.side, other.score)
                and np.array_equal(self.scores, other.scores))


@dataclass(frozen=True, eq=False)
class Canvas:
    """Binary image-space grid; cell ``(r, c)`` covers ``[c*stride, (c+1)*stride)`` in x."""

    bits: np.ndarray
    stride: float = 4.0

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise ValueError("canvas must be 2-D")
        if not self.stride > 0:
            raise ValueError("stride must be positive")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def empty(cls, width: int, height: int, stride: float = 4.0) -> Canvas:
        return cls(np.zeros((height, width), dtype=bool), stride)

    @classmethod
    def covering(cls, width_px: float, height_px: float, stride: float = 4.0) -> Canvas:
        return cls.empty(int(np.ceil(width_px / stride)), int(np.ceil(height_px / stride)), stride)

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def cell_centers(self, mask: np.ndarray | None = None) -> np.ndarray:
        """Image coordinates of the centres of set cells (of ``mask`` if given), row-major."""
        bits = self.bits if mask is None else mask
        rows, cols = np.nonzero(bits)
        return np.column_stack([(cols + 0.5) * self.stride, (rows + 0.5) * self.stride])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Canvas):
            return NotImplemented
        return self.stride == other.stride and np.array_equal(self.bits, other.bits)


def footprint(shape: tuple[int, int], stride: float, m: SegmentMask) -> tuple[np.ndarray, np.ndarray]:
    """Canvas cells set by pasting ``m``: nearest-neighbour lookup at each cell centre.

    Returns ``(rows, cols)`` index arrays, clipped to the canvas.
    """
    rows, cols, bits = square_cells(shape, stride, m)
    return rows[bits], cols[bits]


def square_cells(shape: tuple[int, int], stride: float,
                 m: SegmentMask) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Every canvas cell under the square of ``m`` with the mask bit it samples.

    Returns flat ``(rows, cols, bits)`` arrays, clipped to the canvas.
    """
    h, w = shape
    x0, y0 = m.origin
    res = m.resolution
    c_lo = max(0, int(np.ceil(x0 / stride - 0.5)))
    c_hi = min(w, int(np.ceil((x0 + m.side) / stride - 0.5)))
    r_lo = max(0, int(np.ceil(y0 / stride - 0.5)))
    r_hi = min(h, int(np.ceil((y0 + m.side) / stride - 0.5)))
    if c_lo >= c_hi or r_lo >= r_hi:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty, np.zeros(0, dtype=bool)
    cols = np.arange(c_lo, c_hi)
    rows = np.arange(r_lo, r_hi)
    mc = np.clip(np.floor(((cols + 0.5) * stride - x0) / m.side * res).astype(np.intp), 0, res - 1)
    mr = np.clip(np.floor(((rows + 0.5) * stride - y0) / m.side * res).astype(np.intp), 0, res - 1)
    sub = m.bits[np.ix_(mr, mc)]
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return rr.ravel(), cc.ravel(), sub.ravel()


def paste(canvas: Canvas, m: SegmentMask) -> Canvas:
    """OR a segment mask into a copy of ``canvas``."""
    bits = canvas.bits.copy()
    rows, cols = footprint(canvas.shape, canvas.stride, m)
    bits[rows, cols] = True
    return Canvas(bits, canvas.stride)


def mask_area(bits: np.ndarray | Canvas) -> int:
    if isinstance(bits, Canvas):
        bits = bits.bits
    return int(np.count_nonzero(bits))


def overlap_ratio_min(a: np.ndarray | Canvas, b: np.ndarray | Canvas) -> float:
    """|a & b| / min(|a|, |b|), or 0 when either mask is empty."""
    a = a.bits if isinstance(a, Canvas) else np.asarray(a, dtype=bool)
    b = b.bits if isinstance(b, Canvas) else np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ValueError("masks must have the same shape")
    smaller = min(np.count_nonzero(a), np.count_nonzero(b))
    if smaller == 0:
        return 0.0
    return np.count_nonzero(a & b) / smaller
