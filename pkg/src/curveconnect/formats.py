"""Readers and writers for annotations, detections, score grids and segment dumps.

Every parser raises :class:`ParseError` on malformed input, carrying the
line number (text formats) or byte offset (dumps) of the problem.
"""

from __future__ import annotations

import math
import re
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .geom import GeometryError, Polygon
from .maskgrid import ScoreGrid, SegmentPrediction

CTW_VERTICES = 14
TOTALTEXT_N_RANGE = (2, 15)
SCOREGRID_MAGIC = b"SGRD"
SEGMENT_MAGIC = b"SEGD"
_INT = re.compile(r"[+-]?[0-9]+")


class ParseError(ValueError):
    """Malformed input; ``line`` is 1-based, ``offset`` counts bytes from the file start."""

    def __init__(self, message: str, line: int | None = None, offset: int | None = None):
        self.message = message
        self.line = line
        self.offset = offset
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


# --------------------------------------------------------------------------- numbers

def _int_token(tok: str, line: int | None) -> int:
    tok = tok.strip()
    if not _INT.fullmatch(tok):
        raise ParseError(f"not an integer: {tok!r}", line)
    return int(tok)


def _float_token(tok: str, line: int | None = None, offset: int | None = None) -> float:
    tok = tok.strip()
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", line, offset) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite number: {tok!r}", line, offset)
    return v


def format_number(v: float) -> str:
    """Integers without a decimal point, everything else as the shortest exact repr."""
    v = float(v)
    if v.is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(v)


def format_coords(p: Polygon) -> str:
    return ",".join(format_number(v) for v in p.xy.ravel())


def _polygon(coords: Sequence[float], line: int | None) -> Polygon:
    try:
        poly = Polygon(np.asarray(coords, dtype=np.float64).reshape(-1, 2))
    except GeometryError as exc:
        raise ParseError(str(exc), line) from None
    if not poly.is_simple():
        raise ParseError("polygon self-intersects", line)
    return poly


# --------------------------------------------------------------------------- polygons

def parse_ctw_line(line: str, lineno: int | None = None) -> Polygon:
    """28 comma-separated integers ``x1,y1,...,x14,y14``; tokens may carry whitespace."""
    tokens = line.strip().split(",")
    if len(tokens) != 2 * CTW_VERTICES:
        raise ParseError(f"expected {2 * CTW_VERTICES} values, got {len(tokens)}", lineno)
    return _polygon([_int_token(t, lineno) for t in tokens], lineno)


def parse_totaltext_record(record: str, lineno: int | None = None) -> Polygon:
    """``2N`` vertices (N top, N bottom) as comma-separated coordinates, N in [2, 15]."""
    tokens = record.strip().split(",")
    n_coords = len(tokens)
    if n_coords % 2:
        raise ParseError(f"odd coordinate count {n_coords}", lineno)
    if n_coords % 4:
        raise ParseError(f"vertex count {n_coords // 2} is not even", lineno)
    n = n_coords // 4
    lo, hi = TOTALTEXT_N_RANGE
    if not lo <= n <= hi:
        raise ParseError(f"N={n} outside [{lo}, {hi}]", lineno)
    return _polygon([_float_token(t, lineno) for t in tokens], lineno)


def _parse_coords(text: str, fmt: str, lineno: int) -> Polygon:
    if fmt == "ctw":
        return parse_ctw_line(text, lineno)
    if fmt == "totaltext":
        return parse_totaltext_record(text, lineno)
    if fmt == "any":
        tokens = text.strip().split(",")
        if len(tokens) % 2 or len(tokens) < 6:
            raise ParseError(f"expected an even number of at least 6 values, got {len(tokens)}", lineno)
        return _polygon([_float_token(t, lineno) for t in tokens], lineno)
    raise ValueError(f"unknown polygon format {fmt!r}")


def parse_annotations(text: str, fmt: str = "ctw") -> dict[str, list[Polygon]]:
    """Lines of ``<image_id> <coords>``; a bare ``<image_id>`` declares an image without text.

    Blank lines and lines starting with ``#`` are skipped.  Images keep their
    first-appearance order.
    """
    out: dict[str, list[Polygon]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        polys = out.setdefault(parts[0], [])
        if len(parts) == 2:
            polys.append(_parse_coords(parts[1], fmt, lineno))
    return out


def format_annotations(records: Mapping[str, Sequence[Polygon]]) -> str:
    lines = []
    for image_id, polys in records.items():
        _check_id(image_id)
        if not polys:
            lines.append(image_id)
        lines.extend(f"{image_id} {format_coords(p)}" for p in polys)
    return "".join(line + "\n" for line in lines)


def parse_detections(text: str) -> dict[str, list[tuple[float, Polygon]]]:
    """Lines of ``<image_id> <score> <coords>``; a bare ``<image_id>`` declares an empty image."""
    out: dict[str, list[tuple[float, Polygon]]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 2)
        dets = out.setdefault(parts[0], [])
        if len(parts) == 1:
            continue
        if len(parts) != 3:
            raise ParseError("expected <image_id> <score> <coords>", lineno)
        score = _float_token(parts[1], lineno)
        if not 0.0 <= score <= 1.0:
            raise ParseError(f"score {score} outside [0, 1]", lineno)
        dets.append((score, _parse_coords(parts[2], "any", lineno)))
    return out


def format_detections(records: Mapping[str, Sequence[tuple[float, Polygon]]]) -> str:
    lines = []
    for image_id, dets in records.items():
        _check_id(image_id)
        if not dets:
            lines.append(image_id)
        lines.extend(f"{image_id} {format_number(score)} {format_coords(p)}" for score, p in dets)
    return "".join(line + "\n" for line in lines)


def _check_id(image_id: str) -> None:
    if not image_id or any(ch.isspace() for ch in image_id) or image_id.startswith("#"):
        raise ValueError(f"image id {image_id!r} cannot be written")


def read_annotations(path: str | Path, fmt: str = "ctw") -> dict[str, list[Polygon]]:
    return parse_annotations(_read_text(path), fmt)


def read_detections(path: str | Path) -> dict[str, list[tuple[float, Polygon]]]:
    return parse_detections(_read_text(path))


def _read_text(path: str | Path) -> str:
    data = Path(path).read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError("file is not valid UTF-8", offset=exc.start) from None


# --------------------------------------------------------------------------- score grids

def format_scoregrid(g: ScoreGrid) -> str:
    rows = [" ".join(repr(float(v)) for v in row) for row in g.values]
    return f"SCOREGRID {g.width} {g.height} {float(g.stride)!r}\n" + "".join(r + "\n" for r in rows)


def parse_scoregrid(text: str) -> ScoreGrid:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty score grid", 1)
    head = lines[0].split()
    if len(head) != 4 or head[0] != "SCOREGRID":
        raise ParseError("expected 'SCOREGRID <width> <height> <stride>'", 1)
    w, h = _int_token(head[1], 1), _int_token(head[2], 1)
    stride = _float_token(head[3], 1)
    if w < 1 or h < 1:
        raise ParseError("grid dimensions must be positive", 1)
    body = lines[1:]
    if len(body) != h:
        raise ParseError(f"expected {h} rows, got {len(body)}", len(lines))
    values = np.empty((h, w))
    for r, ln in enumerate(body):
        toks = ln.split()
        if len(toks) != w:
            raise ParseError(f"expected {w} values, got {len(toks)}", r + 2)
        values[r] = [_float_token(t, r + 2) for t in toks]
    try:
        return ScoreGrid(values, stride)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def scoregrid_to_bytes(g: ScoreGrid) -> bytes:
    head = SCOREGRID_MAGIC + struct.pack("<IIf", g.width, g.height, g.stride)
    return head + g.values.astype("<f4").tobytes()


def scoregrid_from_bytes(data: bytes) -> ScoreGrid:
    if data[:4] != SCOREGRID_MAGIC:
        raise ParseError("missing SGRD magic", offset=0)
    if len(data) < 16:
        raise ParseError("truncated header", offset=len(data))
    w, h, stride = struct.unpack_from("<IIf", data, 4)
    need = 16 + 4 * w * h
    if len(data) != need:
        raise ParseError(f"expected {need} bytes for a {w}x{h} grid, got {len(data)}", offset=min(len(data), need))
    with np.errstate(invalid="ignore"):
        values = np.frombuffer(data, dtype="<f4", count=w * h, offset=16).astype(np.float64)
    try:
        return ScoreGrid(values.reshape(h, w), float(stride))
    except ValueError as exc:
        raise ParseError(str(exc), offset=16) from None


def write_scoregrid(path: str | Path, g: ScoreGrid, binary: bool = False) -> None:
    if binary:
        Path(path).write_bytes(scoregrid_to_bytes(g))
    else:
        Path(path).write_text(format_scoregrid(g))


def read_scoregrid(path: str | Path) -> ScoreGrid:
    data = Path(path).read_bytes()
    if data[:4] == SCOREGRID_MAGIC:
        return scoregrid_from_bytes(data)
    try:
        return parse_scoregrid(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ParseError("file is not valid UTF-8", offset=exc.start) from None


# --------------------------------------------------------------------------- segment dumps

def format_segments(preds: Iterable[SegmentPrediction]) -> str:
    """Text dump: ``SEG <id> <cx> <cy> <side> <res> [<score>]`` then ``res`` rows of scores.

    The score field is omitted when it is 1.0.
    """
    out = []
    for p in preds:
        head = f"SEG {p.image_id} {float(p.cx)!r} {float(p.cy)!r} {float(p.side)!r} {p.resolution}"
        if p.score != 1.0:
            head += f" {float(p.score)!r}"
        out.append(head + "\n")
        out.extend(" ".join(repr(float(v)) for v in row) + "\n" for row in p.scores)
    return "".join(out)


def parse_segments(data: bytes | str) -> list[SegmentPrediction]:
    """Parse a text dump; errors report the byte offset of the offending line."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    lines = data.splitlines(keepends=True)
    starts = np.concatenate([[0], np.cumsum([len(ln) for ln in lines])]).astype(int).tolist()
    out: list[SegmentPrediction] = []
    k = 0

    def text(i: int) -> str:
        try:
            return lines[i].decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError("invalid UTF-8", i + 1, starts[i]) from None

    while k < len(lines):
        line = text(k)
        if not line.strip():
            k += 1
            continue
        off = starts[k]
        head = line.split()
        if head[0] != "SEG" or len(head) not in (6, 7):
            raise ParseError("expected 'SEG <image_id> <cx> <cy> <side> <resolution> [<score>]'", k + 1, off)
        image_id = head[1]
        cx, cy, side = (_float_token(t, k + 1, off) for t in head[2:5])
        if not _INT.fullmatch(head[5]):
            raise ParseError(f"resolution is not an integer: {head[5]!r}", k + 1, off)
        res = int(head[5])
        if res < 1:
            raise ParseError("resolution must be positive", k + 1, off)
        score = _float_token(head[6], k + 1, off) if len(head) == 7 else 1.0
        if k + res >= len(lines):
            raise ParseError(f"record needs {res} rows, file ends after {len(lines) - k - 1}", k + 1, off)
        scores = np.empty((res, res))
        for r in range(res):
            row = text(k + 1 + r).split()
            if len(row) != res:
                raise ParseError(f"mask row has {len(row)} values, expected {res}", k + 2 + r, starts[k + 1 + r])
            scores[r] = [_float_token(t, k + 2 + r, starts[k + 1 + r]) for t in row]
        try:
            out.append(SegmentPrediction(image_id, cx, cy, side, scores, score))
        except ValueError as exc:
            raise ParseError(str(exc), k + 1, off) from None
        k += res + 1
    return out


def segments_to_bytes(preds: Iterable[SegmentPrediction]) -> bytes:
    """Binary dump: per record ``SEGD``, u32 id length, id, f32 cx cy side, u32 res, f32 score, f32 values."""
    chunks = []
    for p in preds:
        ident = p.image_id.encode("utf-8")
        chunks.append(SEGMENT_MAGIC + struct.pack("<I", len(ident)) + ident)
        chunks.append(struct.pack("<fffIf", p.cx, p.cy, p.side, p.resolution, p.score))
        chunks.append(p.scores.astype("<f4").tobytes())
    return b"".join(chunks)


def segments_from_bytes(data: bytes) -> list[SegmentPrediction]:
    out: list[SegmentPrediction] = []
    pos = 0
    while pos < len(data):
        start = pos
        if data[pos:pos + 4] != SEGMENT_MAGIC:
            raise ParseError("missing SEGD magic", offset=pos)
        if pos + 8 > len(data):
            raise ParseError("truncated record header", offset=pos)
        (n,) = struct.unpack_from("<I", data, pos + 4)
        pos += 8
        if pos + n + 20 > len(data):
            raise ParseError("truncated record header", offset=start)
        try:
            image_id = data[pos:pos + n].decode("utf-8")
        except UnicodeDecodeError:
            raise ParseError("image id is not valid UTF-8", offset=pos) from None
        pos += n
        cx, cy, side, res, score = struct.unpack_from("<fffIf", data, pos)
        pos += 20
        need = 4 * res * res
        if res < 1 or pos + need > len(data):
            raise ParseError(f"mask of resolution {res} does not fit in the remaining data", offset=start)
        with np.errstate(invalid="ignore"):  # NaN payloads are rejected below, not warned about
            values = np.frombuffer(data, dtype="<f4", count=res * res, offset=pos).astype(np.float64)
        pos += need
        try:
            out.append(SegmentPrediction(image_id, float(cx), float(cy), float(side),
                                         values.reshape(res, res), float(score)))
        except ValueError as exc:
            raise ParseError(str(exc), offset=start) from None
    return out


def write_segment_dump(path: str | Path, preds: Iterable[SegmentPrediction], binary: bool = False) -> None:
    if binary:
        Path(path).write_bytes(segments_to_bytes(preds))
    else:
        Path(path).write_text(format_segments(preds))


def read_segment_dump(path: str | Path) -> list[SegmentPrediction]:
    """Read a text or binary dump (told apart by the leading magic)."""
    data = Path(path).read_bytes()
    if data[:4] == SEGMENT_MAGIC:
        return segments_from_bytes(data)
    return parse_segments(data)
