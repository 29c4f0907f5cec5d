"""Center-line fitting and 14-vertex polygon construction for merged regions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geom import GeometryError, Polygon, oriented_rect
from .merge import MergedRegion

N_CENTER_POINTS = 7
DEFAULT_SAMPLE = 512


@dataclass(frozen=True, eq=False)
class PrincipalCurve:
    """Polyline through the middle of a point cloud."""

    vertices: np.ndarray
    iterations: int = 0
    converged: bool = True

    @property
    def length(self) -> float:
        return float(np.hypot(*np.diff(self.vertices, axis=0).T).sum())


@dataclass(frozen=True, eq=False)
class CenterLine:
    points: np.ndarray    # (7, 2)
    tangents: np.ndarray  # (7, 2) unit vectors

    @property
    def normals(self) -> np.ndarray:
        """Screen-left normals, i.e. towards the text top for left-to-right lines."""
        return np.column_stack([self.tangents[:, 1], -self.tangents[:, 0]])


def _dedupe(vertices: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    step = np.hypot(*np.diff(vertices, axis=0).T)
    keep = np.concatenate([[True], step > tol])
    return vertices[keep]


def _cumlen(vertices: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(vertices, axis=0).T))])


def project_to_polyline(points: np.ndarray, vertices: np.ndarray, extend: bool = True):
    """Closest point on a polyline for each input point.

    With ``extend`` the first and last segments are treated as rays, so
    points beyond the ends get arc-length parameters below 0 or above the
    total length.

    Returns:
        ``(lam, proj, dist)``: arc-length parameter, projected point and
        distance, one entry per input point.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a = vertices[:-1]
    d = vertices[1:] - a
    seg_len = np.hypot(d[:, 0], d[:, 1])
    cum = _cumlen(vertices)
    rel = pts[:, None, :] - a[None, :, :]
    t = (rel * d[None, :, :]).sum(axis=2) / (seg_len ** 2)[None, :]
    lo = np.zeros(len(a))
    hi = np.ones(len(a))
    if extend:
        lo[0] = -np.inf
        hi[-1] = np.inf
    t = np.clip(t, lo[None, :], hi[None, :])
    foot = a[None, :, :] + t[:, :, None] * d[None, :, :]
    dist2 = ((pts[:, None, :] - foot) ** 2).sum(axis=2)
    k = np.argmin(dist2, axis=1)
    rows = np.arange(len(pts))
    lam = cum[k] + t[rows, k] * seg_len[k]
    proj = foot[rows, k]
    return lam, proj, np.sqrt(dist2[rows, k])


def _point_at(vertices: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Points at arc-length ``lam``; values outside [0, L] extrapolate the end segments."""
    cum = _cumlen(vertices)
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    k = np.clip(np.searchsorted(cum, lam, side="right") - 1, 0, len(vertices) - 2)
    seg = vertices[k + 1] - vertices[k]
    seg_len = cum[k + 1] - cum[k]
    t = (lam - cum[k]) / seg_len
    return vertices[k] + t[:, None] * seg


def local_linear_smooth(lam: np.ndarray, values: np.ndarray, grid: np.ndarray, radius: float) -> np.ndarray:
    """Tricube-weighted local linear regression of ``values`` on ``lam`` at ``grid``."""
    u = (lam[None, :] - grid[:, None]) / radius
    w = np.where(np.abs(u) < 1.0, (1.0 - np.abs(u) ** 3) ** 3, 0.0)
    dx = lam[None, :] - grid[:, None]
    s0 = w.sum(axis=1)
    s1 = (w * dx).sum(axis=1)
    s2 = (w * dx * dx).sum(axis=1)
    t0 = (w * values[None, :]).sum(axis=1)
    t1 = (w * dx * values[None, :]).sum(axis=1)
    den = s0 * s2 - s1 * s1
    scale = np.maximum(s0 * s2, 1e-300)
    ok = (s0 > 0) & (den > 1e-10 * scale)
    out = np.empty_like(grid)
    out[ok] = (s2[ok] * t0[ok] - s1[ok] * t1[ok]) / den[ok]
    bad = ~ok
    if bad.any():
        # too few neighbours for a slope: nearest-neighbour value
        nearest = np.argmin(np.abs(lam[None, :] - grid[bad][:, None]), axis=1)
        out[bad] = np.where(s0[bad] > 0, t0[bad] / np.maximum(s0[bad], 1e-300), values[nearest])
    return out


def _orient(vertices: np.ndarray) -> np.ndarray:
    """Run left to right; near-vertical curves run top to bottom."""
    chord = vertices[-1] - vertices[0]
    if abs(chord[0]) > 1e-9 * max(1.0, abs(chord[1])):
        return vertices if chord[0] > 0 else vertices[::-1].copy()
    return vertices if chord[1] >= 0 else vertices[::-1].copy()


def fit_principal_curve(points, n_vertices: int = 50, bandwidth: float = 0.3,
                        max_iter: int = 20, tol: float = 1e-3) -> PrincipalCurve:
    """Project-and-smooth principal curve.

    Starts from the first principal component segment, then alternates
    projecting the points onto the polyline and smoothing x and y against
    the projection arc length, rebuilding the polyline from ``n_vertices``
    smoothed samples.  Stops once the mean movement of the projections is
    below ``tol`` times the cloud diagonal.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        raise GeometryError("principal curve needs at least two points")
    span = pts.max(axis=0) - pts.min(axis=0)
    diag = float(np.hypot(*span))
    if diag <= 1e-12:
        raise GeometryError("all points coincide")

    center = pts.mean(axis=0)
    _, sv, vt = np.linalg.svd(pts - center, full_matrices=False)
    axis = vt[0]
    lam = (pts - center) @ axis
    if sv[1] <= 1e-9 * sv[0]:
        line = np.array([center + lam.min() * axis, center + lam.max() * axis])
        return PrincipalCurve(_orient(line), 0, True)

    vertices = center + np.linspace(lam.min(), lam.max(), n_vertices)[:, None] * axis[None, :]
    prev = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        lam, proj, dist = project_to_polyline(pts, vertices)
        if prev is not None and np.mean(np.hypot(*(proj - prev).T)) < tol * diag:
            converged = True
            break
        prev = proj
        extent = lam.max() - lam.min()
        # Within about one half-thickness of either end the arc-length order
        # mixes points from across the band, which makes the ends curl;
        # smooth only the interior and let the caller extend the ends.
        trim = min(2.0 * float(dist.mean()), 0.25 * extent)
        grid = np.linspace(lam.min() + trim, lam.max() - trim, n_vertices)
        # bandwidth is the full kernel window, as a fraction of the arc length
        radius = 0.5 * bandwidth * extent
        xs = local_linear_smooth(lam, pts[:, 0], grid, radius)
        ys = local_linear_smooth(lam, pts[:, 1], grid, radius)
        new = _dedupe(np.column_stack([xs, ys]))
        if len(new) < 2:
            break
        vertices = new
    return PrincipalCurve(_orient(vertices), it, converged)


def trim_extend(curve: PrincipalCurve | np.ndarray, lam_lo: float, lam_hi: float) -> np.ndarray:
    """Polyline restricted to arc length [lam_lo, lam_hi], extrapolating past the ends."""
    v = curve.vertices if isinstance(curve, PrincipalCurve) else np.asarray(curve, dtype=np.float64)
    cum = _cumlen(v)
    inner = v[(cum > lam_lo) & (cum < lam_hi)]
    ends = _point_at(v, np.array([lam_lo, lam_hi]))
    return _dedupe(np.vstack([ends[:1], inner, ends[1:]]))


def sample_center_points(curve: PrincipalCurve | np.ndarray, count: int = N_CENTER_POINTS) -> CenterLine:
    """Points at equal arc-length fractions, with unit tangents."""
    v = curve.vertices if isinstance(curve, PrincipalCurve) else np.asarray(curve, dtype=np.float64)
    v = _dedupe(v)
    cum = _cumlen(v)
    total = cum[-1] if len(v) > 1 else 0.0
    if total <= 1e-12:
        raise GeometryError("center line has zero length")
    at = np.linspace(0.0, total, count)
    pts = _point_at(v, at)
    pts[0], pts[-1] = v[0], v[-1]
    delta = total * 1e-3
    fwd = _point_at(v, np.minimum(at + delta, total))
    back = _point_at(v, np.maximum(at - delta, 0.0))
    tan = fwd - back
    tan /= np.hypot(tan[:, 0], tan[:, 1])[:, None]
    return CenterLine(pts, tan)


def sample_positive_pixels(region: MergedRegion, n: int = DEFAULT_SAMPLE, seed: int = 0) -> np.ndarray:
    """Centres of the region's cells, or a seeded uniform subsample of ``n`` of them."""
    if n < N_CENTER_POINTS:
        raise ValueError(f"n must be at least {N_CENTER_POINTS}")
    cells = region.support_cells()
    if len(cells) == 0:
        raise GeometryError("region is empty")
    if len(cells) <= n:
        return cells
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(len(cells), size=n, replace=False))
    return cells[pick]


def slab_extents(cells: np.ndarray, cl: CenterLine, pad: float) -> np.ndarray:
    """Top/bottom offsets of the rectangle fitted to each slab.

    Slab ``i`` holds the cells projecting between ``p_i`` and ``p_{i+1}``
    (open-ended beyond the first and last point).  The rectangle is the
    circumscribed one with axis ``p_i -> p_{i+1}``, narrowed about its own
    mid-line to the width whose area matches the slab's cells: the raw
    circumscribed width overshoots on curved slabs by the sagitta and on
    tilted edges by the cell rasterisation.

    Args:
        cells: cell centres, shape ``(m, 2)``.
        cl: the center line.
        pad: half the cell side; cells are squares of side ``2 * pad``.

    Returns:
        Array of shape ``(count-1, 2)`` holding (top, bottom) offsets from
        the slab axis, NaN rows for empty slabs.
    """
    p = cl.points
    nslab = len(p) - 1
    cell_area = (2.0 * pad) ** 2
    out = np.full((nslab, 2), np.nan)
    for i in range(nslab):
        axis = p[i + 1] - p[i]
        seg = float(np.hypot(*axis))
        if seg <= 1e-12:
            continue
        u = axis / seg
        t = (cells - p[i]) @ u
        inner = (t >= 0.0) & (t <= seg)
        sel = inner.copy()
        if i == 0:
            sel |= t < 0.0
        if i == nslab - 1:
            sel |= t > seg
        if not sel.any():
            continue
        chosen = cells[sel]
        n = np.array([u[1], -u[0]])
        try:
            rect = oriented_rect(chosen, u)
            # first two corners lie on the top (screen-left) side
            top = float((rect.xy[0] - p[i]) @ n) + pad
            bottom = float(-(rect.xy[2] - p[i]) @ n) + pad
        except GeometryError:
            s = (chosen - p[i]) @ n
            top, bottom = float(s.max()) + pad, float(-s.min()) + pad
        width = top + bottom
        if inner.any():
            width = min(width, np.count_nonzero(inner) * cell_area / seg)
        mid = 0.5 * (top - bottom)
        out[i] = (mid + 0.5 * width, 0.5 * width - mid)
    return out


def _fill_empty(ext: np.ndarray) -> np.ndarray:
    ok = ~np.isnan(ext[:, 0])
    if not ok.any():
        raise GeometryError("no region cells fall inside any slab")
    idx = np.nonzero(ok)[0]
    out = ext.copy()
    for i in np.nonzero(~ok)[0]:
        nearest = idx[np.argmin(np.abs(idx - i))]
        out[i] = ext[nearest]
    return out


def build_polygon(region: MergedRegion, cl: CenterLine) -> Polygon:
    """14-vertex polygon: 7 top vertices along the center line, then 7 bottom ones back."""
    cells = region.support_cells()
    if len(cells) == 0:
        raise GeometryError("region is empty")
    pad = region.mask.stride / 2.0
    ext = _fill_empty(slab_extents(cells, cl, pad))
    count = len(cl.points)
    widths = np.empty((count, 2))
    widths[0] = ext[0]
    widths[-1] = ext[-1]
    widths[1:-1] = 0.5 * (ext[:-1] + ext[1:])
    widths = np.maximum(widths, pad)
    nrm = cl.normals
    top = cl.points + widths[:, :1] * nrm
    bottom = cl.points - widths[:, 1:] * nrm
    poly = Polygon(np.vstack([top, bottom[::-1]]))
    if not poly.is_simple():
        raise GeometryError("generated text polygon self-intersects")
    return poly


def center_line_for_region(region: MergedRegion, n: int = DEFAULT_SAMPLE, seed: int = 0) -> CenterLine:
    """Fit, extend to the region's extreme cell projections, and sample 7 points."""
    sample = sample_positive_pixels(region, n, seed)
    curve = fit_principal_curve(sample)
    cells = region.support_cells()
    lam, _, _ = project_to_polyline(cells, curve.vertices)
    pad = region.mask.stride / 2.0
    line = trim_extend(curve, float(lam.min()) - pad, float(lam.max()) + pad)
    return sample_center_points(line)


def region_polygon(region: MergedRegion, n: int = DEFAULT_SAMPLE, seed: int = 0) -> Polygon:
    return build_polygon(region, center_line_for_region(region, n, seed))
