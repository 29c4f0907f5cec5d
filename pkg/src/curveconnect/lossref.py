"""Reference (non-training) implementations of the detector losses and their gradients.

All functions accept scalars or numpy arrays and work in float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .maskgrid import ScoreGrid

PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    alpha_t: float = 0.25
    gamma: float = 2.0

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda2 > 0):
            raise ValueError("loss weights must be positive")
        if not 0.0 < self.alpha_t < 1.0:
            raise ValueError("alpha_t must lie in (0, 1)")
        if not self.gamma >= 0.0:
            raise ValueError("gamma must be non-negative")


DEFAULT_LOSS = LossConfig()


def _p_t(p, y):
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    if np.any(~np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    if np.any((y != 0) & (y != 1)):
        raise ValueError("labels must be 0 or 1")
    pt = np.where(y == 1, p, 1.0 - p)
    return np.clip(pt, PROB_EPS, 1.0)


def focal_from_pt(pt, alpha_t: float = 0.25, gamma: float = 2.0):
    """-alpha_t * (1 - p_t)**gamma * ln(p_t), no clamping."""
    pt = np.asarray(pt, dtype=np.float64)
    return -alpha_t * (1.0 - pt) ** gamma * np.log(pt)


def focal_loss(p, y, cfg: LossConfig = DEFAULT_LOSS):
    """Focal loss of predicted text probability ``p`` against binary label ``y``."""
    out = focal_from_pt(_p_t(p, y), cfg.alpha_t, cfg.gamma)
    return float(out) if np.ndim(out) == 0 else out


def focal_loss_grad(p, y, cfg: LossConfig = DEFAULT_LOSS):
    """d focal_loss / d p.  Zero where p_t is clamped."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y)
    raw = np.where(y == 1, p, 1.0 - p)
    pt = _p_t(p, y)
    a, g = cfg.alpha_t, cfg.gamma
    q = 1.0 - pt
    # gamma * q**(gamma-1) blows up at q == 0 only when gamma < 1; the product with ln(pt)=0 is 0 there
    with np.errstate(divide="ignore", invalid="ignore"):
        lead = np.where(q > 0.0, g * q ** (g - 1.0) * np.log(pt), 0.0) if g != 0 else 0.0
    d_dpt = a * (lead - q ** g / pt)
    d_dpt = np.where(raw < PROB_EPS, 0.0, d_dpt)
    out = np.where(y == 1, d_dpt, -d_dpt)
    return float(out) if np.ndim(out) == 0 else out


def _grid_values(g) -> np.ndarray:
    return g.values if isinstance(g, ScoreGrid) else np.asarray(g, dtype=np.float64)


def cls_loss(preds: Sequence, labels: Sequence, cfg: LossConfig = DEFAULT_LOSS) -> float:
    """Sum over feature levels of the per-level mean focal loss."""
    if len(preds) != len(labels):
        raise ValueError("need one label grid per prediction grid")
    total = 0.0
    for p, y in zip(preds, labels):
        pv, yv = _grid_values(p), np.asarray(_grid_values(y))
        if pv.shape != yv.shape:
            raise ValueError(f"shape mismatch: {pv.shape} vs {yv.shape}")
        total += float(np.mean(focal_loss(pv, yv.astype(int), cfg)))
    return total


def cls_loss_grad(preds: Sequence, labels: Sequence, cfg: LossConfig = DEFAULT_LOSS) -> list[np.ndarray]:
    grads = []
    for p, y in zip(preds, labels):
        pv, yv = _grid_values(p), np.asarray(_grid_values(y))
        if pv.shape != yv.shape:
            raise ValueError(f"shape mismatch: {pv.shape} vs {yv.shape}")
        grads.append(np.asarray(focal_loss_grad(pv, yv.astype(int), cfg)) / pv.size)
    return grads


def smooth_l1(x):
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)
    return float(out) if np.ndim(out) == 0 else out


def smooth_l1_grad(x):
    """Derivative of smooth_l1; at |x| == 1 the quadratic branch (x) is used."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(np.abs(x) <= 1.0, x, np.sign(x))
    return float(out) if np.ndim(out) == 0 else out


def segment_loss(pred, label) -> float:
    """Mean smooth-L1 between predicted and target segment scores."""
    pv, lv = _grid_values(pred), _grid_values(label)
    if pv.shape != lv.shape:
        raise ValueError(f"shape mismatch: {pv.shape} vs {lv.shape}")
    return float(np.mean(smooth_l1(pv - lv)))


def segment_loss_grad(pred, label) -> np.ndarray:
    pv, lv = _grid_values(pred), _grid_values(label)
    if pv.shape != lv.shape:
        raise ValueError(f"shape mismatch: {pv.shape} vs {lv.shape}")
    return np.asarray(smooth_l1_grad(pv - lv)) / pv.size


def total_loss(cls: float, seg: float, cfg: LossConfig = DEFAULT_LOSS) -> float:
    if cls < 0 or seg < 0:
        raise ValueError("loss terms must be non-negative")
    return cfg.lambda1 * cls + cfg.lambda2 * seg


def relative_error(a, b, floor: float = 1e-12):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def central_difference(f, x, h: float = 1e-5):
    x = np.asarray(x, dtype=np.float64)
    return (f(x + h) - f(x - h)) / (2.0 * h)


def gradient_check(n: int = 1000, seed: int = 0, h: float = 1e-5) -> dict[str, float]:
    """Compare analytic gradients with central differences on random inputs.

    Returns the maximum relative error per checked function plus the jumps of
    smooth_l1 and its derivative across |x| = 1.
    """
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.02, 0.98, n)
    y = rng.integers(0, 2, n)
    alpha = rng.uniform(0.05, 0.95, n)
    gamma = rng.uniform(0.0, 5.0, n)
    focal_err = 0.0
    for pi, yi, ai, gi in zip(p, y, alpha, gamma):
        cfg = LossConfig(alpha_t=float(ai), gamma=float(gi))
        fd = central_difference(lambda q: focal_loss(q, yi, cfg), pi, h)
        focal_err = max(focal_err, float(relative_error(focal_loss_grad(pi, yi, cfg), fd)))

    # keep clear of the kink at |x| = 1 where one-sided differences straddle branches
    x = rng.uniform(-4.0, 4.0, n)
    x = np.where(np.abs(np.abs(x) - 1.0) < 10 * h, x + 20 * h, x)
    fd = central_difference(smooth_l1, x, h)
    sl1_err = float(np.max(relative_error(smooth_l1_grad(x), fd)))

    jumps = []
    djumps = []
    for edge in (-1.0, 1.0):
        lo, hi = np.nextafter(edge, -np.inf), np.nextafter(edge, np.inf)
        jumps.append(abs(smooth_l1(lo) - smooth_l1(hi)))
        jumps.append(abs(smooth_l1(edge) - 0.5))
        djumps.append(abs(smooth_l1_grad(lo) - smooth_l1_grad(hi)))
        djumps.append(abs(smooth_l1_grad(edge) - edge))
    return {
        "focal_grad_max_rel_err": focal_err,
        "smooth_l1_grad_max_rel_err": sl1_err,
        "smooth_l1_value_jump": float(max(jumps)),
        "smooth_l1_grad_jump": float(max(djumps)),
    }
