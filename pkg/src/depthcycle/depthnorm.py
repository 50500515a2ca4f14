"""Scale-and-shift invariant depth statistics, losses and affine alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DepthMap

__all__ = [
    "SsiStats",
    "AffineCoeffs",
    "SIGMA_FLOOR",
    "ssi_stats",
    "ssi_normalize",
    "ssi_loss",
    "lstsq_align",
    "apply_affine",
    "median_scale",
]

# Constant rendered-depth patches occur under extreme poses, so the scale is
# floored instead of raising inside loss paths.
SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class SsiStats:
    mu: float  # median shift
    sigma: float  # mean absolute deviation scale, floored


@dataclass(frozen=True)
class AffineCoeffs:
    a: float  # scale
    b: float  # shift, depth units

    def __post_init__(self):
        if not np.isfinite(self.a) or not np.isfinite(self.b):
            raise ValueError("affine coefficients must be finite")


def ssi_stats(depth: DepthMap) -> SsiStats:
    """Median shift and mean-absolute-deviation scale over valid pixels."""
    vals = depth.valid_values()
    if vals.size == 0:
        raise ValueError("depth map has no valid pixels")
    mu = float(np.median(vals))
    sigma = float(np.mean(np.abs(vals - mu)))
    return SsiStats(mu=mu, sigma=max(sigma, SIGMA_FLOOR))


def _normalize_values(vals: np.ndarray) -> np.ndarray:
    mu = np.median(vals)
    sigma = max(float(np.mean(np.abs(vals - mu))), SIGMA_FLOOR)
    return (vals - mu) / sigma


def ssi_normalize(depth: DepthMap, stats: SsiStats) -> np.ndarray:
    """(D - mu) / sigma on valid pixels; invalid pixels are zero-filled."""
    if not (stats.sigma > 0):
        raise ValueError("sigma must be positive")
    out = np.zeros_like(depth.values)
    out[depth.mask] = (depth.values[depth.mask] - stats.mu) / stats.sigma
    return out


def _intersection(d1: DepthMap, d2: DepthMap) -> np.ndarray:
    if d1.shape != d2.shape:
        raise ValueError("depth maps must have equal shapes")
    m = d1.mask & d2.mask
    if not m.any():
        raise ValueError("depth masks do not intersect")
    return m


def ssi_loss(depth: DepthMap, depth_star: DepthMap) -> float:
    """Mean L1 between the two normalized maps over the mask intersection.

    Statistics are recomputed over the intersection only, which makes the
    value invariant to positive affine changes of either argument.
    """
    m = _intersection(depth, depth_star)
    a = _normalize_values(depth.values[m])
    b = _normalize_values(depth_star.values[m])
    return float(np.mean(np.abs(a - b)))


def lstsq_align(depth_pred: DepthMap, depth_ref: DepthMap) -> AffineCoeffs:
    """Ordinary least squares (a, b) minimizing sum (a D_pred + b - D_ref)^2."""
    m = _intersection(depth_pred, depth_ref)
    x = depth_pred.values[m]
    y = depth_ref.values[m]
    if x.size < 2 or np.ptp(x) == 0.0:
        raise ValueError("alignment needs >= 2 pixels with non-constant prediction")
    xm = x.mean()
    ym = y.mean()
    var = np.mean((x - xm) ** 2)
    cov = np.mean((x - xm) * (y - ym))
    a = cov / var
    b = ym - a * xm
    return AffineCoeffs(a=float(a), b=float(b))


def apply_affine(depth: DepthMap, coeffs: AffineCoeffs) -> DepthMap:
    """a D + b on valid pixels; pixels driven to <= 0 leave the mask."""
    values = coeffs.a * depth.values + coeffs.b
    mask = depth.mask & (values > 0) & np.isfinite(values)
    return DepthMap(values=np.where(mask, values, 0.0), mask=mask)


def median_scale(depth: DepthMap, depth_star: DepthMap) -> float:
    """s = median(D* / D) over the mask intersection."""
    m = _intersection(depth, depth_star)
    d = depth.values[m]
    if np.any(d <= 0):
        raise ValueError("prediction must be positive on the evaluated pixels")
    return float(np.median(depth_star.values[m] / d))
