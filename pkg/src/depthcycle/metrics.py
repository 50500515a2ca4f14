"""Scale-aligned depth evaluation metrics: AbsRel, delta1, point-cloud RMSE."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .depthnorm import median_scale
from .geometry import CameraIntrinsics, DepthMap, unproject

__all__ = ["EvalReport", "absrel", "delta1", "eval_scale_aligned", "pc_rmse"]


@dataclass(frozen=True)
class EvalReport:
    absrel: float
    delta1: float  # percentage in [0, 100]
    scale_used: float
    pixels_evaluated: int
    pc_rmse: float | None = None

    def to_dict(self) -> dict:
        return {
            "absrel": self.absrel,
            "delta1": self.delta1,
            "scale_used": self.scale_used,
            "pixels_evaluated": self.pixels_evaluated,
            "pc_rmse": self.pc_rmse,
        }


def _pair(depth: DepthMap, depth_star: DepthMap) -> tuple[np.ndarray, np.ndarray]:
    if depth.shape != depth_star.shape:
        raise ValueError("depth maps must have equal shapes")
    m = depth.mask & depth_star.mask
    if not m.any():
        raise ValueError("depth masks do not intersect")
    return depth.values[m], depth_star.values[m]


def absrel(depth: DepthMap, depth_star: DepthMap) -> float:
    """Mean |D - D*| / D* over the jointly valid pixels."""
    d, ds = _pair(depth, depth_star)
    return float(np.mean(np.abs(d - ds) / ds))


def delta1(depth: DepthMap, depth_star: DepthMap) -> float:
    """Percentage of pixels with max(D/D*, D*/D) < 1.25."""
    d, ds = _pair(depth, depth_star)
    ratio = np.maximum(d / ds, ds / d)
    return float(np.mean(ratio < 1.25) * 100.0)


def eval_scale_aligned(
    depth: DepthMap,
    depth_star: DepthMap,
    cam: CameraIntrinsics | None = None,
) -> EvalReport:
    """Median-scale align the prediction, then compute AbsRel and delta1.

    When a camera is supplied the point-cloud RMSE of the aligned prediction
    is included as well.
    """
    s = median_scale(depth, depth_star)
    m = depth.mask & depth_star.mask
    scaled = DepthMap(values=np.where(m, s * depth.values, 0.0), mask=m)
    gated = DepthMap(values=np.where(m, depth_star.values, 0.0), mask=m)
    return EvalReport(
        absrel=absrel(scaled, gated),
        delta1=delta1(scaled, gated),
        scale_used=s,
        pixels_evaluated=int(m.sum()),
        pc_rmse=pc_rmse(depth, depth_star, cam) if cam is not None else None,
    )


def pc_rmse(depth: DepthMap, depth_star: DepthMap, cam: CameraIntrinsics) -> float:
    """RMSE between point clouds unprojected from the scale-aligned maps.

    Correspondence is by source pixel, so the distance is exact and needs
    no nearest-neighbour search.
    """
    s = median_scale(depth, depth_star)
    m = depth.mask & depth_star.mask
    dummy = np.zeros((*depth.shape, 3))
    p = unproject(DepthMap(values=np.where(m, s * depth.values, 0.0), mask=m), cam, dummy)
    q = unproject(DepthMap(values=np.where(m, depth_star.values, 0.0), mask=m), cam, dummy)
    d2 = np.sum((p.positions - q.positions) ** 2, axis=1)
    return float(np.sqrt(np.mean(d2)))
