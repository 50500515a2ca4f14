"""Deterministic z-buffer point splatting.

Each point is transformed, projected and splatted over a small square
footprint. Per pixel the nearest point wins the depth; points within a
relative depth tolerance of the winner blend their colors by averaging.
Ties in depth break toward the lowest point index, which makes the output
bit-identical across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, DepthMap, PointCloud, ViewTransform, inverse_pose

__all__ = ["SplatConfig", "RenderOutput", "render", "render_back"]

# Points closer than this to the camera plane are culled before projection.
_Z_CULL = 1e-6


@dataclass(frozen=True)
class SplatConfig:
    footprint: int = 3  # odd splat width in pixels
    depth_merge_eps: float = 0.01  # relative tolerance for same-surface blending

    def __post_init__(self):
        if self.footprint not in (1, 3, 5):
            raise ValueError("footprint must be 1, 3 or 5")
        if not (0.0 < self.depth_merge_eps < 1.0):
            raise ValueError("depth_merge_eps must lie in (0, 1)")


@dataclass(frozen=True)
class RenderOutput:
    image: np.ndarray  # (H, W, 3) in [0, 1]
    depth: DepthMap
    coverage: np.ndarray  # (H, W) bool, pixels hit by at least one splat

    @property
    def coverage_fraction(self) -> float:
        return float(self.coverage.mean())


def render(
    cloud: PointCloud,
    vt: ViewTransform,
    cam: CameraIntrinsics,
    cfg: SplatConfig = SplatConfig(),
) -> RenderOutput:
    if len(cloud) == 0:
        raise ValueError("cannot render an empty point cloud")

    h, w = cam.height, cam.width
    pts = vt.apply(cloud.positions)
    z = pts[:, 2]
    keep = z > _Z_CULL
    idx = np.nonzero(keep)[0]
    if idx.size == 0:
        return _empty_output(h, w)

    zk = z[idx]
    uc = np.rint(cam.f * pts[idx, 0] / zk + cam.u0).astype(np.int64)
    vc = np.rint(cam.f * pts[idx, 1] / zk + cam.v0).astype(np.int64)

    # Expand each point over its footprint. Offsets are ordered center-first
    # so candidate order (and therefore float accumulation order) is fixed.
    r = cfg.footprint // 2
    offsets = sorted(
        ((du, dv) for dv in range(-r, r + 1) for du in range(-r, r + 1)),
        key=lambda o: (max(abs(o[0]), abs(o[1])), o[1], o[0]),
    )
    pix_parts, z_parts, idx_parts, ring_parts = [], [], [], []
    for du, dv in offsets:
        uu = uc + du
        vv = vc + dv
        ok = (uu >= 0) & (uu < w) & (vv >= 0) & (vv < h)
        pix_parts.append(vv[ok] * w + uu[ok])
        z_parts.append(zk[ok])
        idx_parts.append(idx[ok])
        ring_parts.append(np.full(int(ok.sum()), max(abs(du), abs(dv)), dtype=np.float64))
    pix = np.concatenate(pix_parts)
    if pix.size == 0:
        return _empty_output(h, w)
    zs = np.concatenate(z_parts)
    pi = np.concatenate(idx_parts)
    ring = np.concatenate(ring_parts)

    # Winner per pixel by (splat ring, depth, point index). Center hits
    # outrank the outer rings so the footprint only fills pixels no point
    # lands on directly, which keeps slanted surfaces unbiased while still
    # closing pinholes. The composite key orders by ring then depth exactly.
    key = ring * (2.0 * float(zs.max())) + zs
    best_key = np.full(h * w, np.inf)
    np.minimum.at(best_key, pix, key)
    on_win_key = key == best_key[pix]
    z_win = np.zeros(h * w)
    z_win[pix[on_win_key]] = zs[on_win_key]  # equal z among key ties
    covered = np.isfinite(best_key)

    blend = zs <= z_win[pix] * (1.0 + cfg.depth_merge_eps)
    color_sum = np.zeros((h * w, 3))
    count = np.zeros(h * w)
    np.add.at(color_sum, pix[blend], cloud.colors[pi[blend]])
    np.add.at(count, pix[blend], 1.0)

    image = np.zeros((h * w, 3))
    image[covered] = color_sum[covered] / count[covered, None]
    image = image.reshape(h, w, 3)
    depth_vals = z_win.reshape(h, w)
    coverage = covered.reshape(h, w)

    return RenderOutput(
        image=image,
        depth=DepthMap(values=depth_vals, mask=coverage.copy()),
        coverage=coverage,
    )


def render_back(
    cloud: PointCloud,
    vt_forward: ViewTransform,
    cam: CameraIntrinsics,
    cfg: SplatConfig = SplatConfig(),
) -> RenderOutput:
    """Render with the exact inverse of the forward transform."""
    return render(cloud, inverse_pose(vt_forward), cam, cfg)


def _empty_output(h: int, w: int) -> RenderOutput:
    return RenderOutput(
        image=np.zeros((h, w, 3)),
        depth=DepthMap(values=np.zeros((h, w)), mask=np.zeros((h, w), dtype=bool)),
        coverage=np.zeros((h, w), dtype=bool),
    )
