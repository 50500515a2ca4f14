"""Multi-view consistency cycle.

Unprojects the input depth, renders a novel view, obtains depth of that
view from a provider, least-squares aligns it to the rendered depth,
reconstructs and renders back to the original view, then scores image and
depth consistency. Also implements the multi-focal-length selection that
keeps the candidate with the smallest consistency loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .depthnorm import AffineCoeffs, apply_affine, lstsq_align, ssi_loss
from .geometry import (
    CameraIntrinsics,
    DepthMap,
    PointCloud,
    ViewTransform,
    min_depth,
    novel_pose,
    sample_view_params,
    unproject,
)
from .providers import DepthProvider
from .renderer import RenderOutput, SplatConfig, render, render_back

__all__ = [
    "DegenerateViewError",
    "CycleConfig",
    "CycleReport",
    "render_novel",
    "cycle_consistency",
    "depth_consistency_loss",
    "run_cycle",
    "mfl_select",
    "total_loss",
]

# Loss assigned to the image term when alignment produces a non-positive
# scale and the geometric round trip cannot be completed.
MAX_IMAGE_LOSS = 1.0


class DegenerateViewError(RuntimeError):
    """The sampled view covers too little of the frame to be usable."""


@dataclass(frozen=True)
class CycleConfig:
    alpha: float = 1.0  # weight of the image consistency term
    beta: float = 0.1  # weight of the cycle term in the total training loss
    fov_candidates: tuple[float, ...] = (50.0, 60.0, 70.0)
    min_coverage: float = 0.10
    views_per_image: int = 1
    rng_seed: int = 0
    max_resample: int = 8
    splat: SplatConfig = field(default_factory=SplatConfig)

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be non-negative")
        if len(self.fov_candidates) == 0:
            raise ValueError("fov_candidates must be nonempty")
        if not (0.0 < self.min_coverage <= 1.0):
            raise ValueError("min_coverage must lie in (0, 1]")


@dataclass(frozen=True)
class CycleReport:
    loss_img: float
    loss_depth: float
    loss_total: float
    align: AffineCoeffs
    coverage_img: float
    coverage_depth: float
    theta: float
    t: float
    align_degenerate: bool = False  # non-positive scale from alignment
    per_fov: tuple[tuple[float, float], ...] = ()
    chosen_fov: float | None = None

    def to_dict(self) -> dict:
        return {
            "loss_img": self.loss_img,
            "loss_depth": self.loss_depth,
            "loss_total": self.loss_total,
            "align": {"a": self.align.a, "b": self.align.b},
            "coverage_img": self.coverage_img,
            "coverage_depth": self.coverage_depth,
            "theta": self.theta,
            "t": self.t,
            "align_degenerate": self.align_degenerate,
            "per_fov": [list(p) for p in self.per_fov],
            "chosen_fov": self.chosen_fov,
        }


def render_novel(
    image: np.ndarray,
    depth: DepthMap,
    cam: CameraIntrinsics,
    theta: float,
    t: float,
    splat: SplatConfig = SplatConfig(),
    min_coverage: float = 0.10,
) -> tuple[RenderOutput, ViewTransform, PointCloud]:
    """Unproject and render the scene from the perturbed viewpoint.

    Raises DegenerateViewError when the rendered coverage falls below
    min_coverage of the frame; callers resample the view parameters.
    """
    cloud = unproject(depth, cam, image)
    vt = novel_pose(theta, t, min_depth(cloud))
    out = render(cloud, vt, cam, splat)
    if out.coverage_fraction < min_coverage:
        raise DegenerateViewError(
            f"novel view covers {out.coverage_fraction:.1%} of the frame "
            f"(minimum {min_coverage:.1%})"
        )
    return out, vt, cloud


def cycle_consistency(
    image: np.ndarray,
    depth_pred: DepthMap,
    cam: CameraIntrinsics,
    provider: DepthProvider,
    theta: float,
    t: float,
    cfg: CycleConfig = CycleConfig(),
) -> CycleReport:
    image = np.asarray(image, dtype=np.float64)
    novel, vt, cloud = render_novel(
        image, depth_pred, cam, theta, t, cfg.splat, cfg.min_coverage
    )

    provider.note_render(novel.image, cam, vt, min_z=min_depth(cloud))
    novel_pred = provider.predict_depth(novel.image)

    joint = novel.depth.mask & novel_pred.mask
    if not joint.any():
        raise DegenerateViewError("provider mask does not overlap the rendered view")
    masked_pred = DepthMap(values=np.where(joint, novel_pred.values, 0.0), mask=joint)
    masked_ref = DepthMap(values=np.where(joint, novel.depth.values, 0.0), mask=joint)

    align = lstsq_align(masked_pred, masked_ref)
    loss_depth = ssi_loss(masked_pred, masked_ref)
    coverage_depth = float(joint.mean())

    if align.a <= 0:
        # Geometry step is meaningless under a flipped alignment; penalize
        # the image term so optimization objectives stay total.
        loss_img = MAX_IMAGE_LOSS
        coverage_img = 0.0
        degenerate = True
    else:
        aligned = apply_affine(masked_pred, align)
        cloud_pred = unproject(aligned, cam, novel.image)
        back = render_back(cloud_pred, vt, cam, cfg.splat)
        m_img = back.coverage & depth_pred.mask
        if not m_img.any():
            loss_img = MAX_IMAGE_LOSS
            coverage_img = 0.0
            degenerate = True
        else:
            loss_img = float(np.mean(np.abs(back.image[m_img] - image[m_img])))
            coverage_img = float(m_img.mean())
            degenerate = False

    return CycleReport(
        loss_img=loss_img,
        loss_depth=loss_depth,
        loss_total=loss_depth + cfg.alpha * loss_img,
        align=align,
        coverage_img=coverage_img,
        coverage_depth=coverage_depth,
        theta=theta,
        t=t,
        align_degenerate=degenerate,
    )


def depth_consistency_loss(
    image: np.ndarray,
    depth_pred: DepthMap,
    cam: CameraIntrinsics,
    provider: DepthProvider,
    theta: float,
    t: float,
    splat: SplatConfig = SplatConfig(),
    min_coverage: float = 0.10,
) -> float:
    """Depth-only consistency loss, skipping the render-back leg."""
    image = np.asarray(image, dtype=np.float64)
    novel, vt, cloud = render_novel(image, depth_pred, cam, theta, t, splat, min_coverage)
    provider.note_render(novel.image, cam, vt, min_z=min_depth(cloud))
    novel_pred = provider.predict_depth(novel.image)
    joint = novel.depth.mask & novel_pred.mask
    if not joint.any():
        raise DegenerateViewError("provider mask does not overlap the rendered view")
    return ssi_loss(
        DepthMap(values=np.where(joint, novel_pred.values, 0.0), mask=joint),
        DepthMap(values=np.where(joint, novel.depth.values, 0.0), mask=joint),
    )


def run_cycle(
    image: np.ndarray,
    depth_pred: DepthMap,
    cam: CameraIntrinsics,
    provider: DepthProvider,
    cfg: CycleConfig = CycleConfig(),
) -> CycleReport:
    """Sample view parameters from the seed and run one consistency cycle.

    Degenerate draws are resampled up to cfg.max_resample times.
    """
    min_z = float(depth_pred.valid_values().min())
    last: DegenerateViewError | None = None
    for attempt in range(cfg.max_resample + 1):
        theta, t = sample_view_params(cfg.rng_seed + attempt, min_z)
        try:
            return cycle_consistency(image, depth_pred, cam, provider, theta, t, cfg)
        except DegenerateViewError as err:
            last = err
    raise DegenerateViewError(
        f"no usable view after {cfg.max_resample + 1} draws"
    ) from last


def mfl_select(
    image: np.ndarray,
    depth_pred: DepthMap,
    provider: DepthProvider,
    cfg: CycleConfig = CycleConfig(),
) -> tuple[float, float, CycleReport]:
    """Evaluate all FOV candidates under the same view and keep the argmin.

    Returns (fov_star, loss_at_fstar, report); the report carries the full
    per-candidate loss list. Ties break toward the smaller FOV.
    """
    h, w = depth_pred.shape
    min_z = float(depth_pred.valid_values().min())
    theta, t = sample_view_params(cfg.rng_seed, min_z)

    per_fov: list[tuple[float, float]] = []
    best: tuple[float, float, CycleReport] | None = None
    for fov in sorted(cfg.fov_candidates):
        cam = CameraIntrinsics.from_fov(fov, w, h)
        try:
            report = cycle_consistency(image, depth_pred, cam, provider, theta, t, cfg)
        except DegenerateViewError:
            per_fov.append((fov, float("inf")))
            continue
        per_fov.append((fov, report.loss_total))
        if best is None or report.loss_total < best[1]:
            best = (fov, report.loss_total, report)
    if best is None:
        raise DegenerateViewError("every FOV candidate produced a degenerate view")
    fov_star, loss_star, report = best
    report = replace(report, per_fov=tuple(per_fov), chosen_fov=fov_star)
    return fov_star, loss_star, report


def total_loss(l_ssi: float, l_c_fstar: float, beta: float = 0.1) -> float:
    """Final training loss: SSI term plus the weighted consistency term."""
    if l_ssi < 0 or l_c_fstar < 0:
        raise ValueError("loss terms must be non-negative")
    return l_ssi + beta * l_c_fstar
