"""Consistency-driven inference: affine coefficient recovery and focal search.

Both procedures treat the cycle's consistency losses as a black-box
objective. Affine recovery runs a coarse grid followed by Nelder-Mead
refinement; the renderer is a hard splatter, so the objective is only
piecewise smooth and derivative-free search is the robust choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .cycle import CycleConfig, DegenerateViewError, cycle_consistency, depth_consistency_loss
from .depthnorm import AffineCoeffs, apply_affine, ssi_stats
from .geometry import CameraIntrinsics, DepthMap
from .providers import DepthProvider, ProviderError
from .renderer import SplatConfig

__all__ = [
    "RecoveryConfig",
    "RecoveryResult",
    "FovEstimateConfig",
    "recover_affine",
    "estimate_fov",
]

# Finite stand-in for views that cannot be rendered or evaluated; keeps every
# grid cell comparable without exceptions leaking into the search.
PENALTY_LOSS = 10.0


@dataclass(frozen=True)
class RecoveryConfig:
    objective: str = "depth"  # depth | image
    grid_a: tuple[float, ...] = (0.5, 0.75, 1.0, 1.5, 2.0)
    grid_b: tuple[float, ...] = (-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0)  # units of sigma
    refine_iters: int = 60
    views_per_image: int = 2
    rng_seed: int = 0
    # Rotation magnitude range in degrees; the sign alternates per view so a
    # pair of views looks left and right. Near-zero rotations are excluded
    # because they carry almost no shift-distortion signal.
    theta_range: tuple[float, float] = (15.0, 25.0)
    # Forward shifts only by default: pulling the camera back disoccludes
    # large unseen regions and the resulting holes drown the signal.
    t_factor_range: tuple[float, float] = (0.1, 0.3)
    min_coverage: float = 0.10
    splat: SplatConfig = field(default_factory=SplatConfig)

    def __post_init__(self):
        if self.objective not in ("depth", "image"):
            raise ValueError("objective must be 'depth' or 'image'")
        if not self.grid_a or not self.grid_b:
            raise ValueError("search grids must be nonempty")
        if self.refine_iters < 0:
            raise ValueError("refine_iters must be >= 0")


@dataclass(frozen=True)
class RecoveryResult:
    a: float
    b_rel: float  # shift in units of per-image sigma
    objective: float
    trace: tuple[float, ...]  # best-so-far objective per evaluation

    def affine_for(self, raw_depth: DepthMap) -> AffineCoeffs:
        """Concrete (a, b) for one image, resolving the relative shift."""
        return AffineCoeffs(a=self.a, b=self.b_rel * ssi_stats(raw_depth).sigma)


@dataclass(frozen=True)
class FovEstimateConfig:
    candidates: tuple[float, ...] = (40.0, 50.0, 60.0, 70.0, 80.0)
    shifts: tuple[float, ...] = (-0.5, 0.5)  # t as factors of min_z
    angles: tuple[float, ...] = (-20.0, 20.0)
    min_coverage: float = 0.05

    def __post_init__(self):
        if not self.candidates or not self.shifts or not self.angles:
            raise ValueError("candidates, shifts and angles must be nonempty")


def _resolve_providers(
    provider: DepthProvider | Sequence[DepthProvider], n: int
) -> list[DepthProvider]:
    if isinstance(provider, DepthProvider):
        return [provider] * n
    providers = list(provider)
    if len(providers) != n:
        raise ValueError("need one provider per dataset item")
    return providers


def recover_affine(
    dataset: Sequence[tuple[np.ndarray, DepthMap]],
    provider: DepthProvider | Sequence[DepthProvider],
    cam_or_candidates: CameraIntrinsics | Sequence[float],
    cfg: RecoveryConfig = RecoveryConfig(),
) -> RecoveryResult:
    """Recover a domain-level (a, b_rel) pair correcting raw depth outputs.

    Each image's depth enters the cycle as a * raw + b_rel * sigma(raw);
    the pair minimizing the mean consistency loss over the dataset is found
    by exhaustive grid search plus Nelder-Mead refinement from the best cell.
    """
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    providers = _resolve_providers(provider, len(dataset))

    if isinstance(cam_or_candidates, CameraIntrinsics):
        cams_for = lambda shape: [cam_or_candidates]  # noqa: E731
    else:
        fovs = tuple(cam_or_candidates)
        cams_for = lambda shape: [  # noqa: E731
            CameraIntrinsics.from_fov(fov, shape[1], shape[0]) for fov in fovs
        ]

    sigmas = [ssi_stats(raw).sigma for _, raw in dataset]
    # Views are frozen per image up front so every (a, b) evaluation compares
    # the same geometry; t is stored as a factor of the corrected min depth.
    views: list[list[tuple[float, float]]] = []
    for i in range(len(dataset)):
        rng = np.random.default_rng([cfg.rng_seed, i])
        views.append(
            [
                (
                    (1.0 if j % 2 == 0 else -1.0) * float(rng.uniform(*cfg.theta_range)),
                    float(rng.uniform(*cfg.t_factor_range)),
                )
                for j in range(cfg.views_per_image)
            ]
        )

    cycle_cfg = CycleConfig(min_coverage=cfg.min_coverage, splat=cfg.splat)

    def view_loss(image, depth, cam, prov, theta, t) -> float:
        try:
            if cfg.objective == "depth":
                return depth_consistency_loss(
                    image, depth, cam, prov, theta, t, cfg.splat, cfg.min_coverage
                )
            report = cycle_consistency(image, depth, cam, prov, theta, t, cycle_cfg)
            return report.loss_img
        except (DegenerateViewError, ProviderError, ValueError):
            return PENALTY_LOSS

    def objective(x: np.ndarray) -> float:
        a, b_rel = float(x[0]), float(x[1])
        if not np.isfinite(a) or not np.isfinite(b_rel) or a <= 0:
            return PENALTY_LOSS
        losses = []
        for (image, raw), prov, sigma, image_views in zip(dataset, providers, sigmas, views):
            corrected = apply_affine(raw, AffineCoeffs(a=a, b=b_rel * sigma))
            if corrected.valid_count < max(2, raw.valid_count // 2):
                losses.extend([PENALTY_LOSS] * len(image_views))
                continue
            min_z = float(corrected.valid_values().min())
            for theta, t_factor in image_views:
                t = t_factor * min_z
                per_cam = [
                    view_loss(image, corrected, cam, prov, theta, t)
                    for cam in cams_for(raw.shape)
                ]
                losses.append(min(per_cam))
        return float(np.mean(losses))

    trace: list[float] = []
    best_x: np.ndarray | None = None
    best_f = np.inf

    def evaluate(x: np.ndarray) -> float:
        nonlocal best_x, best_f
        f = objective(np.asarray(x, dtype=np.float64))
        if f < best_f:
            best_f = f
            best_x = np.asarray(x, dtype=np.float64).copy()
        trace.append(best_f)
        return f

    for a in cfg.grid_a:
        for b_rel in cfg.grid_b:
            evaluate(np.array([a, b_rel]))
    if best_x is None or not np.isfinite(best_f):
        raise DegenerateViewError("every grid cell was degenerate")

    if cfg.refine_iters > 0:
        x0 = best_x.copy()
        simplex = np.array([x0, x0 + [0.15 * x0[0], 0.0], x0 + [0.0, 0.15]])
        minimize(
            evaluate,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": cfg.refine_iters,
                "initial_simplex": simplex,
                "xatol": 1e-5,
                "fatol": 1e-7,
            },
        )

    return RecoveryResult(
        a=float(best_x[0]),
        b_rel=float(best_x[1]),
        objective=float(best_f),
        trace=tuple(trace),
    )


def estimate_fov(
    image: np.ndarray,
    depth_pred: DepthMap,
    provider: DepthProvider,
    cfg: FovEstimateConfig = FovEstimateConfig(),
    splat: SplatConfig = SplatConfig(),
) -> tuple[float, list[tuple[float, float]]]:
    """Pick the FOV whose rendered views minimize the mean depth loss.

    Returns (fov_star, per-candidate mean losses); ties break toward the
    smaller FOV. Degenerate views are dropped from a candidate's mean; a
    candidate with no usable view scores infinity.
    """
    h, w = depth_pred.shape
    min_z = float(depth_pred.valid_values().min())

    per_candidate: list[tuple[float, float]] = []
    best: tuple[float, float] | None = None
    for fov in sorted(cfg.candidates):
        cam = CameraIntrinsics.from_fov(fov, w, h)
        losses = []
        for theta in cfg.angles:
            for shift in cfg.shifts:
                try:
                    losses.append(
                        depth_consistency_loss(
                            image,
                            depth_pred,
                            cam,
                            provider,
                            theta,
                            shift * min_z,
                            splat,
                            cfg.min_coverage,
                        )
                    )
                except DegenerateViewError:
                    continue
        mean = float(np.mean(losses)) if losses else float("inf")
        per_candidate.append((fov, mean))
        if np.isfinite(mean) and (best is None or mean < best[1]):
            best = (fov, mean)
    if best is None:
        raise DegenerateViewError("all views degenerate for every FOV candidate")
    return best[0], per_candidate
