"""Geometry-preserving depth tools: consistency cycle, losses and estimators."""

from .cycle import (
    CycleConfig,
    CycleReport,
    DegenerateViewError,
    cycle_consistency,
    depth_consistency_loss,
    mfl_select,
    render_novel,
    run_cycle,
    total_loss,
)
from .depthnorm import (
    AffineCoeffs,
    SsiStats,
    apply_affine,
    lstsq_align,
    median_scale,
    ssi_loss,
    ssi_normalize,
    ssi_stats,
)
from .estimator import (
    FovEstimateConfig,
    RecoveryConfig,
    RecoveryResult,
    estimate_fov,
    recover_affine,
)
from .fileio import read_depth, read_image, write_depth, write_image, write_pointcloud
from .geometry import (
    CameraIntrinsics,
    DepthMap,
    PointCloud,
    ViewTransform,
    focal_from_fov,
    inverse_pose,
    min_depth,
    novel_pose,
    project,
    sample_view_params,
    unproject,
)
from .metrics import EvalReport, absrel, delta1, eval_scale_aligned, pc_rmse
from .providers import CommandProvider, DepthProvider, DirectoryProvider, ProviderError
from .renderer import RenderOutput, SplatConfig, render, render_back
from .scenes import (
    Box,
    OracleProvider,
    Quad,
    Scene,
    Texture,
    calibration_scene,
    make_provider,
    oracle_depth,
    oracle_image,
    oracle_render,
    random_scene,
)

__version__ = "0.1.0"
