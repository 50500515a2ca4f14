"""Pinhole camera model, depth unprojection and pivoted novel-view poses.

Conventions: camera frame is right-handed with x right, y down, z forward;
image origin is the top-left corner, pixel (u, v) samples the ray through its
integer coordinate. Depth is the z coordinate (plane depth), not ray length.
Angles are degrees at the public API and radians internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CameraIntrinsics",
    "DepthMap",
    "PointCloud",
    "ViewTransform",
    "focal_from_fov",
    "unproject",
    "project",
    "novel_pose",
    "inverse_pose",
    "min_depth",
    "sample_view_params",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal length and principal point in pixels."""

    f: float
    u0: float
    v0: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.f > 0):
            raise ValueError(f"focal length must be positive, got {self.f}")
        if self.width < 2 or self.height < 2:
            raise ValueError("image size must be at least 2x2")
        if not (0 <= self.u0 < self.width) or not (0 <= self.v0 < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, fov_degrees: float, width: int, height: int) -> "CameraIntrinsics":
        f = focal_from_fov(fov_degrees, width)
        return cls(f=f, u0=width / 2.0, v0=height / 2.0, width=width, height=height)


@dataclass(frozen=True)
class DepthMap:
    """H x W depth values plus a boolean validity mask.

    Every masked value must be finite and strictly positive.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 2 or mask.shape != values.shape:
            raise ValueError("values must be HxW and mask must match")
        masked = values[mask]
        if masked.size and not (np.all(np.isfinite(masked)) and np.all(masked > 0)):
            raise ValueError("masked depth values must be finite and > 0")
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "mask", _readonly(mask))

    @classmethod
    def from_values(cls, values: np.ndarray) -> "DepthMap":
        """Build a map whose mask marks the finite, positive entries."""
        values = np.asarray(values, dtype=np.float64)
        mask = np.isfinite(values) & (values > 0)
        return cls(values=values, mask=mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def valid_count(self) -> int:
        return int(self.mask.sum())

    def valid_values(self) -> np.ndarray:
        return self.values[self.mask]


@dataclass(frozen=True)
class PointCloud:
    """Colored camera-frame points, each remembering its source pixel."""

    positions: np.ndarray  # (N, 3)
    colors: np.ndarray  # (N, 3) in [0, 1]
    source_pixels: np.ndarray  # (N, 2) integer (u, v)

    def __post_init__(self):
        positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        source_pixels = np.asarray(self.source_pixels, dtype=np.int64).reshape(-1, 2)
        if not (len(positions) == len(colors) == len(source_pixels)):
            raise ValueError("positions, colors and source_pixels must have equal length")
        object.__setattr__(self, "positions", _readonly(positions))
        object.__setattr__(self, "colors", _readonly(colors))
        object.__setattr__(self, "source_pixels", _readonly(source_pixels))

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class ViewTransform:
    """Rigid camera motion applied as p' = R (p - pivot) + T + pivot."""

    R: np.ndarray
    T: np.ndarray
    pivot: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        T = np.asarray(self.T, dtype=np.float64).reshape(3)
        pivot = np.asarray(self.pivot, dtype=np.float64).reshape(3)
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
            raise ValueError("R is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("R is not a proper rotation")
        object.__setattr__(self, "R", _readonly(R))
        object.__setattr__(self, "T", _readonly(T))
        object.__setattr__(self, "pivot", _readonly(pivot))

    @classmethod
    def identity(cls) -> "ViewTransform":
        return cls(R=np.eye(3), T=np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return (points - self.pivot) @ self.R.T + self.T + self.pivot

    def is_identity(self) -> bool:
        return bool(
            np.allclose(self.R, np.eye(3), atol=1e-12)
            and np.allclose(self.T, 0.0, atol=1e-12)
        )


def focal_from_fov(fov_degrees: float, width: int) -> float:
    """Focal length in pixels from the horizontal field of view."""
    if not (0.0 < fov_degrees < 180.0):
        raise ValueError(f"FOV must lie in (0, 180) degrees, got {fov_degrees}")
    if width < 2:
        raise ValueError("width must be at least 2")
    return width / (2.0 * math.tan(math.radians(fov_degrees) / 2.0))


def unproject(depth: DepthMap, cam: CameraIntrinsics, image: np.ndarray) -> PointCloud:
    """Lift every valid depth pixel to a camera-frame 3D point.

    Points are emitted in row-major order over the valid pixels so that
    downstream tie-breaking is reproducible.
    """
    image = np.asarray(image, dtype=np.float64)
    h, w = depth.shape
    if (h, w) != (cam.height, cam.width):
        raise ValueError("depth dimensions do not match the camera")
    if image.shape != (h, w, 3):
        raise ValueError("image must be HxWx3 and match the camera")

    vs, us = np.nonzero(depth.mask)
    d = depth.values[vs, us]
    x = (us - cam.u0) / cam.f * d
    y = (vs - cam.v0) / cam.f * d
    positions = np.stack([x, y, d], axis=1)
    return PointCloud(
        positions=positions,
        colors=image[vs, us],
        source_pixels=np.stack([us, vs], axis=1),
    )


def project(cloud: PointCloud, cam: CameraIntrinsics) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Project points to (u, v, z); returns (u, v, z, in_front).

    Points with z <= 0 are flagged behind-camera, not an error; their (u, v)
    entries are NaN.
    """
    p = cloud.positions
    z = p[:, 2]
    in_front = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(in_front, cam.f * p[:, 0] / z + cam.u0, np.nan)
        v = np.where(in_front, cam.f * p[:, 1] / z + cam.v0, np.nan)
    return u, v, z.copy(), in_front


def novel_pose(theta_degrees: float, t: float, min_z: float) -> ViewTransform:
    """Horizontal rotation about the pivot [0, 0, min_z] plus a z shift."""
    if not (min_z > 0):
        raise ValueError(f"min_z must be positive, got {min_z}")
    th = math.radians(theta_degrees)
    c, s = math.cos(th), math.sin(th)
    R = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return ViewTransform(R=R, T=np.array([0.0, 0.0, float(t)]), pivot=np.array([0.0, 0.0, float(min_z)]))


def inverse_pose(vt: ViewTransform) -> ViewTransform:
    """Exact inverse of a pivoted transform, expressed with a zero pivot.

    R_inv = R^T and T_inv = -R^T (T + pivot) + pivot, so that applying the
    inverse (with zero pivot) after the forward transform restores every point.
    """
    R_inv = vt.R.T
    T_inv = -R_inv @ (vt.T + vt.pivot) + vt.pivot
    return ViewTransform(R=R_inv, T=T_inv, pivot=np.zeros(3))


def min_depth(cloud: PointCloud) -> float:
    if len(cloud) == 0:
        raise ValueError("empty point cloud has no minimum depth")
    return float(cloud.positions[:, 2].min())


def sample_view_params(
    rng_seed: int,
    min_z: float,
    theta_range: tuple[float, float] = (-30.0, 30.0),
    t_range_factors: tuple[float, float] = (-1.0, 2.0),
) -> tuple[float, float]:
    """Draw a random (theta_degrees, t) view perturbation, deterministically.

    Defaults follow theta uniform in [-30, 30] degrees and t uniform in
    [-min_z, 2 min_z].
    """
    if not (min_z > 0):
        raise ValueError(f"min_z must be positive, got {min_z}")
    rng = np.random.default_rng(rng_seed)
    theta = float(rng.uniform(theta_range[0], theta_range[1]))
    t = float(rng.uniform(t_range_factors[0] * min_z, t_range_factors[1] * min_z))
    return theta, t
