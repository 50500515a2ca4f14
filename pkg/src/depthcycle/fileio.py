"""File formats: PFM depth maps, 8-bit PNG images, binary PLY point clouds."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import DepthMap, PointCloud

__all__ = [
    "FormatError",
    "read_depth",
    "write_depth",
    "read_image",
    "write_image",
    "write_pointcloud",
]

_MAX_DIM = 65536


class FormatError(ValueError):
    """Malformed or unsupported file contents."""


def read_depth(path: str | Path) -> DepthMap:
    """Read a grayscale PFM file; non-positive/non-finite pixels are invalid.

    PFM stores rows bottom-up; a negative scale marks little-endian floats.
    """
    data = Path(path).read_bytes()
    try:
        header, rest = data.split(b"\n", 1)
        dims, rest = rest.split(b"\n", 1)
        scale_line, raster = rest.split(b"\n", 1)
    except ValueError as err:
        raise FormatError(f"{path}: truncated PFM header") from err
    if header.strip() != b"Pf":
        raise FormatError(f"{path}: expected grayscale PFM magic 'Pf'")
    try:
        width, height = (int(x) for x in dims.split())
        scale = float(scale_line)
    except ValueError as err:
        raise FormatError(f"{path}: bad PFM dimensions or scale") from err
    if not (0 < width <= _MAX_DIM and 0 < height <= _MAX_DIM):
        raise FormatError(f"{path}: unreasonable PFM dimensions {width}x{height}")
    if scale == 0:
        raise FormatError(f"{path}: PFM scale must be nonzero")

    count = width * height
    if len(raster) < 4 * count:
        raise FormatError(f"{path}: PFM raster shorter than {width}x{height}")
    endian = "<" if scale < 0 else ">"
    values = np.frombuffer(raster[: 4 * count], dtype=f"{endian}f4").astype(np.float32)
    values = values.reshape(height, width)[::-1]  # bottom-up storage
    mask = np.isfinite(values) & (values > 0)
    return DepthMap(values=np.where(mask, values, 0.0), mask=mask)


def write_depth(path: str | Path, depth: DepthMap) -> None:
    """Write little-endian PFM; invalid pixels are stored as 0."""
    h, w = depth.shape
    values = np.where(depth.mask, depth.values, 0.0).astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(values[::-1].astype("<f4").tobytes())


def read_image(path: str | Path) -> np.ndarray:
    """Read an 8-bit PNG as HxWx3 floats in [0, 1]."""
    with Image.open(path) as img:
        if img.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
            raise FormatError(f"{path}: only 8-bit images are supported, got mode {img.mode}")
        if img.mode == "L":
            arr = np.asarray(img, dtype=np.float64)
            arr = np.repeat(arr[:, :, None], 3, axis=2)
        elif img.mode in ("RGB", "RGBA", "LA", "P"):
            arr = np.asarray(img.convert("RGB"), dtype=np.float64)
        else:
            raise FormatError(f"{path}: unsupported image mode {img.mode}")
    return arr / 255.0


def write_image(path: str | Path, image: np.ndarray) -> None:
    """Write HxWx3 floats in [0, 1] as an 8-bit PNG, rounding to nearest."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 3 or image.shape[2] != 3:
        raise FormatError("image must be HxWx3")
    q = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(q, mode="RGB").save(path, format="PNG")


def write_pointcloud(path: str | Path, cloud: PointCloud) -> None:
    """Write a binary little-endian PLY with float32 xyz and uint8 rgb."""
    n = len(cloud)
    if n == 0:
        raise ValueError("cannot write an empty point cloud")
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {n}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "property uchar red\n"
        "property uchar green\n"
        "property uchar blue\n"
        "end_header\n"
    )
    xyz = cloud.positions.astype("<f4")
    rgb = np.clip(np.rint(cloud.colors * 255.0), 0, 255).astype(np.uint8)
    record = struct.Struct("<fffBBB")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for i in range(n):
            fh.write(record.pack(*xyz[i], *rgb[i]))
