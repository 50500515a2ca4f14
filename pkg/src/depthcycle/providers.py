"""Depth providers: sources of depth maps for rendered images.

A provider exposes a single operation, predict_depth(image). The cycle
additionally announces every render it produces through note_render, which
lets oracle-style providers look up the pose of a rendered image; providers
backed by real models ignore the announcement.
"""

from __future__ import annotations

import hashlib
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, DepthMap, ViewTransform

__all__ = [
    "ProviderError",
    "DepthProvider",
    "DirectoryProvider",
    "CommandProvider",
    "image_content_hash",
]


class ProviderError(RuntimeError):
    """Raised when a provider cannot produce a depth map."""


def image_content_hash(image: np.ndarray) -> str:
    """Stable content key for an image: sha1 of its 8-bit quantization."""
    q = np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    h = hashlib.sha1()
    h.update(np.asarray(q.shape, dtype=np.int64).tobytes())
    h.update(q.tobytes())
    return h.hexdigest()


class DepthProvider:
    """Interface for depth estimation of rendered images."""

    def predict_depth(self, image: np.ndarray) -> DepthMap:
        raise NotImplementedError

    def note_render(
        self,
        image: np.ndarray,
        cam: CameraIntrinsics,
        vt: ViewTransform,
        min_z: float | None = None,
    ) -> None:
        """Called by the cycle for every render handed to this provider.

        min_z is the nearest depth of the cloud that was rendered; providers
        that reason about absolute geometry can use it as a scale reference.
        """

    def _check(self, depth: DepthMap, image: np.ndarray) -> DepthMap:
        if depth.shape != image.shape[:2]:
            raise ProviderError(
                f"provider returned {depth.shape}, expected {image.shape[:2]}"
            )
        return depth


class DirectoryProvider(DepthProvider):
    """Looks up precomputed depth files keyed by image content hash.

    The directory holds one <hash>.pfm per known image.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ProviderError(f"not a directory: {self.directory}")

    def predict_depth(self, image: np.ndarray) -> DepthMap:
        from .fileio import read_depth

        path = self.directory / f"{image_content_hash(image)}.pfm"
        if not path.exists():
            raise ProviderError(f"no precomputed depth for image (missing {path.name})")
        return self._check(read_depth(path), image)


class CommandProvider(DepthProvider):
    """Spawns `<cmd> <input-image.png> <output-depth.pfm>` per query."""

    def __init__(self, command: list[str] | str):
        if isinstance(command, str):
            command = command.split()
        if not command:
            raise ProviderError("empty provider command")
        self.command = list(command)

    def predict_depth(self, image: np.ndarray) -> DepthMap:
        from .fileio import read_depth, write_image

        with tempfile.TemporaryDirectory(prefix="depthcycle-provider-") as tmp:
            in_path = Path(tmp) / "input.png"
            out_path = Path(tmp) / "output.pfm"
            write_image(in_path, image)
            proc = subprocess.run(
                [*self.command, str(in_path), str(out_path)],
                capture_output=True,
                text=True,
            )
            if proc.returncode != 0:
                raise ProviderError(
                    f"provider command failed with status {proc.returncode}: {proc.stderr.strip()}"
                )
            if not out_path.exists():
                raise ProviderError("provider command wrote no output file")
            return self._check(read_depth(out_path), image)
