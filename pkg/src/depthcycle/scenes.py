"""Analytic synthetic scenes with closed-form depth at any camera pose.

Scenes are built from posed textured quads and boxes and are ray-cast
exactly, so they serve both as ground truth for tests and as the oracle
depth provider standing in for a neural depth model.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics, DepthMap, ViewTransform, inverse_pose
from .providers import DepthProvider, ProviderError, image_content_hash

__all__ = [
    "Texture",
    "Quad",
    "Box",
    "Scene",
    "oracle_depth",
    "oracle_image",
    "oracle_render",
    "OracleProvider",
    "make_provider",
    "calibration_scene",
    "random_scene",
]

_MISS = np.inf


@dataclass(frozen=True)
class Texture:
    """Procedural surface pattern evaluated in primitive-local coordinates."""

    kind: str = "solid"  # solid | checker | stripes
    color_a: tuple[float, float, float] = (0.8, 0.8, 0.8)
    color_b: tuple[float, float, float] = (0.2, 0.2, 0.2)
    period: float = 1.0  # checker square size, scene units
    frequency: float = 1.0  # stripe cycles per scene unit

    def __post_init__(self):
        if self.kind not in ("solid", "checker", "stripes"):
            raise ValueError(f"unknown texture kind {self.kind!r}")
        if self.period <= 0 or self.frequency <= 0:
            raise ValueError("texture period and frequency must be positive")

    def shade(self, tu: np.ndarray, tv: np.ndarray) -> np.ndarray:
        ca = np.asarray(self.color_a, dtype=np.float64)
        cb = np.asarray(self.color_b, dtype=np.float64)
        if self.kind == "solid":
            return np.broadcast_to(ca, (tu.size, 3)).copy()
        if self.kind == "checker":
            parity = (np.floor(tu / self.period) + np.floor(tv / self.period)) % 2
            return np.where(parity[:, None] < 0.5, ca, cb)
        # stripes: smooth sinusoidal blend, cheap to resample accurately
        w = 0.5 * (1.0 + np.sin(2.0 * math.pi * self.frequency * tu))
        return w[:, None] * ca + (1.0 - w)[:, None] * cb

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "color_a": list(self.color_a),
            "color_b": list(self.color_b),
            "period": self.period,
            "frequency": self.frequency,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Texture":
        return cls(
            kind=d["kind"],
            color_a=tuple(d["color_a"]),
            color_b=tuple(d["color_b"]),
            period=d.get("period", 1.0),
            frequency=d.get("frequency", 1.0),
        )


def _euler_matrix(rx_deg: float, ry_deg: float, rz_deg: float) -> np.ndarray:
    rx, ry, rz = (math.radians(a) for a in (rx_deg, ry_deg, rz_deg))
    cx, sx = math.cos(rx), math.sin(rx)
    cy, sy = math.cos(ry), math.sin(ry)
    cz, sz = math.cos(rz), math.sin(rz)
    Rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    Ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


@dataclass(frozen=True)
class Quad:
    """Rectangle spanning the local z=0 plane, placed by Euler pose."""

    center: tuple[float, float, float]
    size: tuple[float, float]  # (width, height) in local x, y
    rotation: tuple[float, float, float] = (0.0, 0.0, 0.0)  # Euler degrees
    texture: Texture = field(default_factory=Texture)

    def raycast(self, origin: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        R = _euler_matrix(*self.rotation)
        o = (origin - np.asarray(self.center)) @ R
        d = dirs @ R
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(np.abs(d[:, 2]) > 1e-12, -o[2] / d[:, 2], _MISS)
            hx = np.nan_to_num(o[0] + t * d[:, 0], nan=0.0, posinf=0.0, neginf=0.0)
            hy = np.nan_to_num(o[1] + t * d[:, 1], nan=0.0, posinf=0.0, neginf=0.0)
        w2, h2 = self.size[0] / 2.0, self.size[1] / 2.0
        hit = (t > 1e-9) & np.isfinite(t) & (np.abs(hx) <= w2) & (np.abs(hy) <= h2)
        t = np.where(hit, t, _MISS)
        colors = self.texture.shade(hx + w2, hy + h2)
        return t, colors

    def to_dict(self) -> dict:
        return {
            "type": "quad",
            "center": list(self.center),
            "size": list(self.size),
            "rotation": list(self.rotation),
            "texture": self.texture.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Quad":
        return cls(
            center=tuple(d["center"]),
            size=tuple(d["size"]),
            rotation=tuple(d.get("rotation", (0.0, 0.0, 0.0))),
            texture=Texture.from_dict(d["texture"]),
        )


# Per-face brightness so box faces remain distinguishable under rotation.
_FACE_SHADE = np.array([0.95, 0.55, 0.85, 0.65, 1.0, 0.45])


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in its local frame, placed by Euler pose."""

    center: tuple[float, float, float]
    size: tuple[float, float, float]
    rotation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    texture: Texture = field(default_factory=Texture)

    def raycast(self, origin: np.ndarray, dirs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        R = _euler_matrix(*self.rotation)
        o = (origin - np.asarray(self.center)) @ R
        d = dirs @ R
        half = np.asarray(self.size) / 2.0

        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(np.abs(d) > 1e-15, 1.0 / d, np.inf)
            t1 = (-half - o) * inv
            t2 = (half - o) * inv
            # Rays parallel to a slab: inside it -> unbounded, outside -> empty.
            parallel = np.abs(d) <= 1e-15
            inside = np.abs(o) <= half
            t1 = np.where(parallel, np.where(inside, -np.inf, np.inf), t1)
            t2 = np.where(parallel, np.where(inside, np.inf, -np.inf), t2)
        t_lo = np.minimum(t1, t2)
        t_hi = np.maximum(t1, t2)
        t_near = t_lo.max(axis=1)
        t_far = t_hi.min(axis=1)
        hit = (t_near > 1e-9) & (t_near <= t_far)
        t = np.where(hit, t_near, _MISS)

        # Entry face: axis realising t_near, signed by ray direction.
        axis = t_lo.argmax(axis=1)
        sign = np.take_along_axis(d, axis[:, None], axis=1)[:, 0] > 0
        face = axis * 2 + sign.astype(int)

        with np.errstate(invalid="ignore"):
            p = np.nan_to_num(o + t[:, None] * d, nan=0.0, posinf=0.0, neginf=0.0)
        # Face-local texture coordinates: the two axes spanning the face.
        tu = np.choose(axis, [p[:, 1], p[:, 0], p[:, 0]]) + np.choose(axis, [half[1], half[0], half[0]])
        tv = np.choose(axis, [p[:, 2], p[:, 2], p[:, 1]]) + np.choose(axis, [half[2], half[2], half[1]])
        colors = self.texture.shade(tu, tv) * _FACE_SHADE[face][:, None]
        return t, colors

    def to_dict(self) -> dict:
        return {
            "type": "box",
            "center": list(self.center),
            "size": list(self.size),
            "rotation": list(self.rotation),
            "texture": self.texture.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Box":
        return cls(
            center=tuple(d["center"]),
            size=tuple(d["size"]),
            rotation=tuple(d.get("rotation", (0.0, 0.0, 0.0))),
            texture=Texture.from_dict(d["texture"]),
        )


@dataclass(frozen=True)
class Scene:
    primitives: tuple = ()
    seed: int | None = None

    def __post_init__(self):
        if not isinstance(self.primitives, tuple):
            object.__setattr__(self, "primitives", tuple(self.primitives))
        if len(self.primitives) == 0:
            raise ValueError("a scene needs at least one primitive")

    def to_json(self) -> str:
        return json.dumps(
            {"seed": self.seed, "primitives": [p.to_dict() for p in self.primitives]},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Scene":
        d = json.loads(text)
        prims = []
        for pd in d["primitives"]:
            if pd["type"] == "quad":
                prims.append(Quad.from_dict(pd))
            elif pd["type"] == "box":
                prims.append(Box.from_dict(pd))
            else:
                raise ValueError(f"unknown primitive type {pd['type']!r}")
        return cls(primitives=tuple(prims), seed=d.get("seed"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "Scene":
        return cls.from_json(Path(path).read_text())


def _camera_rays(cam: CameraIntrinsics, vt: ViewTransform) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel ray origin and directions in the scene frame.

    Directions keep z=1 in the transformed camera frame so that the ray
    parameter t equals the camera-frame depth of the hit point.
    """
    us, vs = np.meshgrid(np.arange(cam.width), np.arange(cam.height))
    d_cam = np.stack(
        [
            (us.ravel() - cam.u0) / cam.f,
            (vs.ravel() - cam.v0) / cam.f,
            np.ones(cam.width * cam.height),
        ],
        axis=1,
    )
    inv = inverse_pose(vt)
    origin = inv.T + inv.pivot - inv.R @ inv.pivot  # inv applied to the origin
    dirs = d_cam @ inv.R.T
    return origin, dirs


def oracle_render(
    scene: Scene, cam: CameraIntrinsics, vt: ViewTransform | None = None
) -> tuple[np.ndarray, DepthMap]:
    """Exact image and depth of the scene from the transformed camera."""
    if vt is None:
        vt = ViewTransform.identity()
    origin, dirs = _camera_rays(cam, vt)
    n = dirs.shape[0]
    best_t = np.full(n, _MISS)
    best_c = np.zeros((n, 3))
    for prim in scene.primitives:
        t, colors = prim.raycast(origin, dirs)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_c[closer] = colors[closer]
    hit = np.isfinite(best_t)
    h, w = cam.height, cam.width
    depth = DepthMap(
        values=np.where(hit, best_t, 0.0).reshape(h, w),
        mask=hit.reshape(h, w),
    )
    image = np.clip(best_c, 0.0, 1.0).reshape(h, w, 3)
    image[~hit.reshape(h, w)] = 0.0
    return image, depth


def oracle_depth(scene: Scene, cam: CameraIntrinsics, vt: ViewTransform | None = None) -> DepthMap:
    return oracle_render(scene, cam, vt)[1]


def oracle_image(scene: Scene, cam: CameraIntrinsics, vt: ViewTransform | None = None) -> np.ndarray:
    return oracle_render(scene, cam, vt)[0]


class OracleProvider(DepthProvider):
    """Analytic stand-in for a depth model.

    The cycle registers each render (image, camera, pose) via note_render;
    prediction then returns the scene's exact depth at that pose, optionally
    composed with a fixed affine distortion or relative Gaussian noise to
    emulate a model with unknown scale/shift.

    A real depth model predicts from the image alone and is blind to global
    scale: a cloud that is a uniformly scaled copy of the scene renders the
    exact same image. To emulate that, the registered pose is rescaled into
    scene units using the queried cloud's nearest depth before ray casting,
    so the oracle answers for the view the image actually shows.
    """

    def __init__(
        self,
        scene: Scene,
        cam: CameraIntrinsics,
        mode: str = "exact",
        a: float = 1.0,
        b: float = 0.0,
        sigma: float = 0.0,
        seed: int = 0,
    ):
        if mode not in ("exact", "distorted", "noisy"):
            raise ValueError(f"unknown provider mode {mode!r}")
        self.scene = scene
        self.cam = cam
        self.mode = mode
        self.a = float(a)
        self.b = float(b)
        self.sigma = float(sigma)
        self.seed = int(seed)
        self._registry: dict[str, tuple[CameraIntrinsics, ViewTransform, float | None]] = {}
        self._base_min_z: dict[tuple, float] = {}  # scene min depth per camera
        self._lock = threading.Lock()

    def note_render(
        self,
        image: np.ndarray,
        cam: CameraIntrinsics,
        vt: ViewTransform,
        min_z: float | None = None,
    ) -> None:
        key = image_content_hash(image)
        with self._lock:
            self._registry[key] = (cam, vt, min_z)

    def predict_depth(self, image: np.ndarray) -> DepthMap:
        key = image_content_hash(image)
        with self._lock:
            entry = self._registry.get(key)
        if entry is None:
            raise ProviderError("unknown render: image was not registered with this oracle")
        cam, vt, min_z = entry
        depth = oracle_depth(self.scene, cam, self._scene_units(cam, vt, min_z))
        return self._check(self.distort(depth, key), image)

    def _scene_units(
        self, cam: CameraIntrinsics, vt: ViewTransform, min_z: float | None
    ) -> ViewTransform:
        """Rescale a registered pose from cloud units into scene units.

        The reference is the scene's nearest depth as seen by the render
        camera at the identity pose, which matches the cloud's nearest depth
        exactly when the cloud is an undistorted copy of the scene.
        """
        if min_z is None or min_z <= 0:
            return vt
        key = (cam.f, cam.u0, cam.v0, cam.width, cam.height)
        with self._lock:
            base = self._base_min_z.get(key)
        if base is None:
            base = float(oracle_depth(self.scene, cam).valid_values().min())
            with self._lock:
                self._base_min_z[key] = base
        rho = base / float(min_z)
        if abs(rho - 1.0) < 1e-12:
            return vt
        return ViewTransform(R=vt.R, T=vt.T * rho, pivot=vt.pivot * rho)

    def distort(self, depth: DepthMap, noise_key: str = "") -> DepthMap:
        """Apply this provider's distortion mode to an exact depth map."""
        if self.mode == "exact":
            return depth
        if self.mode == "distorted":
            values = self.a * depth.values + self.b
        else:
            rng = np.random.default_rng([self.seed, int(noise_key[:8] or "0", 16)])
            values = depth.values * (1.0 + self.sigma * rng.standard_normal(depth.shape))
        mask = depth.mask & (values > 0)
        return DepthMap(values=np.where(mask, values, 0.0), mask=mask)


def make_provider(
    scene: Scene,
    cam: CameraIntrinsics,
    mode: str = "exact",
    a: float = 1.0,
    b: float = 0.0,
    sigma: float = 0.0,
    seed: int = 0,
) -> OracleProvider:
    return OracleProvider(scene, cam, mode=mode, a=a, b=b, sigma=sigma, seed=seed)


def calibration_scene() -> Scene:
    """Frozen checker-ground + box + back-wall scene used to pin thresholds."""
    ground = Quad(
        center=(0.0, 1.2, 10.0),
        size=(40.0, 40.0),
        rotation=(90.0, 0.0, 0.0),
        texture=Texture(
            kind="checker",
            color_a=(0.75, 0.68, 0.55),
            color_b=(0.45, 0.48, 0.55),
            period=4.0,
        ),
    )
    wall = Quad(
        center=(0.0, 0.0, 14.0),
        size=(40.0, 40.0),
        texture=Texture(
            kind="stripes",
            color_a=(0.65, 0.55, 0.45),
            color_b=(0.35, 0.40, 0.50),
            frequency=0.08,
        ),
    )
    box = Box(
        center=(0.9, 0.55, 6.0),
        size=(1.8, 1.3, 1.8),
        texture=Texture(kind="solid", color_a=(0.55, 0.30, 0.25)),
    )
    return Scene(primitives=(ground, wall, box), seed=0)


def random_scene(seed: int) -> Scene:
    """Seeded random scene: ground plane, back wall and 1-2 boxes.

    Geometry is kept deep enough that the default camera sees mostly valid
    depth and no primitive comes closer than a few scene units.
    """
    rng = np.random.default_rng(seed)
    prims: list = []

    ground_y = rng.uniform(1.0, 1.6)
    prims.append(
        Quad(
            center=(0.0, ground_y, 10.0),
            size=(60.0, 60.0),
            rotation=(90.0, 0.0, 0.0),
            texture=Texture(
                kind="checker",
                color_a=tuple(rng.uniform(0.55, 0.85, 3)),
                color_b=tuple(rng.uniform(0.25, 0.5, 3)),
                period=float(rng.uniform(3.0, 6.0)),
            ),
        )
    )

    wall_z = rng.uniform(11.0, 16.0)
    prims.append(
        Quad(
            center=(float(rng.uniform(-1.0, 1.0)), 0.0, wall_z),
            size=(60.0, 60.0),
            rotation=(0.0, float(rng.uniform(-10.0, 10.0)), 0.0),
            texture=Texture(
                kind="stripes",
                color_a=tuple(rng.uniform(0.5, 0.8, 3)),
                color_b=tuple(rng.uniform(0.2, 0.5, 3)),
                frequency=float(rng.uniform(0.05, 0.12)),
            ),
        )
    )

    for _ in range(int(rng.integers(1, 3))):
        size = rng.uniform(1.0, 2.2, 3)
        z = rng.uniform(4.5, 8.5)
        x = rng.uniform(-2.0, 2.0)
        prims.append(
            Box(
                center=(float(x), float(ground_y - size[1] / 2.0), float(z)),
                size=tuple(size),
                rotation=(0.0, float(rng.uniform(-30.0, 30.0)), 0.0),
                texture=Texture(kind="solid", color_a=tuple(rng.uniform(0.3, 0.8, 3))),
            )
        )

    return Scene(primitives=tuple(prims), seed=int(seed))
