"""Geometric stand-in for the learned perception stack.

Produces the same outputs a detector/tracker/part-segmenter would
(detections, a tracked target, ferromagnetic patch points), computed from
ground truth with a pinhole bearing model and optional Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import NotVisible
from .geometry import PointCloud, Pose2D
from .planner import BrickClass
from .world import BrickStatus, WorldState

DEFAULT_SIGMA = 0.005
GRID = (10, 6)


@dataclass(frozen=True)
class CameraModel:
    mount_pose: Pose2D = Pose2D()
    mount_height: float = 0.5
    horizontal_fov: float = 1.2
    max_range: float = 25.0
    image_width: int = 640
    image_height: int = 480

    def __post_init__(self):
        if not (0.0 < self.horizontal_fov < math.pi):
            raise ValueError("horizontal_fov must lie in (0, pi)")
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")

    def as_array(self) -> np.ndarray:
        m = self.mount_pose
        return np.array([m.x, m.y, m.theta, self.mount_height, self.horizontal_fov, self.max_range])

    def pixel_u(self, bearing: float) -> float:
        return self.image_width / 2 + (self.image_width / self.horizontal_fov) * bearing

    def bearing_range(self, pose: Pose2D, point) -> tuple[float, float]:
        m = self.mount_pose
        return K.bearing_range(
            pose.x, pose.y, pose.theta, m.x, m.y, m.theta, self.mount_height,
            float(point[0]), float(point[1]), float(point[2]),
        )

    def sees(self, pose: Pose2D, point) -> tuple[bool, float, float]:
        b, r = self.bearing_range(pose, point)
        return bool(K.is_visible(b, r, self.horizontal_fov, self.max_range)), b, r


@dataclass(frozen=True)
class Detection:
    brick_class: BrickClass
    brick_index: int
    pixel_centroid: tuple[float, float]
    range: float
    mask_area_fraction: float


@dataclass(frozen=True)
class TargetTrack:
    brick_index: int
    valid: bool
    pixel_centroid: tuple[float, float] | None = None
    range: float | None = None


def _mask_fraction(camera: CameraModel, length: float, height: float, rng: float) -> float:
    vfov = camera.horizontal_fov * camera.image_height / camera.image_width
    frac = (length / rng) * (height / rng) / (camera.horizontal_fov * vfov)
    return float(min(1.0, max(frac, 1e-9)))


def detect(world: WorldState, camera: CameraModel) -> list[Detection]:
    """All free bricks whose centroid falls inside the view wedge."""
    pose = world.true_pose
    out = []
    for b in world.bricks:
        if b.status is not BrickStatus.IN_PILE:
            continue
        ok, bearing, rng = camera.sees(pose, b.pose.centroid)
        if not ok:
            continue
        out.append(Detection(
            b.spec.brick_class,
            b.index,
            (camera.pixel_u(bearing), camera.image_height / 2),
            rng,
            _mask_fraction(camera, b.spec.length, b.spec.height, rng),
        ))
    return out


def track_target(world: WorldState, camera: CameraModel, target: int) -> TargetTrack:
    brick = world.brick(target)
    ok, bearing, rng = camera.sees(world.true_pose, world.brick_pose(target).centroid)
    if not ok or brick.status is not BrickStatus.IN_PILE:
        return TargetTrack(target, False)
    return TargetTrack(target, True, (camera.pixel_u(bearing), camera.image_height / 2), rng)


def ferromagnetic_cloud(
    world: WorldState,
    camera: CameraModel,
    target: int,
    sigma: float = DEFAULT_SIGMA,
    rng: np.random.Generator | None = None,
    grid: tuple[int, int] = GRID,
) -> PointCloud:
    """Noisy grid of points on the brick's top-face grasping patch, world frame."""
    brick = world.brick(target)
    pose = world.brick_pose(target)
    if sigma < 0.0:
        raise ValueError("sigma must be non-negative")
    ok, _, _ = camera.sees(world.true_pose, pose.centroid)
    if not ok:
        raise NotVisible(f"brick {target} is outside the camera view")
    rng = rng if rng is not None else world.rng
    n, m = grid
    spec = brick.spec
    center = pose.centroid + 0.5 * spec.height * pose.normal_axis
    s = np.linspace(-0.5 * spec.ferro_length, 0.5 * spec.ferro_length, n)
    t = np.linspace(-0.5 * spec.ferro_width, 0.5 * spec.ferro_width, m)
    ss, tt = np.meshgrid(s, t, indexing="ij")
    pts = (center + ss.reshape(-1, 1) * pose.major_axis + tt.reshape(-1, 1) * pose.minor_axis)
    pts = pts + sigma * rng.standard_normal(pts.shape)
    return PointCloud(pts, "world")


def region_center(world: WorldState, target: int) -> np.ndarray:
    pose = world.brick_pose(target)
    return pose.centroid + 0.5 * world.brick(target).spec.height * pose.normal_axis
