"""Planar poses, brick frames and PCA pose estimation from point clouds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DegenerateCloud, InsufficientPoints

AXIS_TOL = 1e-9
DEGENERATE_EIGENVALUE = 1e-12


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a!r}")
    return float(K.wrap_angle(float(a)))


@dataclass(frozen=True)
class Pose2D:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        for name in ("x", "y"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def compose(self, delta: Pose2D) -> Pose2D:
        return compose(self, delta)

    def inverse(self) -> Pose2D:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2D(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.theta)

    def apply(self, xy) -> np.ndarray:
        """Map body-frame point(s) into the parent frame."""
        xy = np.asarray(xy, dtype=float)
        c, s = math.cos(self.theta), math.sin(self.theta)
        rot = np.array([[c, -s], [s, c]])
        return xy @ rot.T + np.array([self.x, self.y])

    def distance_to(self, other: Pose2D) -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.theta)


def compose(base: Pose2D, delta: Pose2D) -> Pose2D:
    """SE(2) product ``base * delta``."""
    c, s = math.cos(base.theta), math.sin(base.theta)
    return Pose2D(
        base.x + c * delta.x - s * delta.y,
        base.y + s * delta.x + c * delta.y,
        base.theta + delta.theta,
    )


def relative_map(source: Pose2D, dest: Pose2D) -> Pose2D:
    """Transform taking coordinates expressed against ``source`` to ``dest``.

    Both poses describe the same physical body in two frames, e.g. the
    vehicle's true and believed pose; the result re-expresses anything seen
    from the body in the second frame.
    """
    return compose(dest, source.inverse())


@dataclass(frozen=True)
class Pose6D:
    """Brick frame: 3D centroid plus a right-handed major/minor/normal triad."""

    centroid: np.ndarray
    major_axis: np.ndarray
    minor_axis: np.ndarray
    normal_axis: np.ndarray

    def __post_init__(self):
        for name in ("centroid", "major_axis", "minor_axis", "normal_axis"):
            v = np.array(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        r = self.rotation
        if np.max(np.abs(r.T @ r - np.eye(3))) > AXIS_TOL:
            raise ValueError("axes must be orthonormal")
        if abs(np.linalg.det(r) - 1.0) > AXIS_TOL:
            raise ValueError("axes must form a right-handed triad")

    @property
    def rotation(self) -> np.ndarray:
        return np.column_stack([self.major_axis, self.minor_axis, self.normal_axis])

    @property
    def yaw(self) -> float:
        return math.atan2(self.major_axis[1], self.major_axis[0])

    @classmethod
    def from_yaw(cls, x: float, y: float, z: float, yaw: float) -> Pose6D:
        """Flat brick: normal up, major axis at heading ``yaw``."""
        major = np.array([math.cos(yaw), math.sin(yaw), 0.0])
        normal = np.array([0.0, 0.0, 1.0])
        return cls(np.array([x, y, z]), major, np.cross(normal, major), normal)

    def translated(self, offset) -> Pose6D:
        return Pose6D(self.centroid + np.asarray(offset, dtype=float),
                      self.major_axis, self.minor_axis, self.normal_axis)

    def transformed(self, t: Pose2D) -> Pose6D:
        """Apply a planar rigid transform (rotation about z plus xy shift)."""
        c, s = math.cos(t.theta), math.sin(t.theta)
        rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        centroid = rz @ self.centroid + np.array([t.x, t.y, 0.0])
        return Pose6D(centroid, rz @ self.major_axis, rz @ self.minor_axis, rz @ self.normal_axis)


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    frame: str = "world"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if self.frame not in ("world", "camera"):
            raise ValueError(f"unknown frame {self.frame!r}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def transformed(self, t: Pose2D, frame: str | None = None) -> PointCloud:
        xy = t.apply(self.points[:, :2])
        return PointCloud(np.column_stack([xy, self.points[:, 2]]), frame or self.frame)


def _orient(major: np.ndarray, normal: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # major: +x half space (ties: +y, then +z); normal: +z half space (same ties)
    if _negative_first(major, (0, 1, 2)):
        major = -major
    if _negative_first(normal, (2, 0, 1)):
        normal = -normal
    minor = np.cross(normal, major)
    minor /= np.linalg.norm(minor)
    return major, minor, normal


def _negative_first(v: np.ndarray, order) -> bool:
    for k in order:
        if v[k] > 0.0:
            return False
        if v[k] < 0.0:
            return True
    return False


def principal_axes(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, eigenvalues (descending) and eigenvectors (columns) of a cloud."""
    pts = np.ascontiguousarray(points, dtype=float)
    mean, cov = K.cloud_moments(pts)
    values, vectors = K.sym3_eigh(cov)
    return mean, values, vectors


def pca_pose(cloud: PointCloud) -> Pose6D:
    """Estimate a 6D frame from a planar patch of points.

    The centroid is the point mean; the axes are covariance eigenvectors
    ordered by decreasing variance. Signs are fixed deterministically:
    major toward +x (then +y), normal toward +z, minor = normal x major.
    """
    if len(cloud) < 3:
        raise InsufficientPoints(f"need at least 3 points, got {len(cloud)}")
    mean, values, vectors = principal_axes(cloud.points)
    if values[1] < DEGENERATE_EIGENVALUE and values[2] < DEGENERATE_EIGENVALUE:
        raise DegenerateCloud("points are collinear")
    major, minor, normal = _orient(vectors[:, 0].copy(), vectors[:, 2].copy())
    return Pose6D(mean, major, minor, normal)


def align_signs(measured: Pose6D, reference: Pose6D) -> Pose6D:
    """Flip a measured frame so its major/normal axes agree with a reference."""
    major = measured.major_axis
    normal = measured.normal_axis
    if float(major @ reference.major_axis) < 0.0:
        major = -major
    if float(normal @ reference.normal_axis) < 0.0:
        normal = -normal
    return Pose6D(measured.centroid, major, np.cross(normal, major), normal)


def axis_angle_error(a: np.ndarray, b: np.ndarray) -> float:
    """Angle between two lines (sign-insensitive), radians."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    return math.atan2(float(np.linalg.norm(np.cross(a, b))), abs(float(np.dot(a, b))))
