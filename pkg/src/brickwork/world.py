"""Ground-truth simulation: bricks, holonomic base, gripper contact and localization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import _kernels as K
from .control import DEFAULT_CREEP_FRACTION, DEFAULT_STALL_TIMEOUT, MotionCommand
from .errors import (
    FeedbackStalled,
    MaxDepthExceeded,
    NoContact,
    NotCarried,
    OutOfReach,
    UnknownBrick,
)
from .geometry import Pose2D, Pose6D
from .planner import ARM_REACH, BrickSpec

DEFAULT_DT = 0.02
CHUNK = 256
# brick centroid in the body frame once stowed on the onboard platform
PLATFORM_OFFSET = (-0.35, 0.0, 0.55)


class BrickStatus(str, Enum):
    IN_PILE = "in_pile"
    CARRIED = "carried"
    PLACED = "placed"
    DISCARDED = "discarded"


@dataclass
class Brick:
    index: int
    spec: BrickSpec
    pose: Pose6D
    status: BrickStatus = BrickStatus.IN_PILE
    tilt: float = 0.0  # top-surface tilt, radians
    pile: int = -1
    # (x, y, z, yaw) relative to the base while carried
    carry_offset: tuple[float, float, float, float] | None = None


@dataclass
class GripperState:
    press_depth: float = 0.0
    magnet_on: bool = False
    contact_force: float = 0.0


@dataclass(frozen=True)
class GripperModel:
    k_foam: float = 5000.0
    contact_depth: float = 0.0
    tilt_tolerance: float = math.radians(10.0)
    pad_radius: float = 0.1
    max_depth: float = 0.05
    force_threshold: float = 55.0
    reach: float = ARM_REACH

    def force(self, press_depth: float, tilt: float = 0.0) -> float:
        seat = self.contact_depth
        if tilt > self.tilt_tolerance:
            # foam can no longer conform; the pad must sink further to seat
            seat += self.pad_radius * (math.tan(tilt) - math.tan(self.tilt_tolerance))
        return self.k_foam * max(0.0, press_depth - seat)


@dataclass(frozen=True)
class LocalizationModel:
    freeze_probability_per_meter: float = 0.0
    freeze_duration: float = 0.0
    drift_sigma: float = 0.0

    def __post_init__(self):
        if min(self.freeze_probability_per_meter, self.freeze_duration, self.drift_sigma) < 0:
            raise ValueError("localization parameters must be non-negative")
        if self.freeze_probability_per_meter > 1.0:
            raise ValueError("freeze_probability_per_meter must be <= 1")

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.freeze_probability_per_meter, self.freeze_duration, self.drift_sigma]
        )


@dataclass(frozen=True)
class UgvState:
    true_pose: Pose2D
    believed_pose: Pose2D
    velocity: MotionCommand = MotionCommand()
    gripper: GripperState = field(default_factory=GripperState)


def _state_from(ugv: UgvState) -> np.ndarray:
    s = np.zeros(K.STATE_SIZE)
    s[K.TX], s[K.TY], s[K.TTH] = ugv.true_pose.as_tuple()
    s[K.BX], s[K.BY], s[K.BTH] = ugv.believed_pose.as_tuple()
    s[K.VX], s[K.VY], s[K.OM] = ugv.velocity.vx, ugv.velocity.vy, ugv.velocity.omega
    return s


def step_kinematics(ugv: UgvState, cmd: MotionCommand, dt: float) -> UgvState:
    """Integrate ``cmd`` in the body frame for ``dt``; only the true pose moves."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    s = _state_from(ugv)
    K.integrate(s, cmd.vx, cmd.vy, cmd.omega, dt)
    return replace(ugv, true_pose=Pose2D(s[K.TX], s[K.TY], s[K.TTH]), velocity=cmd)


class WorldState:
    """Mutable ground truth for one round.

    The vehicle lives in a flat state array shared with the kernels; the
    ``ugv`` property hands out immutable snapshots.
    """

    def __init__(
        self,
        bricks: list[Brick],
        assembly_area: Pose6D,
        ugv_pose: Pose2D = Pose2D(),
        rng: np.random.Generator | None = None,
        localization: LocalizationModel = LocalizationModel(),
        gripper_model: GripperModel = GripperModel(),
    ):
        self.bricks = bricks
        self.assembly_area = assembly_area
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.localization = localization
        self.gripper_model = gripper_model
        self.gripper = GripperState()
        self.vehicle = np.zeros(K.STATE_SIZE)
        self.vehicle[K.TX], self.vehicle[K.TY], self.vehicle[K.TTH] = ugv_pose.as_tuple()
        self.vehicle[K.BX], self.vehicle[K.BY], self.vehicle[K.BTH] = ugv_pose.as_tuple()
        self.wall: list[int] = []
        self.steps = 0

    # -- state views -------------------------------------------------------

    @property
    def time(self) -> float:
        return float(self.vehicle[K.TIME])

    @property
    def true_pose(self) -> Pose2D:
        s = self.vehicle
        return Pose2D(s[K.TX], s[K.TY], s[K.TTH])

    @property
    def believed_pose(self) -> Pose2D:
        s = self.vehicle
        return Pose2D(s[K.BX], s[K.BY], s[K.BTH])

    @property
    def ugv(self) -> UgvState:
        s = self.vehicle
        return UgvState(
            self.true_pose,
            self.believed_pose,
            MotionCommand(s[K.VX], s[K.VY], s[K.OM]),
            replace(self.gripper),
        )

    @property
    def frozen(self) -> bool:
        return self.vehicle[K.FREEZE_LEFT] > 0.0

    @property
    def freeze_events(self) -> int:
        return int(self.vehicle[K.NFREEZE])

    def brick(self, index: int) -> Brick:
        if not (0 <= index < len(self.bricks)) or self.bricks[index].index != index:
            raise UnknownBrick(index)
        return self.bricks[index]

    def brick_pose(self, index: int) -> Pose6D:
        b = self.brick(index)
        if b.status is BrickStatus.CARRIED and b.carry_offset is not None:
            ox, oy, oz, oyaw = b.carry_offset
            t = self.true_pose
            wx, wy = t.apply((ox, oy))
            return Pose6D.from_yaw(wx, wy, oz, t.theta + oyaw)
        return b.pose

    def carried(self) -> Brick | None:
        for b in self.bricks:
            if b.status is BrickStatus.CARRIED:
                return b
        return None

    def status_counts(self) -> dict[BrickStatus, int]:
        out = {s: 0 for s in BrickStatus}
        for b in self.bricks:
            out[b.status] += 1
        return out

    # -- motion ------------------------------------------------------------

    def _draws(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        return self.rng.random(n), self.rng.standard_normal((n, 2))

    def step(self, cmd: MotionCommand, dt: float = DEFAULT_DT) -> None:
        """Advance one tick: true kinematics then localization."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        u, n = self._draws(1)
        K.advance(
            self.vehicle, cmd.vx, cmd.vy, cmd.omega, dt,
            self.localization.as_array(), u[0], n[0, 0], n[0, 1],
        )
        self.steps += 1

    def relocalize(self) -> None:
        """Snap the believed pose to the truth and clear drift and freezes."""
        s = self.vehicle
        s[K.DX] = s[K.DY] = s[K.FREEZE_LEFT] = 0.0
        s[K.BX], s[K.BY], s[K.BTH] = s[K.TX], s[K.TY], s[K.TTH]

    def run_segment(
        self,
        kind: int,
        target: float,
        v_max: float,
        direction: tuple[float, float] = (1.0, 0.0),
        *,
        dt: float = DEFAULT_DT,
        creep_fraction: float = DEFAULT_CREEP_FRACTION,
        stall_timeout: float = DEFAULT_STALL_TIMEOUT,
    ) -> np.ndarray:
        """Follow one profiled segment to completion.

        ``kind`` is ``TRANSLATE`` (``direction`` a unit body vector) or
        ``ROTATE`` (``direction[0]`` the turn sign). Returns the follower
        state array; raises FeedbackStalled on a localization freeze that
        outlasts ``stall_timeout``.
        """
        f = np.zeros(K.FOLLOW_SIZE)
        K.follow_init(self.vehicle, f)
        if target <= 0.0:
            return f
        loc = self.localization.as_array()
        creep = creep_fraction * v_max
        while True:
            u, n = self._draws(CHUNK)
            status, taken = K.follow_chunk(
                self.vehicle, f, target, v_max, creep, kind,
                float(direction[0]), float(direction[1]), dt, stall_timeout,
                loc, u, n, CHUNK,
            )
            self.steps += taken
            if status == K.STALLED:
                raise FeedbackStalled(
                    f"localization stalled at {f[K.F_LAST_FB]:.3f} of {target:.3f}"
                )
            if status == K.DONE:
                return f

    def rotate(self, angle: float, w_max: float, **kw) -> np.ndarray:
        return self.run_segment(K.ROTATE, abs(angle), w_max, (math.copysign(1.0, angle), 0.0), **kw)

    def translate(self, distance: float, v_max: float, direction=(1.0, 0.0), **kw) -> np.ndarray:
        return self.run_segment(K.TRANSLATE, distance, v_max, direction, **kw)

    def run_track(
        self,
        target_xyz,
        camera: np.ndarray,
        gains: np.ndarray,
        *,
        lost_timeout: float,
        max_time: float,
        dt: float = DEFAULT_DT,
    ) -> tuple[int, np.ndarray]:
        k = np.zeros(K.TRACK_SIZE)
        target = np.asarray(target_xyz, dtype=float)
        loc = self.localization.as_array()
        while True:
            u, n = self._draws(CHUNK)
            status, taken = K.track_chunk(
                self.vehicle, k, target, camera, gains, lost_timeout, max_time, dt, loc, u, n, CHUNK
            )
            self.steps += taken
            if status != K.RUNNING:
                return status, k


def localize(world: WorldState, model: LocalizationModel, dt: float, distance: float = 0.0) -> Pose2D:
    """Localization update for ``distance`` metres of true motion over ``dt``."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    u, n = world._draws(1)
    K.localize(
        world.vehicle, distance, dt, model.freeze_probability_per_meter,
        model.freeze_duration, model.drift_sigma, u[0], n[0, 0], n[0, 1],
    )
    return world.believed_pose


def horizontal_distance(world: WorldState, index: int) -> float:
    c = world.brick_pose(index).centroid
    t = world.true_pose
    return math.hypot(c[0] - t.x, c[1] - t.y)


def press_gripper(world: WorldState, target_brick: int, depth_increment: float) -> float:
    """Push the pad ``depth_increment`` deeper; returns the measured contact force."""
    brick = world.brick(target_brick)
    model = world.gripper_model
    if depth_increment <= 0.0:
        raise ValueError("depth_increment must be positive")
    if horizontal_distance(world, target_brick) > model.reach:
        raise OutOfReach(f"brick {target_brick} is beyond the {model.reach} m arm reach")
    g = world.gripper
    g.press_depth += depth_increment
    g.contact_force = model.force(g.press_depth, brick.tilt)
    if g.press_depth > model.max_depth and g.contact_force <= model.force_threshold:
        raise MaxDepthExceeded(
            f"pressed {g.press_depth:.3f} m, force {g.contact_force:.1f} N below threshold"
        )
    return g.contact_force


def release_gripper(world: WorldState) -> None:
    world.gripper = GripperState()


def attach_brick(world: WorldState, index: int) -> WorldState:
    brick = world.brick(index)
    g = world.gripper
    if g.contact_force <= 0.0:
        raise NoContact(f"no contact with brick {index}")
    if g.magnet_on:
        raise ValueError("magnet already energised")
    if world.carried() is not None:
        raise ValueError("already carrying a brick")
    g.magnet_on = True
    t = world.true_pose
    rel = t.inverse().apply(brick.pose.centroid[:2])
    brick.carry_offset = (float(rel[0]), float(rel[1]), float(brick.pose.centroid[2]),
                          brick.pose.yaw - t.theta)
    brick.status = BrickStatus.CARRIED
    g.press_depth = 0.0
    g.contact_force = 0.0
    return world


def stow_brick(world: WorldState, index: int, offset=PLATFORM_OFFSET) -> None:
    brick = world.brick(index)
    if brick.status is not BrickStatus.CARRIED:
        raise NotCarried(index)
    yaw = brick.carry_offset[3] if brick.carry_offset else 0.0
    brick.carry_offset = (offset[0], offset[1], offset[2], yaw)


def detach_brick(world: WorldState, index: int, place_pose: Pose6D | None = None) -> WorldState:
    """Release a carried brick at ``place_pose`` (true world frame)."""
    brick = world.brick(index)
    if brick.status is not BrickStatus.CARRIED:
        raise NotCarried(index)
    brick.pose = place_pose if place_pose is not None else world.brick_pose(index)
    brick.status = BrickStatus.PLACED
    brick.carry_offset = None
    world.gripper = GripperState()
    world.wall.append(index)
    return world
