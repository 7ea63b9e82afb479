"""Rotate-drive-rotate alignment planning and wall place-pose computation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .errors import PatternExhausted, TiltedBrick
from .geometry import Pose2D, Pose6D, wrap_angle

if TYPE_CHECKING:
    from .mission import PatternBook

ARM_REACH = 1.0
DEFAULT_STANDOFF = 0.7
POSITION_EPSILON = 1e-6
FERRO_LENGTH = 0.25
FERRO_WIDTH = 0.15


class BrickClass(str, Enum):
    R = "R"
    G = "G"
    B = "B"
    O = "O"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class BrickSpec:
    brick_class: BrickClass
    length: float
    width: float
    height: float
    ferro_length: float = FERRO_LENGTH
    ferro_width: float = FERRO_WIDTH

    def __post_init__(self):
        if min(self.length, self.width, self.height, self.ferro_length, self.ferro_width) <= 0:
            raise ValueError("brick dimensions must be positive")
        if self.length < self.ferro_length or self.width < self.ferro_width:
            raise ValueError(f"{self.brick_class} brick is smaller than its ferromagnetic patch")


DEFAULT_CATALOG: dict[BrickClass, BrickSpec] = {
    BrickClass.R: BrickSpec(BrickClass.R, 0.30, 0.20, 0.20),
    BrickClass.G: BrickSpec(BrickClass.G, 0.60, 0.20, 0.20),
    BrickClass.B: BrickSpec(BrickClass.B, 1.20, 0.20, 0.20),
    BrickClass.O: BrickSpec(BrickClass.O, 1.80, 0.20, 0.20),
}


@dataclass(frozen=True)
class AlignmentPlan:
    a2: float
    d: float
    a1: float

    def __post_init__(self):
        if self.d < 0.0:
            raise ValueError("d must be non-negative")
        object.__setattr__(self, "a2", wrap_angle(self.a2))
        object.__setattr__(self, "a1", wrap_angle(self.a1))

    def execute_ideal(self, start: Pose2D) -> Pose2D:
        """End pose under exact kinematics: turn a2, drive d, turn a1."""
        th = start.theta + self.a2
        return Pose2D(
            start.x + self.d * math.cos(th),
            start.y + self.d * math.sin(th),
            th + self.a1,
        )


def goal_pose_for_grasp(ugv: Pose2D, brick: Pose6D, standoff: float = DEFAULT_STANDOFF) -> Pose2D:
    """Base pose ``standoff`` metres from the brick across its minor axis, facing it."""
    if not (0.0 <= standoff < ARM_REACH):
        raise ValueError(f"standoff must lie in [0, {ARM_REACH}), got {standoff}")
    if abs(brick.normal_axis[2]) <= 0.9:
        raise TiltedBrick(f"brick normal {brick.normal_axis} is not vertical")
    cx, cy = float(brick.centroid[0]), float(brick.centroid[1])
    mx, my = float(brick.minor_axis[0]), float(brick.minor_axis[1])
    norm = math.hypot(mx, my)
    mx, my = mx / norm, my / norm
    if standoff == 0.0:
        return Pose2D(cx, cy, math.atan2(cy - ugv.y, cx - ugv.x))
    a = (cx + standoff * mx, cy + standoff * my)
    b = (cx - standoff * mx, cy - standoff * my)
    da = math.hypot(a[0] - ugv.x, a[1] - ugv.y)
    db = math.hypot(b[0] - ugv.x, b[1] - ugv.y)
    gx, gy = a if da <= db else b
    return Pose2D(gx, gy, math.atan2(cy - gy, cx - gx))


def plan_alignment(ugv: Pose2D, goal: Pose2D, position_epsilon: float = POSITION_EPSILON) -> AlignmentPlan:
    d = math.hypot(goal.x - ugv.x, goal.y - ugv.y)
    if d < position_epsilon:
        return AlignmentPlan(0.0, 0.0, wrap_angle(goal.theta - ugv.theta))
    a2 = wrap_angle(math.atan2(goal.y - ugv.y, goal.x - ugv.x) - ugv.theta)
    a1 = wrap_angle(goal.theta - ugv.theta - a2)
    return AlignmentPlan(a2, d, a1)


def flatten(pattern: Sequence[Sequence[BrickClass]]) -> list[BrickClass]:
    return [b for layer in pattern for b in layer]


def layer_position(pattern: Sequence[Sequence[BrickClass]], index: int) -> tuple[int, int]:
    """(layer, slot) of the ``index``-th brick in placement order."""
    for li, layer in enumerate(pattern):
        if index < len(layer):
            return li, index
        index -= len(layer)
    raise IndexError("index beyond pattern")


def compute_place_pose(
    previous_place_pose: Pose6D,
    previous_id: BrickClass | None,
    target_brick: BrickClass,
    book: PatternBook,
    catalog: Mapping[BrickClass, BrickSpec] = DEFAULT_CATALOG,
    gap: float = 0.0,
) -> Pose6D:
    """Where the next brick of the pattern goes, anchored on the previous brick.

    Within a layer bricks abut along the previous brick's major axis; the
    first brick of a layer returns to the layer origin (the assembly-area
    pose) one brick height above the previous layer.
    """
    flat = flatten(book.target_pattern)
    k = len(book.current_pattern)
    if k >= len(flat):
        raise PatternExhausted("every pattern entry is already placed")
    if flat[k] != target_brick:
        raise ValueError(f"next pattern entry is {flat[k]}, not {target_brick}")
    if previous_id is None:
        return book.assembly_pose
    layer, slot = layer_position(book.target_pattern, k)
    prev = catalog[previous_id]
    cur = catalog[target_brick]
    if slot > 0:
        step = 0.5 * (prev.length + cur.length) + gap
        return previous_place_pose.translated(step * previous_place_pose.major_axis)
    origin = book.assembly_pose
    rise = 0.5 * (prev.height + cur.height)
    up = origin.normal_axis
    z_prev = float(np.dot(previous_place_pose.centroid - origin.centroid, up))
    return origin.translated((z_prev + rise) * up)
