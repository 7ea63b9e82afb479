"""Brick-assembly state machine and pattern bookkeeping.

One ``Mission`` owns a world, a pattern book and the visited-pose memory.
``run_brick`` drives a single pattern entry from Search to UpdateBook (or
Failed); ``recover`` performs the operator reset that lets a round move on
after a failure.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels as K
from .control import DEFAULT_CREEP_FRACTION, DEFAULT_STALL_TIMEOUT, MotionCommand
from .errors import FeedbackStalled, MaxDepthExceeded, NotVisible, OutOfReach
from .geometry import Pose2D, Pose6D, align_signs, compose, axis_angle_error, pca_pose, relative_map
from .perception import CameraModel, DEFAULT_SIGMA, TargetTrack, detect, ferromagnetic_cloud
from .planner import (
    DEFAULT_CATALOG,
    DEFAULT_STANDOFF,
    AlignmentPlan,
    BrickClass,
    BrickSpec,
    compute_place_pose,
    flatten,
    goal_pose_for_grasp,
    plan_alignment,
)
from .world import (
    BrickStatus,
    LocalizationModel,
    WorldState,
    attach_brick,
    detach_brick,
    horizontal_distance,
    press_gripper,
    release_gripper,
    stow_brick,
)

MODULES = ("Searching", "Tracking", "Alignment", "Grasping", "Placing")
SEARCH_TURN = math.pi / 4
TURNS_PER_REVOLUTION = 8


class MissionState(str, Enum):
    SEARCH = "Search"
    TRACK = "Track"
    ALIGN = "Align"
    GRASP = "Grasp"
    STORE = "Store"
    NAVIGATE = "Navigate"
    ALIGN_PLACE = "AlignPlace"
    PLACE = "Place"
    UPDATE_BOOK = "UpdateBook"
    DONE = "Done"
    FAILED = "Failed"

    def __str__(self):
        return self.value


S = MissionState
TRANSITIONS = frozenset({
    (S.SEARCH, S.SEARCH), (S.SEARCH, S.TRACK), (S.SEARCH, S.FAILED),
    (S.TRACK, S.ALIGN), (S.TRACK, S.SEARCH),
    (S.ALIGN, S.GRASP), (S.ALIGN, S.FAILED),
    (S.GRASP, S.STORE), (S.GRASP, S.FAILED),
    (S.STORE, S.NAVIGATE),
    (S.NAVIGATE, S.ALIGN_PLACE), (S.NAVIGATE, S.FAILED),
    (S.ALIGN_PLACE, S.PLACE),
    (S.PLACE, S.UPDATE_BOOK), (S.PLACE, S.FAILED),
    (S.UPDATE_BOOK, S.SEARCH), (S.UPDATE_BOOK, S.DONE),
})


class Outcome(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"
    NOT_ATTEMPTED = "not_attempted"


@dataclass
class PatternBook:
    target_pattern: list[list[BrickClass]]
    assembly_pose: Pose6D
    current_pattern: list[BrickClass] = field(default_factory=list)
    previous_brick_id: BrickClass | None = None
    previous_place_pose: Pose6D | None = None

    def __post_init__(self):
        if self.previous_place_pose is None:
            self.previous_place_pose = self.assembly_pose

    @property
    def flat(self) -> list[BrickClass]:
        return flatten(self.target_pattern)

    def is_consistent(self) -> bool:
        flat = self.flat
        k = len(self.current_pattern)
        if k > len(flat) or self.current_pattern != flat[:k]:
            return False
        return (self.previous_brick_id is None) == (k == 0)

    def record(self, placed: BrickClass, place_pose: Pose6D) -> None:
        first = self.previous_brick_id is None
        self.current_pattern.append(placed)
        self.previous_brick_id = placed
        if not first:
            self.previous_place_pose = place_pose


def next_target_brick(book: PatternBook) -> BrickClass | None:
    flat = book.flat
    k = len(book.current_pattern)
    return flat[k] if k < len(flat) else None


def wall_layout(
    pattern: Sequence[Sequence[BrickClass]],
    assembly_pose: Pose6D,
    catalog: Mapping[BrickClass, BrickSpec] = DEFAULT_CATALOG,
    gap: float = 0.0,
) -> list[Pose6D]:
    """Designed pose of every pattern entry when each brick lands exactly."""
    book = PatternBook([list(layer) for layer in pattern], assembly_pose)
    poses = []
    for cls in book.flat:
        pose = compute_place_pose(book.previous_place_pose, book.previous_brick_id, cls, book, catalog, gap)
        poses.append(pose)
        book.current_pattern.append(cls)
        book.previous_brick_id = cls
        book.previous_place_pose = pose
    return poses


@dataclass
class VisitedPoses:
    """Base poses recorded after each alignment, tagged with the brick class.

    A candidate brick is skipped when it sits within ``exclusion_radius``
    of the spot a recorded pose was aligned on (``standoff`` ahead of it).
    """

    exclusion_radius: float = 0.2
    standoff: float = DEFAULT_STANDOFF
    entries: list[tuple[Pose2D, BrickClass]] = field(default_factory=list)

    def add(self, pose: Pose2D, brick_class: BrickClass) -> None:
        self.entries.append((pose, brick_class))

    def __len__(self) -> int:
        return len(self.entries)

    def excludes(self, xy, brick_class: BrickClass) -> bool:
        for pose, cls in self.entries:
            if cls != brick_class:
                continue
            ax = pose.x + self.standoff * math.cos(pose.theta)
            ay = pose.y + self.standoff * math.sin(pose.theta)
            if math.hypot(xy[0] - ax, xy[1] - ay) < self.exclusion_radius:
                return True
        return False


@dataclass(frozen=True)
class MissionParams:
    dt: float = 0.02
    v_max: float = 0.5
    w_max: float = 0.5
    creep_fraction: float = DEFAULT_CREEP_FRACTION
    stall_timeout: float = DEFAULT_STALL_TIMEOUT
    k_lat: float = 0.5
    k_fwd: float = 0.2
    k_yaw: float = 1.0
    slow_range: float = 3.0
    stop_threshold: float = 2.75
    near_range: float = 2.5
    lost_timeout: float = 2.0
    max_track_time: float = 300.0
    align_range: tuple[float, float] = (2.0, 3.5)
    standoff: float = DEFAULT_STANDOFF
    gap: float = 0.0
    exploration_step: float = 2.0
    max_search_steps: int = 20
    max_reacquire: int = 10
    exclusion_radius: float = 0.2
    sigma: float = DEFAULT_SIGMA
    miss_probability: float = 0.0
    depth_increment: float = 0.001
    pose_tolerance: float = 0.10
    angle_tolerance: float = math.radians(5.0)
    localization_align: LocalizationModel = LocalizationModel()
    localization_place: LocalizationModel = LocalizationModel()

    def track_gains(self, camera: CameraModel) -> np.ndarray:
        return np.array([
            self.k_lat, self.k_fwd, self.k_yaw, self.v_max, self.w_max,
            self.slow_range, self.stop_threshold, self.creep_fraction, camera.horizontal_fov,
            self.near_range,
        ])


def track_velocity(track: TargetTrack, camera: CameraModel, params: MissionParams) -> tuple[MotionCommand, bool]:
    """Tracking law for one observation: lateral from pixel offset, forward from range."""
    if not track.valid:
        return MotionCommand(), False
    offset = (track.pixel_centroid[0] - camera.image_width / 2) / camera.image_width
    vx, vy, om, arrived = K.track_command(offset, track.range, params.track_gains(camera))
    return MotionCommand(vx, vy, om), bool(arrived)


def press_until(readings: Iterable[float], threshold: float) -> int | None:
    """Number of force readings consumed until one strictly exceeds ``threshold``."""
    for n, force in enumerate(readings, start=1):
        if force > threshold:
            return n
    return None


@dataclass
class BrickAttempt:
    brick_class: BrickClass
    outcomes: dict[str, Outcome] = field(default_factory=lambda: {m: Outcome.NOT_ATTEMPTED for m in MODULES})
    brick_index: int | None = None
    failed_module: str | None = None
    reason: str | None = None
    position_error: float | None = None
    angle_error: float | None = None
    transitions: list[tuple[MissionState, MissionState]] = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return self.outcomes["Placing"] is Outcome.SUCCESS


@dataclass
class _Context:
    target: BrickClass
    index: int | None = None
    misses: int = 0
    explorations: int = 0
    reacquired: int = 0
    place_pose: Pose6D | None = None
    measured_previous: bool = False
    last_command: tuple[str, float] | None = None


class Mission:
    def __init__(
        self,
        world: WorldState,
        book: PatternBook,
        camera: CameraModel = CameraModel(),
        params: MissionParams = MissionParams(),
        catalog: Mapping[BrickClass, BrickSpec] = DEFAULT_CATALOG,
        design: Sequence[Pose6D] | None = None,
        on_transition: Callable[[Mission, MissionState, MissionState], None] | None = None,
    ):
        self.world = world
        self.book = book
        self.camera = camera
        self.params = params
        self.catalog = catalog
        self.design = list(design) if design is not None else wall_layout(
            book.target_pattern, book.assembly_pose, catalog, params.gap)
        self.visited = VisitedPoses(params.exclusion_radius, params.standoff)
        self.state = S.SEARCH
        self.transitions: list[tuple[MissionState, MissionState]] = []
        self.on_transition = on_transition
        self.ctx: _Context | None = None
        self.attempt: BrickAttempt | None = None
        self._handlers = {
            S.SEARCH: self.step_search,
            S.TRACK: self.step_track,
            S.ALIGN: self.step_align,
            S.GRASP: self.step_grasp,
            S.STORE: self.step_store,
            S.NAVIGATE: self.step_navigate_and_place,
            S.ALIGN_PLACE: self.step_navigate_and_place,
            S.PLACE: self.step_navigate_and_place,
            S.UPDATE_BOOK: self.step_navigate_and_place,
        }

    # -- driving -----------------------------------------------------------

    def begin_brick(self, target: BrickClass) -> BrickAttempt:
        self.ctx = _Context(target)
        self.attempt = BrickAttempt(target)
        self.state = S.SEARCH
        self.world.localization = self.params.localization_align
        return self.attempt

    def step(self) -> MissionState:
        prev = self.state
        nxt = self._handlers[prev]()
        self.transitions.append((prev, nxt))
        self.attempt.transitions.append((prev, nxt))
        self.state = nxt
        if self.on_transition is not None:
            self.on_transition(self, prev, nxt)
        return nxt

    def run_brick(self, target: BrickClass | None = None) -> BrickAttempt:
        target = target if target is not None else next_target_brick(self.book)
        if target is None:
            raise ValueError("pattern already complete")
        attempt = self.begin_brick(target)
        while True:
            prev = self.state
            nxt = self.step()
            if nxt in (S.FAILED, S.DONE) or prev is S.UPDATE_BOOK:
                return attempt

    def recover(self) -> bool:
        """Operator reset after a failed brick.

        A brick that was carried or mis-placed is set aside; a fresh brick of
        the same class is put at its designed wall pose and the book moves
        on. Localization is reset. Returns False when the piles hold no
        replacement.
        """
        world = self.world
        ctx = self.ctx
        if ctx.index is not None:
            b = world.brick(ctx.index)
            if b.status is BrickStatus.CARRIED or (b.status is BrickStatus.PLACED and ctx.index in world.wall):
                if ctx.index in world.wall:
                    world.wall.remove(ctx.index)
                b.status = BrickStatus.DISCARDED
                b.carry_offset = None
        release_gripper(world)
        world.relocalize()
        spare = [b for b in world.bricks
                 if b.status is BrickStatus.IN_PILE and b.spec.brick_class == ctx.target]
        if not spare:
            return False
        rep = spare[-1]
        design = self.design[len(self.book.current_pattern)]
        rep.pose = design
        rep.status = BrickStatus.PLACED
        world.wall.append(rep.index)
        self.book.record(ctx.target, design)
        self.state = S.SEARCH if next_target_brick(self.book) is not None else S.DONE
        return True

    # -- helpers -----------------------------------------------------------

    def _fail(self, module: str, reason: str) -> MissionState:
        self.attempt.outcomes[module] = Outcome.FAILURE
        self.attempt.failed_module = module
        self.attempt.reason = reason
        return S.FAILED

    def _succeed(self, module: str) -> None:
        self.attempt.outcomes[module] = Outcome.SUCCESS

    def _motion_kw(self) -> dict:
        p = self.params
        return {"dt": p.dt, "creep_fraction": p.creep_fraction, "stall_timeout": p.stall_timeout}

    def execute_plan(self, plan: AlignmentPlan) -> None:
        p = self.params
        kw = self._motion_kw()
        if abs(plan.a2) > 1e-12:
            self.world.rotate(plan.a2, p.w_max, **kw)
        if plan.d > 0.0:
            self.world.translate(plan.d, p.v_max, **kw)
        if abs(plan.a1) > 1e-12:
            self.world.rotate(plan.a1, p.w_max, **kw)

    def _to_believed(self) -> Pose2D:
        return relative_map(self.world.true_pose, self.world.believed_pose)

    def measure_brick(self, index: int) -> Pose6D:
        """Brick frame seen from the base, expressed in the believed world frame."""
        cloud = ferromagnetic_cloud(self.world, self.camera, index, self.params.sigma, self.world.rng)
        region = pca_pose(cloud.transformed(self._to_believed()))
        h = self.world.brick(index).spec.height
        return region.translated(-0.5 * h * region.normal_axis)

    # -- states ------------------------------------------------------------

    def step_search(self) -> MissionState:
        ctx, p, world = self.ctx, self.params, self.world
        if ctx.reacquired > p.max_reacquire:
            module = "Tracking" if self.attempt.outcomes["Searching"] is Outcome.SUCCESS else "Searching"
            return self._fail(module, "target lost too often")
        to_b = self._to_believed()
        best = None
        for d in detect(world, self.camera):
            if d.brick_class != ctx.target:
                continue
            if p.miss_probability > 0.0 and world.rng.random() < p.miss_probability:
                continue
            xy = to_b.apply(world.brick(d.brick_index).pose.centroid[:2])
            if self.visited.excludes(xy, ctx.target):
                continue
            if best is None or (d.range, d.brick_index) < (best.range, best.brick_index):
                best = d
        if best is not None:
            ctx.index = best.brick_index
            ctx.misses = 0
            self.attempt.brick_index = best.brick_index
            self._succeed("Searching")
            return S.TRACK
        ctx.misses += 1
        try:
            if ctx.misses < TURNS_PER_REVOLUTION:
                ctx.last_command = ("rotate", -SEARCH_TURN)
                world.rotate(-SEARCH_TURN, p.w_max, **self._motion_kw())
            else:
                ctx.misses = 0
                if ctx.explorations >= p.max_search_steps:
                    module = "Tracking" if self.attempt.outcomes["Searching"] is Outcome.SUCCESS else "Searching"
                    return self._fail(module, "search exhausted")
                ctx.explorations += 1
                ctx.last_command = ("forward", p.exploration_step)
                world.translate(p.exploration_step, p.v_max, **self._motion_kw())
        except FeedbackStalled:
            # exploratory motion needs no accuracy; keep looking
            pass
        return S.SEARCH

    def step_track(self) -> MissionState:
        ctx, p, world = self.ctx, self.params, self.world
        target = world.brick_pose(ctx.index).centroid
        status, k = world.run_track(
            target, self.camera.as_array(), p.track_gains(self.camera),
            lost_timeout=p.lost_timeout, max_time=p.max_track_time, dt=p.dt,
        )
        if status == K.ARRIVED:
            self._succeed("Tracking")
            return S.ALIGN
        ctx.reacquired += 1
        return S.SEARCH

    def step_align(self) -> MissionState:
        ctx, p, world = self.ctx, self.params, self.world
        truth = world.brick_pose(ctx.index)
        _, _, rng = self.camera.sees(world.true_pose, truth.centroid)
        lo, hi = p.align_range
        if not (lo <= rng <= hi):
            return self._fail("Alignment", f"range {rng:.2f} m outside [{lo}, {hi}]")
        try:
            brick_b = self.measure_brick(ctx.index)
        except NotVisible:
            return self._fail("Alignment", "target not visible")
        believed = world.believed_pose
        goal_b = goal_pose_for_grasp(believed, brick_b, p.standoff)
        # score against the true grasp pose on the side the plan aimed for
        aimed = compose(relative_map(believed, world.true_pose), goal_b)
        goal_true = goal_pose_for_grasp(aimed, truth, p.standoff)
        try:
            self.execute_plan(plan_alignment(believed, goal_b))
        except FeedbackStalled as e:
            return self._fail("Alignment", str(e))
        self.visited.add(world.believed_pose, ctx.target)
        end = world.true_pose
        if (end.distance_to(goal_true) > p.pose_tolerance
                or abs(_angle_diff(end.theta, goal_true.theta)) > p.angle_tolerance):
            return self._fail("Alignment", "base pose off target after alignment")
        self._succeed("Alignment")
        return S.GRASP

    def step_grasp(self) -> MissionState:
        ctx, p, world = self.ctx, self.params, self.world
        threshold = world.gripper_model.force_threshold
        try:
            readings = (press_gripper(world, ctx.index, p.depth_increment) for _ in itertools.count())
            press_until(readings, threshold)
        except (OutOfReach, MaxDepthExceeded) as e:
            release_gripper(world)
            return self._fail("Grasping", str(e))
        attach_brick(world, ctx.index)
        self._succeed("Grasping")
        return S.STORE

    def step_store(self) -> MissionState:
        stow_brick(self.world, self.ctx.index)
        self.world.localization = self.params.localization_place
        return S.NAVIGATE

    def step_navigate_and_place(self) -> MissionState:
        state = self.state
        if state is S.NAVIGATE:
            return self._navigate()
        if state is S.ALIGN_PLACE:
            return self._align_place()
        if state is S.PLACE:
            return self._place()
        if state is S.UPDATE_BOOK:
            return self._update_book()
        raise ValueError(f"not a placing state: {state}")

    def _navigate(self) -> MissionState:
        p, world, book = self.params, self.world, self.book
        believed = world.believed_pose
        goal = goal_pose_for_grasp(believed, book.previous_place_pose, p.standoff)
        try:
            self.execute_plan(plan_alignment(believed, goal))
        except FeedbackStalled as e:
            return self._fail("Placing", f"navigation: {e}")
        return S.ALIGN_PLACE

    def _align_place(self) -> MissionState:
        ctx, book, world = self.ctx, self.book, self.world
        anchor = book.previous_place_pose
        ctx.measured_previous = False
        if book.previous_brick_id is not None and world.wall:
            try:
                measured = self.measure_brick(world.wall[-1])
            except NotVisible:
                pass
            else:
                anchor = align_signs(measured, book.previous_place_pose)
                ctx.measured_previous = True
        ctx.place_pose = compute_place_pose(
            anchor, book.previous_brick_id, ctx.target, book, self.catalog, self.params.gap)
        return S.PLACE

    def _place(self) -> MissionState:
        ctx, p, world = self.ctx, self.params, self.world
        believed = world.believed_pose
        goal = goal_pose_for_grasp(believed, ctx.place_pose, p.standoff)
        try:
            self.execute_plan(plan_alignment(believed, goal))
        except FeedbackStalled as e:
            return self._fail("Placing", f"final approach: {e}")
        place_true = ctx.place_pose.transformed(relative_map(world.believed_pose, world.true_pose))
        t = world.true_pose
        reach = math.hypot(place_true.centroid[0] - t.x, place_true.centroid[1] - t.y)
        if reach > world.gripper_model.reach:
            return self._fail("Placing", f"place pose {reach:.2f} m away, beyond reach")
        detach_brick(world, ctx.index, place_true)
        design = self.design[len(self.book.current_pattern)]
        pos_err = float(np.linalg.norm(place_true.centroid - design.centroid))
        ang_err = axis_angle_error(place_true.major_axis, design.major_axis)
        self.attempt.position_error = pos_err
        self.attempt.angle_error = ang_err
        if pos_err > p.pose_tolerance or ang_err > p.angle_tolerance:
            return self._fail("Placing", f"placed {pos_err:.3f} m / {math.degrees(ang_err):.1f} deg off")
        self._succeed("Placing")
        return S.UPDATE_BOOK

    def _update_book(self) -> MissionState:
        self.book.record(self.ctx.target, self.ctx.place_pose)
        return S.DONE if next_target_brick(self.book) is None else S.SEARCH


def _angle_diff(a: float, b: float) -> float:
    d = (a - b) % (2 * math.pi)
    return d - 2 * math.pi if d > math.pi else d
