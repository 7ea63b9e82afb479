"""Scenario construction, multi-round evaluation and success-rate reports."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from .config import ScenarioConfig
from .geometry import Pose2D, Pose6D
from .mission import (
    MODULES,
    Mission,
    MissionParams,
    MissionState,
    Outcome,
    PatternBook,
    next_target_brick,
    wall_layout,
)
from .perception import CameraModel
from .planner import BrickClass, flatten
from .world import Brick, GripperModel, LocalizationModel, WorldState

PILE_ROW_LENGTH = 4
PILE_ROW_SPACING = 1.6
REPORT_ROWS = MODULES + ("Overall",)


def round_rng(seed: int, round_index: int) -> np.random.Generator:
    """Independent generator for one round, derived from (seed, round_index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, round_index]))


def random_pattern(cfg: ScenarioConfig, rng: np.random.Generator) -> list[list[BrickClass]]:
    stocked = [c for c in BrickClass if cfg.supply()[c] > 0]
    n = int(rng.integers(cfg.random_pattern_min, cfg.random_pattern_max + 1))
    picks = [stocked[i] for i in rng.integers(0, len(stocked), size=n)]
    w = cfg.random_layer_width
    return [picks[i:i + w] for i in range(0, n, w)]


def assembly_pose(cfg: ScenarioConfig, pattern) -> Pose6D:
    first = cfg.catalog[flatten(pattern)[0]]
    return Pose6D.from_yaw(cfg.assembly_x, cfg.assembly_y, 0.5 * first.height,
                           math.radians(cfg.assembly_yaw_deg))


def build_world(cfg: ScenarioConfig, rng: np.random.Generator, pattern) -> WorldState:
    """Lay out the piles, perturbed per round, and place the base at the origin.

    Each pile is a grid of bricks laid end to end in rows of four, rows
    ``PILE_ROW_SPACING`` apart, centred on the (jittered) pile position.
    """
    bricks: list[Brick] = []
    tilt_max = math.radians(cfg.brick_tilt_max_deg)
    for pile_index, pile in enumerate(cfg.piles):
        spec = cfg.catalog[pile.brick_class]
        cx = pile.x + rng.uniform(-cfg.pile_jitter, cfg.pile_jitter)
        cy = pile.y + rng.uniform(-cfg.pile_jitter, cfg.pile_jitter)
        yaw = math.radians(pile.yaw_deg + rng.uniform(-cfg.pile_yaw_jitter_deg, cfg.pile_yaw_jitter_deg))
        along = np.array([math.cos(yaw), math.sin(yaw)])
        across = np.array([-math.sin(yaw), math.cos(yaw)])
        rows = max(1, math.ceil(pile.count / PILE_ROW_LENGTH))
        for j in range(pile.count):
            row, slot = divmod(j, PILE_ROW_LENGTH)
            a = (slot - (PILE_ROW_LENGTH - 1) / 2) * spec.length
            b = (row - (rows - 1) / 2) * PILE_ROW_SPACING
            x, y = np.array([cx, cy]) + a * along + b * across
            tilt = float(rng.uniform(0.0, tilt_max)) if tilt_max > 0 else 0.0
            bricks.append(Brick(len(bricks), spec, Pose6D.from_yaw(x, y, 0.5 * spec.height, yaw),
                                tilt=tilt, pile=pile_index))
    gripper = GripperModel(
        k_foam=cfg.k_foam,
        tilt_tolerance=math.radians(cfg.tilt_tolerance_deg),
        max_depth=cfg.max_press_depth,
        force_threshold=cfg.force_threshold,
    )
    return WorldState(bricks, assembly_pose(cfg, pattern), Pose2D(), rng, gripper_model=gripper)


def camera_from(cfg: ScenarioConfig) -> CameraModel:
    return CameraModel(
        mount_pose=Pose2D(cfg.camera_mount_x, cfg.camera_mount_y, 0.0),
        mount_height=cfg.camera_mount_height,
        horizontal_fov=cfg.camera_fov,
        max_range=cfg.camera_max_range,
        image_width=cfg.camera_width,
        image_height=cfg.camera_height,
    )


def mission_params(cfg: ScenarioConfig) -> MissionParams:
    def loc(p):
        return LocalizationModel(p, cfg.freeze_duration, cfg.drift_sigma)

    return MissionParams(
        dt=cfg.dt,
        v_max=cfg.v_max_linear,
        w_max=cfg.v_max_angular,
        creep_fraction=cfg.creep_fraction,
        stall_timeout=cfg.stall_timeout,
        k_lat=cfg.k_lat,
        k_fwd=cfg.k_fwd,
        k_yaw=cfg.k_yaw,
        slow_range=cfg.slow_range,
        stop_threshold=cfg.stop_threshold,
        near_range=cfg.near_range,
        lost_timeout=cfg.lost_timeout,
        standoff=cfg.standoff,
        gap=cfg.gap,
        exploration_step=cfg.exploration_step,
        max_search_steps=cfg.max_search_steps,
        max_reacquire=cfg.max_reacquire,
        exclusion_radius=cfg.exclusion_radius,
        sigma=cfg.sigma,
        miss_probability=cfg.miss_probability,
        depth_increment=cfg.depth_increment,
        pose_tolerance=cfg.pose_tolerance,
        angle_tolerance=math.radians(cfg.angle_tolerance_deg),
        localization_align=loc(cfg.freeze_probability_align),
        localization_place=loc(cfg.freeze_probability_place),
    )


@dataclass(frozen=True)
class BrickRecord:
    brick_class: BrickClass
    outcomes: tuple[Outcome, ...]  # in MODULES order
    failed_module: str | None = None
    reason: str | None = None
    position_error: float | None = None
    angle_error: float | None = None

    def outcome(self, module: str) -> Outcome:
        return self.outcomes[MODULES.index(module)]


@dataclass
class RoundReport:
    round_index: int
    pattern: list[list[BrickClass]]
    bricks: list[BrickRecord] = field(default_factory=list)
    # per wall slot, final (metres, radians) error against the designed pose
    wall_errors: list[tuple[float, float]] = field(default_factory=list)
    completed: bool = False
    sim_time: float = 0.0


def run_round(
    cfg: ScenarioConfig,
    round_index: int,
    on_transition: Callable[[Mission, MissionState, MissionState], None] | None = None,
) -> RoundReport:
    """Assemble one pattern from freshly laid piles; failures are recorded, not raised."""
    rng = round_rng(cfg.seed, round_index)
    pattern = [list(layer) for layer in cfg.pattern] if cfg.pattern is not None else random_pattern(cfg, rng)
    world = build_world(cfg, rng, pattern)
    params = mission_params(cfg)
    book = PatternBook(pattern, world.assembly_area)
    design = wall_layout(pattern, world.assembly_area, cfg.catalog, cfg.gap)
    mission = Mission(world, book, camera_from(cfg), params, cfg.catalog, design, on_transition)
    report = RoundReport(round_index, pattern)
    while next_target_brick(book) is not None:
        attempt = mission.run_brick()
        report.bricks.append(BrickRecord(
            attempt.brick_class,
            tuple(attempt.outcomes[m] for m in MODULES),
            attempt.failed_module,
            attempt.reason,
            attempt.position_error,
            attempt.angle_error,
        ))
        if attempt.failed_module is not None and not mission.recover():
            break
    report.completed = next_target_brick(book) is None
    for slot, index in enumerate(world.wall):
        pose = world.brick(index).pose
        target = design[slot]
        err = float(np.linalg.norm(pose.centroid - target.centroid))
        cos = float(np.clip(np.dot(pose.major_axis, target.major_axis), -1.0, 1.0))
        report.wall_errors.append((err, math.acos(abs(cos))))
    report.sim_time = world.time
    return report


@dataclass(frozen=True)
class ModuleStats:
    module: str
    successes: int
    attempts: int

    @property
    def percent(self) -> float | None:
        return 100.0 * self.successes / self.attempts if self.attempts else None

    def percent_text(self) -> str:
        p = self.percent
        return "n/a" if p is None else f"{p:.1f}"


@dataclass
class EvalReport:
    rounds: list[RoundReport]

    def records(self) -> list[BrickRecord]:
        return [b for r in self.rounds for b in r.bricks]

    def stats(self) -> list[ModuleStats]:
        records = self.records()
        out = []
        for m in MODULES:
            s = sum(b.outcome(m) is Outcome.SUCCESS for b in records)
            f = sum(b.outcome(m) is Outcome.FAILURE for b in records)
            out.append(ModuleStats(m, s, s + f))
        placed = sum(b.outcome("Placing") is Outcome.SUCCESS for b in records)
        out.append(ModuleStats("Overall", placed, len(records)))
        return out

    def row(self, module: str) -> ModuleStats:
        return next(s for s in self.stats() if s.module == module)

    def to_tsv(self) -> str:
        lines = ["module\tsuccesses\tattempts\tpercent"]
        lines += [f"{s.module}\t{s.successes}\t{s.attempts}\t{s.percent_text()}" for s in self.stats()]
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        stats = self.stats()
        width = max(len(s.module) for s in stats) + 2
        lines = [f"{'Module':<{width}}Success Trials", "-" * (width + 18)]
        for s in stats:
            pct = "n/a" if s.percent is None else f"{s.percent:.1f}%"
            lines.append(f"{s.module:<{width}}{s.successes}/{s.attempts} ({pct})")
        lines.append(f"({len(self.rounds)} rounds, {len(self.records())} bricks)")
        return "\n".join(lines) + "\n"


def run_eval(cfg: ScenarioConfig, jobs: int = 1) -> EvalReport:
    """Run rounds 1..N, in parallel when ``jobs > 1``; results keep round order."""
    indices = range(1, cfg.rounds + 1)
    if jobs <= 1:
        return EvalReport([run_round(cfg, i) for i in indices])
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return EvalReport(list(pool.map(partial(run_round, cfg), indices)))
