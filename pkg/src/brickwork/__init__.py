"""Seeded simulator and control library for autonomous mobile brick assembly."""

from ._jit import backend
from .config import ScenarioConfig, load_config, parse_config, parse_pattern_file
from .control import MotionCommand, VelocityProfile, follow, velocity_at
from .geometry import PointCloud, Pose2D, Pose6D, compose, pca_pose, wrap_angle
from .harness import EvalReport, RoundReport, run_eval, run_round
from .mission import Mission, MissionState, PatternBook, next_target_brick
from .planner import (
    AlignmentPlan,
    BrickClass,
    BrickSpec,
    compute_place_pose,
    goal_pose_for_grasp,
    plan_alignment,
)

__all__ = [
    "AlignmentPlan", "BrickClass", "BrickSpec", "EvalReport", "Mission", "MissionState",
    "MotionCommand", "PatternBook", "PointCloud", "Pose2D", "Pose6D", "RoundReport",
    "ScenarioConfig", "VelocityProfile", "backend", "compose", "compute_place_pose", "follow",
    "goal_pose_for_grasp", "load_config", "next_target_brick", "parse_config",
    "parse_pattern_file", "pca_pose", "plan_alignment", "run_eval", "run_round",
    "velocity_at", "wrap_angle",
]
