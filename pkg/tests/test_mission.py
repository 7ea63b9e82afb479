import math
from dataclasses import replace

import numpy as np
import pytest

from brickwork import _kernels as K
from brickwork.geometry import Pose2D, Pose6D
from brickwork.mission import (
    MODULES,
    TRANSITIONS,
    Mission,
    MissionParams,
    MissionState,
    Outcome,
    PatternBook,
    VisitedPoses,
    next_target_brick,
    press_until,
    track_velocity,
    wall_layout,
)
from brickwork.perception import CameraModel, TargetTrack
from brickwork.planner import DEFAULT_CATALOG, BrickClass
from brickwork.world import Brick, BrickStatus, LocalizationModel, WorldState

R, G, B = BrickClass.R, BrickClass.G, BrickClass.B
S = MissionState
ASSEMBLY = Pose6D.from_yaw(0, 0, 0.1, 0.0)
NOISELESS = MissionParams(sigma=0.0)


def scene(pattern, bricks, params=NOISELESS, pose=Pose2D(), seed=0):
    """bricks: iterable of (class, x, y, yaw)."""
    items = [Brick(i, DEFAULT_CATALOG[c], Pose6D.from_yaw(x, y, 0.1, yaw)) for i, (c, x, y, yaw) in enumerate(bricks)]
    world = WorldState(items, ASSEMBLY, pose, np.random.default_rng(seed))
    book = PatternBook([list(layer) for layer in pattern], ASSEMBLY)
    return Mission(world, book, CameraModel(), params)


# -- bookkeeping --------------------------------------------------------------

@pytest.mark.parametrize("current, expected", [([], R), ([R, G], B), ([R, G, B], None)])
def test_next_target_brick(current, expected):
    book = PatternBook([[R, G], [B]], ASSEMBLY, current_pattern=current,
                       previous_brick_id=current[-1] if current else None)
    assert next_target_brick(book) == expected
    assert book.is_consistent()


def test_book_consistency_detects_violations():
    assert not PatternBook([[R, G]], ASSEMBLY, current_pattern=[G], previous_brick_id=G).is_consistent()
    assert not PatternBook([[R, G]], ASSEMBLY, current_pattern=[R]).is_consistent()
    assert PatternBook([[R]], ASSEMBLY).previous_place_pose is ASSEMBLY


def test_wall_layout_chains_place_poses():
    poses = wall_layout([[R, G], [B]], ASSEMBLY)
    assert np.allclose([p.centroid for p in poses], [[0, 0, 0.1], [0.45, 0, 0.1], [0, 0, 0.3]])


def test_visited_poses_exclusion_per_class():
    v = VisitedPoses(0.2, 0.7)
    v.add(Pose2D(1, 0, 0), R)
    assert v.excludes((1.7, 0.1), R)
    assert not v.excludes((1.7, 0.1), G)
    assert not v.excludes((2.0, 0.0), R)
    assert len(v) == 1


# -- search -------------------------------------------------------------------

def test_search_finds_target_and_picks_nearest():
    m = scene([[R]], [(R, 6, 0, 0), (R, 4, 0.5, 0), (G, 3, 0, 0)])
    m.begin_brick(R)
    assert m.step() is S.TRACK
    assert m.ctx.index == 1
    assert m.attempt.outcomes["Searching"] is Outcome.SUCCESS


def test_search_miss_rotates_clockwise():
    m = scene([[R]], [(R, -6, 0, 0)])
    m.begin_brick(R)
    m.ctx.misses = 2
    assert m.step() is S.SEARCH
    assert m.ctx.last_command == ("rotate", -math.pi / 4)
    assert m.world.true_pose.theta == pytest.approx(-math.pi / 4, abs=1e-9)


def test_search_full_revolution_explores_forward():
    m = scene([[R]], [(R, -6, 0, 0)])
    m.begin_brick(R)
    m.ctx.misses = 7
    m.world.vehicle[K.TTH] = m.world.vehicle[K.BTH] = math.pi / 2
    assert m.step() is S.SEARCH
    assert m.ctx.last_command == ("forward", 2.0)
    assert m.ctx.misses == 0
    assert m.world.true_pose.y == pytest.approx(2.0, abs=1e-9)


def test_search_full_sweep_then_detects_behind():
    m = scene([[R]], [(R, -6, 0.3, 0)])
    attempt = m.run_brick()
    assert attempt.outcomes["Placing"] is Outcome.SUCCESS
    searches = [t for t in attempt.transitions if t == (S.SEARCH, S.SEARCH)]
    assert 1 <= len(searches) <= 7


def test_search_exhaustion_fails():
    m = scene([[R]], [(G, 5, 0, 0)], replace(NOISELESS, max_search_steps=1))
    attempt = m.run_brick()
    assert attempt.failed_module == "Searching"
    assert attempt.transitions[-1] == (S.SEARCH, S.FAILED)
    assert attempt.outcomes["Tracking"] is Outcome.NOT_ATTEMPTED
    assert sum(t == (S.SEARCH, S.SEARCH) for t in attempt.transitions) == 15


def test_search_skips_visited_and_missed():
    m = scene([[R]], [(R, 4, 0, 0)])
    m.begin_brick(R)
    m.visited.add(Pose2D(4 - 0.7, 0, 0), R)
    m.ctx.misses = 0
    assert m.step() is S.SEARCH
    m2 = scene([[R]], [(R, 4, 0, 0)], replace(NOISELESS, miss_probability=1.0))
    m2.begin_brick(R)
    assert m2.step() is S.SEARCH


# -- tracking -----------------------------------------------------------------

CAM = CameraModel()


def test_track_velocity_centered():
    cmd, arrived = track_velocity(TargetTrack(0, True, (320, 240), 5.0), CAM, NOISELESS)
    assert cmd.vy == 0 and cmd.omega == 0
    assert cmd.vx == pytest.approx(min(0.5, 5 * 0.2))
    assert not arrived


def test_track_velocity_right_of_centre_steers_right():
    cmd, _ = track_velocity(TargetTrack(0, True, (500, 240), 5.0), CAM, NOISELESS)
    assert cmd.vy < 0 and cmd.omega < 0
    assert abs(cmd.vy) <= NOISELESS.v_max


def test_track_velocity_threshold_and_slowdown():
    cmd, arrived = track_velocity(TargetTrack(0, True, (320, 240), 2.7), CAM, NOISELESS)
    assert cmd.vx == 0 and arrived
    near, _ = track_velocity(TargetTrack(0, True, (320, 240), 2.9), CAM, NOISELESS)
    far, _ = track_velocity(TargetTrack(0, True, (320, 240), 3.0), CAM, NOISELESS)
    assert 0 < near.vx < far.vx
    assert track_velocity(TargetTrack(0, False), CAM, NOISELESS) == (track_velocity(TargetTrack(0, False), CAM, NOISELESS)[0], False)


@pytest.mark.parametrize("x, y", [(12, 0), (8, 5), (4, -6), (15, 9)])
def test_track_arrives_in_band(x, y):
    m = scene([[R]], [(R, x, y, 0.4)], pose=Pose2D(0, 0, math.atan2(y, x)))
    m.begin_brick(R)
    assert m.step() is S.TRACK
    assert m.step() is S.ALIGN
    _, _, rng = m.camera.sees(m.world.true_pose, m.world.brick_pose(m.ctx.index).centroid)
    assert 2.5 <= rng <= 3.0


def test_track_lost_returns_to_search():
    m = scene([[R]], [(R, 8, 0, 0)])
    m.begin_brick(R)
    m.step()
    m.world.bricks[0].pose = Pose6D.from_yaw(-8, 0, 0.1, 0)  # target vanishes behind
    assert m.step() is S.SEARCH
    assert m.ctx.reacquired == 1


# -- alignment ----------------------------------------------------------------

def _to_align(m):
    m.begin_brick(m.book.flat[len(m.book.current_pattern)])
    assert m.step() is S.TRACK
    assert m.step() is S.ALIGN


def test_align_noiseless_reaches_goal():
    from brickwork.planner import goal_pose_for_grasp

    m = scene([[R]], [(R, 8, 1, 1.0)])
    _to_align(m)
    truth = m.world.brick_pose(0)
    assert m.step() is S.GRASP
    goal = goal_pose_for_grasp(m.world.true_pose, truth, 0.7)
    assert m.world.true_pose.distance_to(goal) < 0.01
    assert len(m.visited) == 1


def test_align_fails_under_freeze():
    params = replace(NOISELESS, localization_align=LocalizationModel(1.0, 3.0, 0.0))
    m = scene([[R]], [(R, 8, 1, 1.0)], params)
    _to_align(m)
    assert m.step() is S.FAILED
    assert m.attempt.failed_module == "Alignment"
    assert m.attempt.outcomes["Grasping"] is Outcome.NOT_ATTEMPTED


def test_align_out_of_range_fails():
    m = scene([[R]], [(R, 8, 0, 0)])
    _to_align(m)
    m.world.vehicle[K.TX] = m.world.vehicle[K.BX] = 0.0
    assert m.step() is S.FAILED


# -- grasping -----------------------------------------------------------------

def test_press_until_threshold():
    assert press_until([20, 40, 54.9, 55.1], 55) == 4
    assert press_until([20, 55.0], 55) is None


def _to_grasp(m):
    _to_align(m)
    assert m.step() is S.GRASP


def test_grasp_tilted_within_tolerance():
    m = scene([[R]], [(R, 8, 1, 1.0)])
    m.world.bricks[0].tilt = math.radians(5)
    _to_grasp(m)
    assert m.step() is S.STORE
    assert m.world.bricks[0].status is BrickStatus.CARRIED
    assert m.step() is S.NAVIGATE


def test_grasp_never_reaching_threshold_fails():
    m = scene([[R]], [(R, 8, 1, 1.0)])
    m.world.bricks[0].tilt = math.radians(60)
    _to_grasp(m)
    assert m.step() is S.FAILED
    assert m.attempt.failed_module == "Grasping"
    assert m.attempt.outcomes["Placing"] is Outcome.NOT_ATTEMPTED


# -- placing ------------------------------------------------------------------

def test_first_brick_placed_at_assembly_pose():
    m = scene([[R, G]], [(R, 8, 1, 1.0), (G, -6, 4, 0.3)])
    attempt = m.run_brick()
    assert attempt.succeeded
    placed = m.world.bricks[0].pose
    assert np.allclose(placed.centroid, ASSEMBLY.centroid, atol=1e-9)
    assert m.book.previous_place_pose is ASSEMBLY
    assert m.book.current_pattern == [R]
    assert attempt.transitions[-1] == (S.UPDATE_BOOK, S.SEARCH)


def test_second_brick_abuts_first():
    m = scene([[R, G]], [(R, 8, 1, 1.0), (G, -6, 4, 0.3)])
    m.run_brick()
    attempt = m.run_brick()
    assert attempt.succeeded
    assert m.ctx.measured_previous
    assert np.allclose(m.world.bricks[1].pose.centroid, [0.45, 0, 0.1], atol=1e-6)
    assert m.book.current_pattern == [R, G]
    assert attempt.transitions[-1] == (S.UPDATE_BOOK, S.DONE)


def test_navigate_freeze_fails_placing():
    params = replace(NOISELESS, localization_place=LocalizationModel(1.0, 10.0, 0.0))
    m = scene([[R]], [(R, 8, 1, 1.0)], params)
    attempt = m.run_brick()
    assert attempt.failed_module == "Placing"
    assert (S.NAVIGATE, S.FAILED) in attempt.transitions


def test_recover_replaces_and_advances():
    params = replace(NOISELESS, localization_place=LocalizationModel(1.0, 10.0, 0.0))
    m = scene([[R, R]], [(R, 8, 1, 1.0), (R, 8, 3, 1.0), (R, 8, 5, 1.0)], params)
    attempt = m.run_brick()
    assert not attempt.succeeded
    carried = m.ctx.index
    assert m.recover()
    assert m.world.bricks[carried].status is BrickStatus.DISCARDED
    assert m.book.current_pattern == [R]
    assert m.world.believed_pose == m.world.true_pose
    assert len(m.world.wall) == 1
    # no spare left after a second failure
    m.run_brick()
    assert not m.recover()


def test_outcomes_follow_module_order():
    m = scene([[R]], [(R, 8, 1, 1.0)])
    attempt = m.run_brick()
    assert list(attempt.outcomes) == list(MODULES)
    assert all(o is Outcome.SUCCESS for o in attempt.outcomes.values())
    assert set(m.transitions) <= TRANSITIONS


def test_track_backs_off_when_too_close():
    cmd, arrived = track_velocity(TargetTrack(0, True, (320, 240), 1.8), CAM, NOISELESS)
    assert cmd.vx < 0 and not arrived
    m = scene([[R]], [(R, 1.9, 0, 0.4)])
    m.begin_brick(R)
    assert m.step() is S.TRACK
    assert m.step() is S.ALIGN
    _, _, rng = m.camera.sees(m.world.true_pose, m.world.brick_pose(0).centroid)
    assert 2.5 <= rng <= 3.0
