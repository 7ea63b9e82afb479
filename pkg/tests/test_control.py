import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brickwork import _kernels as K
from brickwork.control import MotionCommand, VelocityProfile, follow, velocity_at
from brickwork.errors import FeedbackStalled, ProgressOutOfRange
from brickwork.geometry import Pose2D
from brickwork.world import WorldState
from oracles import trapezoid_oracle

targets = st.floats(0.01, 100.0)
speeds = st.floats(0.01, 5.0)


@pytest.mark.parametrize("progress, expected", [(0, 0.0), (5, 1.0), (0.5, 0.5), (10, 0.0), (1, 1.0), (9, 1.0), (9.5, 0.5)])
def test_velocity_examples(progress, expected):
    assert velocity_at(VelocityProfile(10, 1), progress) == pytest.approx(expected, abs=1e-12)


def test_velocity_endpoints_exactly_zero():
    p = VelocityProfile(3.7, 0.9)
    assert velocity_at(p, 0.0) == 0.0
    assert velocity_at(p, 3.7) == 0.0


@pytest.mark.parametrize("progress", [-1e-9, 10.0000001, float("nan")])
def test_velocity_out_of_range(progress):
    with pytest.raises(ProgressOutOfRange):
        velocity_at(VelocityProfile(10, 1), progress)


@pytest.mark.parametrize("kwargs", [dict(target=0, v_max=1), dict(target=1, v_max=0),
                                    dict(target=-1, v_max=1), dict(target=1, v_max=1, ramp_fraction=0.2)])
def test_profile_invariants(kwargs):
    with pytest.raises(ValueError):
        VelocityProfile(**kwargs)


@given(targets, speeds, st.floats(0.0, 1.0))
def test_velocity_matches_piecewise_oracle(t, v, frac):
    p = VelocityProfile(t, v)
    x = frac * t
    assert velocity_at(p, x) == pytest.approx(trapezoid_oracle(t, v, x), rel=1e-9, abs=1e-12)


@given(targets, speeds)
def test_plateau_and_lipschitz(t, v):
    p = VelocityProfile(t, v)
    xs = np.linspace(0.0, t, 401)
    vs = np.array([velocity_at(p, x) for x in xs])
    lo, hi = p.checkpoints
    plateau = (xs >= lo) & (xs <= hi)
    assert np.allclose(vs[plateau], v, rtol=1e-9)
    assert vs.max() <= v * (1 + 1e-12)
    slopes = np.abs(np.diff(vs)) / np.diff(xs)
    assert slopes.max() <= v / (0.1 * t) * (1 + 1e-6)


def _ideal_follow(profile, dt, **kw):
    """Run follow() against perfect progress feedback; returns (covered, commands)."""
    covered = [0.0]
    cmds = []
    gen = follow(profile, lambda: covered[0], dt, **kw)
    for cmd in gen:
        cmds.append(cmd)
        covered[0] += cmd.vx * dt
        assert len(cmds) < 10**6
    return covered[0], cmds


@pytest.mark.parametrize("target, v_max", [(1.0, 0.5), (0.05, 0.5), (12.0, 0.5), (math.pi / 4, 0.5), (3.0, 2.0)])
def test_follow_covers_target_with_ideal_feedback(target, v_max):
    covered, cmds = _ideal_follow(VelocityProfile(target, v_max), 0.02)
    assert abs(covered - target) <= 0.005 * target
    assert all(c.within(v_max, 0.0) for c in cmds)
    assert cmds[0].vx > 0.0  # creep floor lets motion start


def test_follow_duration_close_to_trapezoid_time():
    target, v_max = 10.0, 0.5
    _, cmds = _ideal_follow(VelocityProfile(target, v_max), 0.02)
    # analytic time of the ramp profile without a creep floor is infinite at the
    # ends; with the floor it must stay within a few seconds of 0.8t/v + ramps
    assert 0.8 * target / v_max < len(cmds) * 0.02 < 0.8 * target / v_max + 20


def test_follow_axis_scaling_for_rotation():
    covered = [0.0]
    for cmd in follow(VelocityProfile(1.0, 0.5), lambda: covered[0], 0.02, axis=(0, 0, -1)):
        assert cmd.vx == 0 and cmd.omega <= 0
        covered[0] += -cmd.omega * 0.02
    assert covered[0] == pytest.approx(1.0, rel=0.005)


def test_follow_stalls_on_frozen_feedback():
    gen = follow(VelocityProfile(5.0, 0.5), lambda: 0.0, 0.02, stall_timeout=1.0)
    n = 0
    with pytest.raises(FeedbackStalled):
        for _ in gen:
            n += 1
    assert n == pytest.approx(50, abs=1)


def test_follow_checkpoint_replaces_dead_reckoning():
    # feedback reports half the true progress; the follower re-syncs at the
    # checkpoints so it drives further than the target
    covered = [0.0]
    for cmd in follow(VelocityProfile(2.0, 0.5), lambda: 0.5 * covered[0], 0.02):
        covered[0] += cmd.vx * 0.02
    assert covered[0] > 2.1


def test_follow_rejects_bad_dt():
    with pytest.raises(ValueError):
        next(follow(VelocityProfile(1.0, 1.0), lambda: 0.0, 0.0))


def test_motion_command_validation():
    with pytest.raises(ValueError):
        MotionCommand(float("nan"), 0, 0)
    assert MotionCommand(3, 4, 0).linear_speed == 5


@pytest.mark.parametrize("target", [0.3, 2.0, 7.5])
def test_kernel_segment_matches_generic_follower(target):
    """The fused world kernel and the generator produce the same trajectory."""
    world = WorldState([], None, Pose2D(), np.random.default_rng(0))
    f = world.translate(target, 0.5)
    covered, cmds = _ideal_follow(VelocityProfile(target, 0.5), 0.02)
    assert int(f[K.F_STEPS]) == len(cmds)
    assert world.true_pose.x == pytest.approx(covered, abs=1e-12)
    assert f[K.F_QUERIES] == 2


def test_kernel_rotation_segment():
    world = WorldState([], None, Pose2D(0, 0, 3.0), np.random.default_rng(0))
    world.rotate(-math.pi / 4, 0.5)
    assert world.true_pose.theta == pytest.approx(3.0 - math.pi / 4, abs=1e-9)
    world.rotate(1.0, 0.5)  # crosses the +-pi seam
    assert world.true_pose.theta == pytest.approx(K.wrap_angle(3.0 - math.pi / 4 + 1.0), abs=1e-9)


def test_follow_two_metres_at_fine_step():
    covered, _ = _ideal_follow(VelocityProfile(2.0, 0.5), 0.01)
    assert 2.0 - 0.005 <= covered <= 2.0 + 0.005


def test_follow_feedback_frozen_at_thirty_percent():
    covered = [0.0]

    def feedback():
        return min(covered[0], 0.3 * 4.0)

    with pytest.raises(FeedbackStalled):
        for cmd in follow(VelocityProfile(4.0, 0.5), feedback, 0.02):
            covered[0] += cmd.vx * 0.02


def test_follow_unit_profile_starts_slow():
    _, cmds = _ideal_follow(VelocityProfile(1.0, 1.0), 0.02)
    assert cmds[0].vx < 0.1
    assert max(c.vx for c in cmds) <= 1.0
