import math

import numpy as np
import pytest

from terrain_negotiator.core import (
    Behavior,
    Goal,
    ObservationVector,
    RobotState,
    Trajectory,
    as_observation_matrix,
    normalize_angle,
    relative_displacement,
)
from terrain_negotiator.exceptions import InvalidArgumentError


class TestNormalizeAngle:

    def test_wraps_into_half_open_interval(self):
        assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
        assert normalize_angle(-3.5 * math.pi) == pytest.approx(0.5 * math.pi)
        assert normalize_angle(-math.pi) == pytest.approx(math.pi)
        assert normalize_angle(0.25) == 0.25

    @pytest.mark.parametrize('value', [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite(self, value):
        with pytest.raises(InvalidArgumentError):
            normalize_angle(value)


def test_robot_state_normalizes_heading():
    assert RobotState(1.0, 2.0, 2 * math.pi + 0.1).heading == pytest.approx(0.1)
    with pytest.raises(InvalidArgumentError):
        RobotState(math.nan, 0.0)


def test_behavior_clamping_and_limits():
    b = Behavior(3.0, -2.0)
    assert not b.within_limits(2.0, 1.5)
    clamped = b.clamped(2.0, 1.5)
    assert clamped == Behavior(2.0, -1.5)
    assert clamped.within_limits(2.0, 1.5)
    assert Behavior(-0.5, 0.0).clamped(2.0, 1.5).linear_velocity == 0.0


def test_goal_rotation_into_robot_frame():
    g = Goal(0.0, 2.0)
    local = g.rotated(math.pi / 2)
    assert local.dx == pytest.approx(2.0)
    assert local.dy == pytest.approx(0.0, abs=1e-12)
    assert g.norm() == 2.0
    assert g.bearing() == pytest.approx(math.pi / 2)


class TestObservationVector:

    def test_bias_is_prepended(self):
        o = ObservationVector.from_terrain([0.2, 0.8])
        assert o.q == 3
        np.testing.assert_array_equal(o.features, [1.0, 0.2, 0.8])

    def test_features_are_read_only(self):
        o = ObservationVector.from_terrain([0.5])
        with pytest.raises(ValueError):
            o.features[1] = 0.0

    @pytest.mark.parametrize('features', [[0.5, 0.5], [1.0, 1.5], [1.0, -0.1], [1.0, math.nan]])
    def test_rejects_invalid_features(self, features):
        with pytest.raises(InvalidArgumentError):
            ObservationVector(np.array(features))

    def test_equality_and_hash(self):
        a = ObservationVector.from_terrain([0.1, 0.2])
        b = ObservationVector.from_terrain([0.1, 0.2])
        assert a == b
        assert hash(a) == hash(b)


def test_trajectory_length_invariant():
    states = (RobotState(0, 0), RobotState(1, 0))
    with pytest.raises(InvalidArgumentError):
        Trajectory(states, ())
    traj = Trajectory(states, (Behavior(1.0, 0.0),))
    assert traj.horizon == 1
    assert traj.state_array().shape == (2, 3)


def test_relative_displacement():
    g = relative_displacement(RobotState(1.0, 2.0, 1.0), RobotState(4.0, 6.0, -1.0))
    assert (g.dx, g.dy) == (3.0, 4.0)
    assert g.norm() == 5.0
    zero = relative_displacement(RobotState(1.0, 1.0), RobotState(1.0, 1.0))
    assert zero.norm() == 0.0


def test_observation_matrix_broadcasts_single_observation():
    o = ObservationVector.from_terrain([0.3])
    matrix = as_observation_matrix(o, 3)
    assert matrix.shape == (3, 2)
    np.testing.assert_array_equal(matrix[2], [1.0, 0.3])
    with pytest.raises(InvalidArgumentError):
        as_observation_matrix(np.ones((2, 2)), 3)
