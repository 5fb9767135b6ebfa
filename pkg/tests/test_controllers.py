import math

import numpy as np
import pytest

from conftest import constant_params
from terrain_negotiator.controllers import (
    NegotiationController,
    SinglePolicyController,
    UniformBlendController,
    make_controller,
    nauts_controller,
    robot_frame_goal,
)
from terrain_negotiator.core import Goal, ObservationVector, RobotState
from terrain_negotiator.exceptions import ConfigError, InvalidArgumentError
from terrain_negotiator.negotiation import NegotiationConfig
from terrain_negotiator.policies import SensedEnvironment
from terrain_negotiator.simulator import Perception, run_episode

NAMES = ('max_speed', 'obstacle_avoidance')


def perception(tick=0, features=(0.6, 0.1, 0.0, 0.3, 0.0, 0.0, 0.5)):
    o = ObservationVector.from_terrain(features)
    return Perception(o, SensedEnvironment(0.0, 10.0, (), 0.0, ()), 0.1 * tick, tick)


class TestRobotFrameGoal:

    def test_rotation(self):
        g = robot_frame_goal(Goal(0.0, 2.0), RobotState(0.0, 0.0, math.pi / 2))
        assert (g.dx, g.dy) == pytest.approx((2.0, 0.0))

    def test_clipped_to_reach(self):
        g = robot_frame_goal(Goal(30.0, 40.0), RobotState(0.0, 0.0, 0.0), reach=5.0)
        assert (g.dx, g.dy) == pytest.approx((3.0, 4.0))
        assert robot_frame_goal(Goal(1.0, 0.0), RobotState(0.0, 0.0), reach=5.0) == Goal(1.0, 0.0)

    def test_zero_goal_points_ahead(self):
        assert robot_frame_goal(Goal(0.0, 0.0), RobotState(0.0, 0.0, 1.0)) == Goal(1.0, 0.0)


class TestNegotiationController:

    def test_single_policy_is_executed_verbatim(self):
        controller = nauts_controller([constant_params(1.0, 0.2)])
        b = controller(perception(), RobotState(0.0, 0.0), Goal(5.0, 0.0))
        assert b.linear_velocity == pytest.approx(1.0)
        assert b.angular_velocity == pytest.approx(0.2)
        assert controller.telemetry().weights == pytest.approx((1.0,))

    def test_identical_predictions_give_that_behavior(self):
        controller = nauts_controller([constant_params(0.8, -0.1), constant_params(0.8, -0.1)])
        b = controller(perception(), RobotState(0.0, 0.0), Goal(5.0, 1.0))
        assert b.linear_velocity == pytest.approx(0.8)
        assert b.angular_velocity == pytest.approx(-0.1)

    def test_negotiates_every_period(self):
        config = NegotiationConfig(period=3)
        controller = nauts_controller([constant_params(1.0, 0.0), constant_params(0.5, 0.5)], config=config)
        for tick in range(7):
            controller(perception(tick), RobotState(0.1 * tick, 0.0), Goal(5.0, 0.0))
        assert [record.tick for record in controller.history] == [0, 3, 6]
        first = controller.history[0]
        kept = first.V if first.diagnostics.converged else first.V_init
        np.testing.assert_array_equal(controller.history[1].V_init.columns, kept.columns)

    def test_telemetry(self):
        controller = nauts_controller([constant_params(1.0, 0.0), constant_params(0.5, 0.5)])
        before = controller.telemetry()
        assert before.weights == pytest.approx((0.5, 0.5))
        assert all(math.isnan(r) for r in before.regrets)
        controller(perception(), RobotState(0.0, 0.0), Goal(5.0, 0.0))
        after = controller.telemetry()
        assert sum(after.weights) == pytest.approx(1.0)
        assert all(math.isfinite(r) and r >= 0.0 for r in after.regrets)
        assert math.isfinite(after.objective)

    def test_straight_predictions_lose_less_regret(self):
        controller = nauts_controller([constant_params(1.0, 0.0), constant_params(1.0, 1.0)])
        controller(perception(), RobotState(0.0, 0.0), Goal(5.0, 0.0))
        regrets = controller.telemetry().regrets
        assert regrets[0] < regrets[1]

    def test_rejects_mismatched_models(self):
        with pytest.raises(ConfigError):
            NegotiationController([])
        with pytest.raises(ConfigError):
            NegotiationController([constant_params(1.0, 0.0, horizon=9), constant_params(1.0, 0.0, horizon=5)])

    def test_drives_an_episode(self, open_world, sim_config):
        controller = nauts_controller([constant_params(1.0, 0.0), constant_params(1.0, 0.0)])
        trace, metrics = run_episode(open_world, sim_config, controller, NAMES)
        assert not metrics.failure
        assert metrics.traversal_time == pytest.approx(10.0, abs=0.6)
        assert all(len(row.weights) == 2 for row in trace.rows)
        assert [r.tick for r in controller.history] == list(range(0, len(trace.rows), controller.config.period))


class TestMakeController:

    def test_single_policy(self):
        controller = make_controller(0, 'single_policy', NAMES, policy='obstacle_avoidance')
        assert isinstance(controller, SinglePolicyController)
        assert controller.index == 1
        assert controller.telemetry().weights == (0.0, 1.0)

    def test_uniform_blend(self):
        models = [constant_params(1.0, 0.0), constant_params(0.0, 1.0)]
        controller = make_controller(0, 'uniform_blend', NAMES, predictors=models)
        assert isinstance(controller, UniformBlendController)
        b = controller(perception(), RobotState(0.0, 0.0), Goal(5.0, 0.0))
        assert b.linear_velocity == pytest.approx(0.5)
        assert b.angular_velocity == pytest.approx(0.5)
        assert controller.telemetry().weights == (0.5, 0.5)

    def test_nauts(self):
        models = [constant_params(1.0, 0.0), constant_params(0.0, 1.0)]
        controller = make_controller(3, 'nauts', NAMES, predictors=models)
        assert isinstance(controller, NegotiationController)
        assert controller.V is None

    def test_errors(self):
        models = [constant_params(1.0, 0.0)]
        with pytest.raises(ConfigError):
            make_controller(0, 'teleop', NAMES)
        with pytest.raises(ConfigError):
            make_controller(0, 'single_policy', NAMES)
        with pytest.raises(ConfigError):
            make_controller(0, 'nauts', NAMES)
        with pytest.raises(InvalidArgumentError):
            make_controller(0, 'nauts', NAMES, predictors=models)
        with pytest.raises(IndexError):
            make_controller(0, 'single_policy', NAMES, policy='adaptive')


def test_single_policy_controller_index_range():
    from terrain_negotiator.policies import PolicyLibrary
    with pytest.raises(IndexError):
        SinglePolicyController(PolicyLibrary(list(NAMES)), 2)
