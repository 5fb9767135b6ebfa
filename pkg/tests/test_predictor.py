import math

import numpy as np
import pytest

from conftest import constant_params
from terrain_negotiator.core import Goal, ObservationVector, RobotState
from terrain_negotiator.exceptions import InvalidArgumentError, NonFiniteObjectiveError
from terrain_negotiator.predictor import (
    PolicyPrediction,
    PredictorParams,
    SampleBatch,
    TrainingConfig,
    behavior_mse,
    fit_posterior,
    gaussian_nll,
    loss_components,
    loss_eq1,
    predict,
    predict_arrays,
    train,
    train_policy,
    zo_gradient_estimate,
    zo_minimize,
)
from terrain_negotiator.simulator import integrate_behaviors, step_kinematics

HORIZON = 9
DT = 0.1


def synthetic_batch(rng, count, q=8):
    """
    Demonstrations of a linear policy: v = 0.5 + 0.5 * o[1], omega = 0.5 * b
    for a latent turn command b in [-1, 1]. The goal is the displacement the
    policy actually produced, so its direction encodes b.
    """
    obs = np.hstack((np.ones((count, 1)), rng.uniform(0.0, 1.0, (count, q - 1))))
    b = rng.uniform(-1.0, 1.0, count)
    step = np.column_stack((0.5 + 0.5 * obs[:, 1], 0.5 * b))
    behaviors = np.repeat(step[:, None, :], HORIZON, axis=1)
    states = integrate_behaviors(behaviors, DT)
    goals = states[:, -1, :2] - states[:, 0, :2]
    return SampleBatch(obs, goals, behaviors, states)


def batch_from_model(params, rng, count=8):
    """Samples that agree exactly with the model's mean prediction."""
    obs = np.hstack((np.ones((count, 1)), rng.uniform(0.0, 1.0, (count, params.observation_dim - 1))))
    goals = rng.uniform(-1.0, 1.0, (count, 2))
    mean, _ = predict_arrays(params, obs, goals)
    states = integrate_behaviors(mean, params.dt)
    return SampleBatch(obs, states[:, -1, :2] - states[:, 0, :2], mean, states)


class TestParams:

    def test_zero_model_shapes(self):
        params = PredictorParams.zeros(8, HORIZON, 16)
        assert params.total_features == 1 + 10 + 16
        assert params.mean_matrix().shape == (27, 18)
        assert params.flat().size == 2 * 27 * 18
        np.testing.assert_array_equal(params.with_flat(params.flat()).weight_means, params.weight_means)

    def test_rejects_wrong_sizes(self):
        with pytest.raises(InvalidArgumentError):
            PredictorParams(np.zeros(5), np.zeros(5), feature_count=4, horizon=2, observation_dim=3)

    def test_rejects_non_finite_weights(self):
        params = PredictorParams.zeros(3, 2, 4)
        means = params.weight_means.copy()
        means[0] = math.nan
        with pytest.raises(InvalidArgumentError):
            params._replace(weight_means=means)


class TestPredict:

    def test_zero_model_stands_still(self):
        params = PredictorParams.zeros(8, 4, 8)
        prediction = predict(params, ObservationVector.from_terrain(np.full(7, 0.3)), Goal(2.0, 1.0))
        np.testing.assert_array_equal(prediction.behavior_array(), np.zeros((4, 2)))
        np.testing.assert_array_equal(prediction.state_array(), np.zeros((5, 3)))

    def test_constant_model(self):
        params = constant_params(1.2, -0.3, horizon=4, q=8)
        o = ObservationVector.from_terrain(np.full(7, 0.5))
        prediction = predict(params, o, Goal(3.0, 1.0))
        assert prediction.horizon == 4
        for b in prediction.behaviors:
            assert b.linear_velocity == pytest.approx(1.2)
            assert b.angular_velocity == pytest.approx(-0.3)
        assert all(var_v > 0 and var_w > 0 for var_v, var_w in prediction.behavior_variances)

    def test_states_follow_the_kinematics_exactly(self, rng):
        params = PredictorParams.zeros(8, HORIZON, 8)
        params = params.with_flat(rng.normal(0.0, 0.2, params.flat().size))
        o = ObservationVector.from_terrain(rng.uniform(0.0, 1.0, 7))
        prediction = predict(params, o, Goal(2.0, -1.0))
        assert prediction.states[0] == RobotState(0.0, 0.0, 0.0)
        for k, behavior in enumerate(prediction.behaviors):
            assert prediction.states[k + 1] == step_kinematics(prediction.states[k], behavior, params.dt)

    def test_prediction_ignores_goal_distance(self):
        params = PredictorParams.zeros(8, 3, 8)
        params = params.with_flat(np.linspace(-0.1, 0.1, params.flat().size))
        o = ObservationVector.from_terrain(np.full(7, 0.2))
        near = predict(params, o, Goal(1.0, 1.0)).behavior_array()
        far = predict(params, o, Goal(5.0, 5.0)).behavior_array()
        np.testing.assert_allclose(near, far)

    def test_observation_dimension_mismatch(self):
        params = PredictorParams.zeros(8, 3, 4)
        with pytest.raises(InvalidArgumentError):
            predict(params, ObservationVector.from_terrain(np.zeros(9)), Goal(1.0, 0.0))

    def test_prediction_from_behaviors(self):
        p = PolicyPrediction.from_behaviors([])
        assert p.horizon == 0
        assert len(p.states) == 1


class TestLoss:

    def test_gaussian_nll_constant(self):
        nll, clamped = gaussian_nll(np.zeros(4), np.zeros(4), np.ones(4))
        np.testing.assert_allclose(nll, np.full(4, 0.5 * math.log(2.0 * math.pi)))
        assert clamped == 0

    def test_gaussian_nll_clamps_small_variances(self):
        nll, clamped = gaussian_nll(np.zeros(2), np.zeros(2), np.array([1e-9, 1.0]))
        assert clamped == 1
        assert nll[0] == pytest.approx(0.5 * math.log(2.0 * math.pi * 1e-6))

    def test_goal_term_vanishes_when_goal_is_reached(self, rng):
        params = constant_params(1.0, 0.4, horizon=5, q=8)
        batch = batch_from_model(params, rng)
        loss = loss_components(params, batch, 0.1, 10.0)
        assert loss.goal == pytest.approx(0.0, abs=1e-20)
        assert loss.total == pytest.approx(0.1 * loss.nll)

    def test_disabled_goal_term(self, rng):
        params = constant_params(1.0, 0.0, horizon=5, q=8)
        batch = synthetic_batch(rng, 10)
        batch = SampleBatch(batch.observations, batch.goals * 3.0, batch.behaviors[:, :5],
                            batch.states[:, :6])
        loss = loss_components(params, batch, 0.1, 0.0)
        assert loss.goal > 0.0
        assert loss.goal_term == 0.0
        assert loss.total == pytest.approx(loss.nll_term)

    def test_loss_validation(self, rng):
        params = constant_params(1.0, 0.0, horizon=HORIZON)
        batch = synthetic_batch(rng, 5)
        with pytest.raises(InvalidArgumentError):
            loss_eq1(params, batch, lambda1=0.0)
        with pytest.raises(InvalidArgumentError):
            loss_eq1(params, SampleBatch.empty(8, HORIZON))
        with pytest.raises(InvalidArgumentError):
            loss_eq1(constant_params(1.0, 0.0, horizon=3), batch)


class TestZerothOrder:

    def test_constant_function(self):
        estimate = zo_gradient_estimate(lambda x: 3.0, np.ones(5), samples=50)
        np.testing.assert_array_equal(estimate, np.zeros(5))

    def test_quadratic_gradient(self):
        x = np.zeros(10)
        x[0] = 1.0
        estimate = zo_gradient_estimate(lambda z: float(z @ z), x, mu=1e-3, samples=100_000, seed=0)
        expected = np.zeros(10)
        expected[0] = 2.0
        np.testing.assert_allclose(estimate, expected, atol=0.05)

    def test_linear_gradient(self):
        a = np.array([0.5, -1.0, 0.25])
        estimate = zo_gradient_estimate(lambda z: float(a @ z), np.zeros(3), mu=1e-3, samples=100_000, seed=1)
        np.testing.assert_allclose(estimate, a, atol=0.05)

    def test_seeded(self):
        f = lambda z: float(np.sum(z ** 3))
        first = zo_gradient_estimate(f, np.ones(4), samples=10, seed=42)
        second = zo_gradient_estimate(f, np.ones(4), samples=10, seed=42)
        np.testing.assert_array_equal(first, second)

    def test_argument_validation(self):
        with pytest.raises(InvalidArgumentError):
            zo_gradient_estimate(lambda z: 0.0, np.zeros(2), mu=0.0)
        with pytest.raises(InvalidArgumentError):
            zo_gradient_estimate(lambda z: 0.0, np.zeros(2), samples=0)
        with pytest.raises(NonFiniteObjectiveError):
            zo_gradient_estimate(lambda z: math.nan, np.zeros(2))

    def test_descent_on_quadratic(self):
        x0 = np.zeros(10)
        x0[0] = 1.0
        result = zo_minimize(lambda z: float(z @ z), x0, step_size=0.04, samples=4,
                             max_evaluations=10_000, seed=0)
        assert result.value <= 1e-2
        assert result.evaluations <= 10_000
        assert np.all(np.diff(result.history) <= 0.0)


class TestTraining:

    def test_config_validation(self):
        with pytest.raises(InvalidArgumentError):
            TrainingConfig(init='random')
        with pytest.raises(InvalidArgumentError):
            TrainingConfig(update='adam')
        with pytest.raises(InvalidArgumentError):
            TrainingConfig(lambda1=0.0)

    def test_too_few_samples(self, rng):
        with pytest.raises(InvalidArgumentError):
            train_policy(synthetic_batch(rng, 99), TrainingConfig(budget=1))

    def test_zero_budget_returns_the_initialization(self, rng):
        batch = synthetic_batch(rng, 150)
        config = TrainingConfig(budget=0, feature_count=16)
        params, report = train_policy(batch, config, 'max_speed')
        np.testing.assert_array_equal(params.weight_means, fit_posterior(batch, config, 'max_speed').weight_means)
        assert report.final == report.initial
        assert len(report.loss_curve) == 1
        assert params.policy == 'max_speed'

    def test_loss_never_increases(self, rng):
        batch = synthetic_batch(rng, 200)
        for init, update in (('posterior', 'sign'), ('zeros', 'sign'), ('zeros', 'sgd')):
            config = TrainingConfig(budget=15, feature_count=8, zo_samples=4, init=init, update=update)
            _, report = train_policy(batch, config)
            totals = [loss.total for loss in report.loss_curve]
            assert len(totals) == 16
            assert np.all(np.diff(totals) <= 0.0)
            assert report.final.total <= report.initial.total

    def test_learns_a_linear_policy(self, rng):
        batch = synthetic_batch(rng, 2000)
        held_out = synthetic_batch(rng, 500)
        params, report = train_policy(batch, TrainingConfig(), 'linear')
        assert report.samples == 2000
        assert behavior_mse(params, held_out) < 0.05

    def test_train_keeps_policy_order(self, rng):
        samples = {'b': synthetic_batch(rng, 120), 'a': synthetic_batch(rng, 120)}
        results = train(samples, TrainingConfig(budget=2, feature_count=4, zo_samples=2))
        assert list(results) == ['b', 'a']
        assert results['a'][0].policy == 'a'
