"""
Per-policy prediction models.

Each model maps a terrain observation o and a relative goal g to the next T
behaviors of one policy, together with per-step variances. The model is a
Bayesian linear regressor over [1, x, random Fourier features of x] with a
diagonal Gaussian over every weight. Predicted states are not regressed: they
are obtained by integrating the predicted behaviors through the unicycle model.

Training minimizes a weighted sum of the Gaussian negative log-likelihood of
the demonstrated behaviors/states and the squared error between the goal and
the predicted displacement, with a zeroth-order stochastic optimizer started
from the conjugate posterior.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .core import (
    Behavior,
    Goal,
    ObservationVector,
    RobotState,
    Trajectory,
    behaviors_from_array,
)
from .exceptions import (
    InvalidArgumentError,
    NonFiniteObjectiveError,
    TrainingDivergedError,
)
from .simulator import integrate_behaviors, step_kinematics

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-6
DIVERGENCE_LOSS = 1e6
MIN_TRAINING_SAMPLES = 100
UPDATE_RULES = ('sign', 'sgd')
GOAL_FEATURES = 2

SeedLike = Union[int, np.random.Generator, None]


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class PredictorParams:
    """
    Weights of one prediction model.

    `weight_means` and `weight_log_variances` are flat views of
    (total_features, 2*horizon) matrices, output columns ordered
    (v_0, omega_0, v_1, omega_1, ...).
    """

    weight_means: np.ndarray = field(repr=False)
    weight_log_variances: np.ndarray = field(repr=False)
    feature_count: int = 64
    horizon: int = 9
    observation_dim: int = 8
    feature_seed: int = 0
    lengthscale: float = 1.0
    noise_log_variance: np.ndarray = field(default=None, repr=False)
    dt: float = 0.1
    policy: str = ''

    def __post_init__(self):
        if self.feature_count < 1:
            raise InvalidArgumentError(f"feature_count must be >= 1 (got {self.feature_count})")
        if self.horizon < 1:
            raise InvalidArgumentError(f"horizon must be >= 1 (got {self.horizon})")
        if not self.lengthscale > 0 or not self.dt > 0:
            raise InvalidArgumentError("lengthscale and dt must be positive")
        size = self.total_features * self.output_dim
        means = np.array(self.weight_means, dtype=float).reshape(-1)
        log_vars = np.array(self.weight_log_variances, dtype=float).reshape(-1)
        if means.size != size or log_vars.size != size:
            raise InvalidArgumentError(
                f"Expected {size} weights for {self.total_features} features x {self.output_dim} outputs "
                f"(got {means.size} means, {log_vars.size} log-variances)"
            )
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(log_vars))):
            raise InvalidArgumentError("Predictor weights must be finite")
        noise = self.noise_log_variance
        noise = np.zeros(self.output_dim) if noise is None else np.array(noise, dtype=float).reshape(-1)
        if noise.size != self.output_dim or not np.all(np.isfinite(noise)):
            raise InvalidArgumentError(f"noise_log_variance needs {self.output_dim} finite entries")
        for arr in (means, log_vars, noise):
            arr.setflags(write=False)
        object.__setattr__(self, 'weight_means', means)
        object.__setattr__(self, 'weight_log_variances', log_vars)
        object.__setattr__(self, 'noise_log_variance', noise)

    @property
    def input_dim(self) -> int:
        return self.observation_dim + GOAL_FEATURES

    @property
    def total_features(self) -> int:
        return 1 + self.input_dim + self.feature_count

    @property
    def output_dim(self) -> int:
        return 2 * self.horizon

    def mean_matrix(self) -> np.ndarray:
        return self.weight_means.reshape(self.total_features, self.output_dim)

    def variance_matrix(self) -> np.ndarray:
        return np.exp(self.weight_log_variances.reshape(self.total_features, self.output_dim))

    def flat(self) -> np.ndarray:
        """Trainable parameter vector: means followed by log-variances."""
        return np.concatenate((self.weight_means, self.weight_log_variances))

    def with_flat(self, x: np.ndarray) -> 'PredictorParams':
        half = self.weight_means.size
        return self._replace(weight_means=x[:half], weight_log_variances=x[half:])

    def _replace(self, **changes) -> 'PredictorParams':
        values = dict(
            weight_means=self.weight_means,
            weight_log_variances=self.weight_log_variances,
            feature_count=self.feature_count,
            horizon=self.horizon,
            observation_dim=self.observation_dim,
            feature_seed=self.feature_seed,
            lengthscale=self.lengthscale,
            noise_log_variance=self.noise_log_variance,
            dt=self.dt,
            policy=self.policy,
        )
        values.update(changes)
        return PredictorParams(**values)

    @classmethod
    def zeros(cls, observation_dim: int = 8, horizon: int = 9, feature_count: int = 64,
              feature_seed: int = 0, lengthscale: float = 1.0, dt: float = 0.1,
              policy: str = '') -> 'PredictorParams':
        """Zero-mean model with unit weight and noise variances."""
        size = (1 + observation_dim + GOAL_FEATURES + feature_count) * 2 * horizon
        return cls(np.zeros(size), np.zeros(size), feature_count, horizon, observation_dim,
                   feature_seed, lengthscale, np.zeros(2 * horizon), dt, policy)


@dataclass(frozen=True)
class PolicyPrediction:
    """T predicted behaviors, the T+1 states they produce from the origin, and behavior variances."""

    behaviors: Tuple[Behavior, ...]
    states: Tuple[RobotState, ...]
    behavior_variances: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        Trajectory(self.states, self.behaviors)
        if len(self.behavior_variances) != len(self.behaviors):
            raise InvalidArgumentError("Need one variance pair per predicted behavior")
        for var_v, var_w in self.behavior_variances:
            if not (var_v > 0 and var_w > 0):
                raise InvalidArgumentError("Behavior variances must be positive")

    @property
    def horizon(self) -> int:
        return len(self.behaviors)

    def behavior_array(self) -> np.ndarray:
        return np.array([b.as_array() for b in self.behaviors]).reshape(-1, 2)

    def state_array(self) -> np.ndarray:
        return np.array([s.as_array() for s in self.states]).reshape(-1, 3)

    def trajectory(self) -> Trajectory:
        return Trajectory(self.states, self.behaviors)

    @classmethod
    def from_behaviors(cls, behaviors: Sequence[Behavior], dt: float = 0.1,
                       variances: Optional[Sequence[Tuple[float, float]]] = None) -> 'PolicyPrediction':
        """Build a kinematically consistent prediction from behaviors alone."""
        behaviors = tuple(behaviors)
        states = [RobotState(0.0, 0.0, 0.0)]
        for behavior in behaviors:
            states.append(step_kinematics(states[-1], behavior, dt))
        if variances is None:
            variances = [(VARIANCE_FLOOR, VARIANCE_FLOOR)] * len(behaviors)
        return cls(behaviors, tuple(states), tuple(tuple(v) for v in variances))


@dataclass(frozen=True)
class TrainingSample:
    """One demonstration window: observation and goal at t, then T behaviors and T+1 robot-frame states."""

    observation: ObservationVector
    goal: Goal
    actual_behaviors: Tuple[Behavior, ...]
    actual_states: Tuple[RobotState, ...]

    def __post_init__(self):
        Trajectory(self.actual_states, self.actual_behaviors)


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """
    Columnar storage of training samples for one policy.

    observations (M, q), goals (M, 2), behaviors (M, T, 2), states (M, T+1, 3).
    """

    observations: np.ndarray
    goals: np.ndarray
    behaviors: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        goals = np.asarray(self.goals, dtype=float).reshape(-1, 2)
        behaviors = np.asarray(self.behaviors, dtype=float)
        states = np.asarray(self.states, dtype=float)
        m = obs.shape[0] if obs.ndim == 2 else 0
        if obs.ndim != 2 or goals.shape[0] != m or behaviors.shape[0] != m or states.shape[0] != m:
            raise InvalidArgumentError("SampleBatch arrays must share their first dimension")
        if behaviors.ndim != 3 or states.ndim != 3 or states.shape[1] != behaviors.shape[1] + 1:
            raise InvalidArgumentError("SampleBatch needs behaviors (M, T, 2) and states (M, T+1, 3)")
        object.__setattr__(self, 'observations', obs)
        object.__setattr__(self, 'goals', goals)
        object.__setattr__(self, 'behaviors', behaviors)
        object.__setattr__(self, 'states', states)

    def __len__(self) -> int:
        return self.observations.shape[0]

    @property
    def horizon(self) -> int:
        return self.behaviors.shape[1]

    @property
    def observation_dim(self) -> int:
        return self.observations.shape[1]

    def subset(self, index: np.ndarray) -> 'SampleBatch':
        return SampleBatch(self.observations[index], self.goals[index],
                           self.behaviors[index], self.states[index])

    @classmethod
    def from_samples(cls, samples: Sequence[TrainingSample]) -> 'SampleBatch':
        if not samples:
            raise InvalidArgumentError("Cannot build a batch from zero samples")
        return cls(
            np.array([s.observation.features for s in samples]),
            np.array([s.goal.as_array() for s in samples]),
            np.array([[b.as_array() for b in s.actual_behaviors] for s in samples]),
            np.array([[st.as_array() for st in s.actual_states] for s in samples]),
        )

    @classmethod
    def empty(cls, observation_dim: int, horizon: int) -> 'SampleBatch':
        return cls(np.zeros((0, observation_dim)), np.zeros((0, 2)),
                   np.zeros((0, horizon, 2)), np.zeros((0, horizon + 1, 3)))


@dataclass(frozen=True)
class LossBreakdown:
    """Unweighted loss parts; total = lambda1 * nll + lambda2 * goal."""

    total: float
    nll: float
    goal: float
    lambda1: float
    lambda2: float
    clamped: int = 0

    @property
    def nll_term(self) -> float:
        return self.lambda1 * self.nll

    @property
    def goal_term(self) -> float:
        return self.lambda2 * self.goal


@lru_cache(maxsize=64)
def _fourier_basis(seed: int, count: int, input_dim: int, lengthscale: float) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((count, input_dim)) / lengthscale
    phase = rng.uniform(0.0, 2.0 * math.pi, count)
    omega.setflags(write=False)
    phase.setflags(write=False)
    return omega, phase


def goal_features(goals: np.ndarray) -> np.ndarray:
    """Unit direction of each goal; (0, 0) for a zero goal."""
    goals = np.asarray(goals, dtype=float).reshape(-1, 2)
    norms = np.linalg.norm(goals, axis=1, keepdims=True)
    return np.divide(goals, norms, out=np.zeros_like(goals), where=norms > 0)


def feature_map(params: PredictorParams, observations: np.ndarray, goals: np.ndarray) -> np.ndarray:
    """
    Design matrix [1, x, sqrt(2/D) cos(x W^T + b)] with x = (o, goal direction).

    Only the goal direction enters, so predictions do not change with goal
    distance; a model cannot learn to slow down as the goal gets near.
    """
    x = np.hstack((np.asarray(observations, dtype=float).reshape(-1, params.observation_dim),
                   goal_features(goals)))
    omega, phase = _fourier_basis(params.feature_seed, params.feature_count, params.input_dim,
                                  float(params.lengthscale))
    fourier = math.sqrt(2.0 / params.feature_count) * np.cos(x @ omega.T + phase)
    return np.hstack((np.ones((x.shape[0], 1)), x, fourier))


def predict_arrays(params: PredictorParams, observations: np.ndarray,
                   goals: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Batched mean and variance of the predicted behaviors, each (B, T, 2)."""
    phi = feature_map(params, observations, goals)
    mean = phi @ params.mean_matrix()
    variance = (phi * phi) @ params.variance_matrix() + np.exp(params.noise_log_variance)
    shape = (phi.shape[0], params.horizon, 2)
    return mean.reshape(shape), variance.reshape(shape)


def predict(params: PredictorParams, o: ObservationVector, g: Goal) -> PolicyPrediction:
    """
    Predict the next T behaviors and states of one policy.

    The prediction uses the weight means only, so it is deterministic. States
    start at the origin with zero heading (the robot frame at planning time) and
    follow from step_kinematics.

    Args:
        params (PredictorParams): Trained or initialized model
        o (ObservationVector): Current terrain observation
        g (Goal): Goal displacement in the robot frame

    Returns:
        PolicyPrediction: Behaviors, states and behavior variances

    Raises:
        InvalidArgumentError: If the observation does not match the model or holds non-finite values
    """
    features = np.asarray(o.features, dtype=float)
    if not np.all(np.isfinite(features)):
        raise InvalidArgumentError("Observation features must be finite")
    if features.size != params.observation_dim:
        raise InvalidArgumentError(
            f"Model expects q={params.observation_dim}, observation has q={features.size}"
        )
    mean, variance = predict_arrays(params, features[None, :], g.as_array()[None, :])
    behaviors = behaviors_from_array(mean[0])
    states = [RobotState(0.0, 0.0, 0.0)]
    for behavior in behaviors:
        states.append(step_kinematics(states[-1], behavior, params.dt))
    variances = tuple((float(a), float(b)) for a, b in np.maximum(variance[0], VARIANCE_FLOOR))
    return PolicyPrediction(behaviors, tuple(states), variances)


def gaussian_nll(actual: np.ndarray, mean: np.ndarray, variance: np.ndarray) -> Tuple[np.ndarray, int]:
    """
    Elementwise Gaussian negative log-likelihood, variance clamped at 1e-6.

    Returns:
        tuple: (nll array, number of clamped variance entries)
    """
    variance = np.asarray(variance, dtype=float)
    clamped = int(np.count_nonzero(variance < VARIANCE_FLOOR))
    variance = np.maximum(variance, VARIANCE_FLOOR)
    residual = np.asarray(actual, dtype=float) - np.asarray(mean, dtype=float)
    return 0.5 * (np.log(2.0 * math.pi * variance) + residual * residual / variance), clamped


def _wrap(angles: np.ndarray) -> np.ndarray:
    return np.remainder(angles + math.pi, 2.0 * math.pi) - math.pi


def loss_components(params: PredictorParams, batch: SampleBatch,
                    lambda1: float = 0.1, lambda2: float = 10.0) -> LossBreakdown:
    """
    Evaluate the training loss and its two parts, averaged over the batch.

    The likelihood part covers the T behaviors and the T predicted poses after the
    start pose. Pose variances grow with the accumulated behavior variances
    (x, y from the linear velocity, heading from the angular velocity).
    """
    if len(batch) == 0:
        raise InvalidArgumentError("Loss needs a non-empty batch")
    if batch.horizon != params.horizon:
        raise InvalidArgumentError(f"Batch horizon {batch.horizon} does not match model horizon {params.horizon}")
    mean, variance = predict_arrays(params, batch.observations, batch.goals)
    states = integrate_behaviors(mean, params.dt)

    behavior_nll, clamped_b = gaussian_nll(batch.behaviors, mean, variance)

    dt2 = params.dt * params.dt
    cumulative = np.cumsum(variance, axis=1) * dt2
    state_var = np.empty(states[:, 1:, :].shape)
    state_var[..., 0] = cumulative[..., 0]
    state_var[..., 1] = cumulative[..., 0]
    state_var[..., 2] = cumulative[..., 1]
    residual = batch.states[:, 1:, :] - states[:, 1:, :]
    residual[..., 2] = _wrap(residual[..., 2])
    state_nll, clamped_s = gaussian_nll(residual, 0.0, state_var)

    nll = float((behavior_nll.sum(axis=(1, 2)) + state_nll.sum(axis=(1, 2))).mean())
    displacement = states[:, -1, :2] - states[:, 0, :2]
    goal = float(np.sum((batch.goals - displacement) ** 2, axis=1).mean())
    total = lambda1 * nll + lambda2 * goal
    return LossBreakdown(total, nll, goal, lambda1, lambda2, clamped_b + clamped_s)


def loss_eq1(params: PredictorParams, batch: SampleBatch,
             lambda1: float = 0.1, lambda2: float = 10.0) -> float:
    """
    Training loss: lambda1 * Gaussian NLL + lambda2 * ||g - (s_T - s_0)||^2, batch averaged.

    Raises:
        InvalidArgumentError: If the batch is empty or lambda1 <= 0 or lambda2 < 0
    """
    if not lambda1 > 0 or lambda2 < 0:
        raise InvalidArgumentError(f"Need lambda1 > 0 and lambda2 >= 0 (got {lambda1}, {lambda2})")
    breakdown = loss_components(params, batch, lambda1, lambda2)
    if breakdown.clamped:
        logger.debug(f"Clamped {breakdown.clamped} variance entries at {VARIANCE_FLOOR}")
    return breakdown.total


def zo_gradient_estimate(objective: Callable[[np.ndarray], float], x: np.ndarray,
                         mu: float = 1e-2, samples: int = 1, seed: SeedLike = 0) -> np.ndarray:
    """
    Two-point Gaussian-smoothing gradient estimate.

    Averages [(F(x + mu*u) - F(x)) / mu] * u over `samples` draws u ~ N(0, I).

    Args:
        objective (callable): F: R^d -> R
        x (np.ndarray): Point of evaluation
        mu (float): Smoothing radius (> 0)
        samples (int): Number of directions (>= 1)
        seed (int or Generator): Randomness source; identical seeds give identical estimates

    Raises:
        InvalidArgumentError: If mu <= 0 or samples < 1
        NonFiniteObjectiveError: If F returns NaN or infinity
    """
    if not mu > 0:
        raise InvalidArgumentError(f"Smoothing mu must be positive (got {mu})")
    if samples < 1:
        raise InvalidArgumentError(f"samples must be >= 1 (got {samples})")
    x = np.asarray(x, dtype=float)
    rng = _rng(seed)
    base = float(objective(x))
    if not math.isfinite(base):
        raise NonFiniteObjectiveError(x, base)
    estimate = np.zeros_like(x)
    for _ in range(samples):
        u = rng.standard_normal(x.shape)
        point = x + mu * u
        value = float(objective(point))
        if not math.isfinite(value):
            raise NonFiniteObjectiveError(point, value)
        estimate += ((value - base) / mu) * u
    return estimate / samples


@dataclass
class ZOResult:
    x: np.ndarray
    value: float
    evaluations: int
    history: List[float] = field(default_factory=list)


def zo_minimize(objective: Callable[[np.ndarray], float], x0: np.ndarray, step_size: float = 1e-3,
                smoothing: float = 1e-2, samples: int = 1, max_evaluations: int = 10_000,
                decay: bool = True, seed: SeedLike = 0) -> ZOResult:
    """
    Zeroth-order SGD: x <- x - eta_t * zo_gradient_estimate(F, x).

    eta_t = step_size / sqrt(t + 1) when decay is set, constant otherwise. Each
    iteration costs samples + 1 evaluations; the loop stops before exceeding
    max_evaluations. The best point seen is returned.
    """
    rng = _rng(seed)
    x = np.asarray(x0, dtype=float).copy()
    best_x, best_value = x.copy(), float(objective(x))
    evaluations = 1
    history = [best_value]
    t = 0
    while evaluations + samples + 1 <= max_evaluations:
        eta = step_size / math.sqrt(t + 1) if decay else step_size
        x = x - eta * zo_gradient_estimate(objective, x, smoothing, samples, rng)
        evaluations += samples + 1
        value = float(objective(x))
        evaluations += 1
        if not math.isfinite(value):
            raise NonFiniteObjectiveError(x, value)
        if value < best_value:
            best_x, best_value = x.copy(), value
        history.append(best_value)
        t += 1
    return ZOResult(best_x, best_value, evaluations, history)


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters of prediction-model training."""

    lambda1: float = 0.1
    lambda2: float = 10.0
    horizon: int = 9
    feature_count: int = 64
    lengthscale: float = 1.0
    budget: int = 200
    step_size: float = 1e-3
    smoothing: float = 1e-2
    zo_samples: int = 8
    batch_size: int = 64
    prior_precision: float = 1.0
    init: str = 'posterior'
    update: str = 'sign'
    dt: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.update not in UPDATE_RULES:
            raise InvalidArgumentError(f"Unknown update '{self.update}' (expected one of {', '.join(UPDATE_RULES)})")
        if not self.lambda1 > 0 or self.lambda2 < 0:
            raise InvalidArgumentError("Need lambda1 > 0 and lambda2 >= 0")
        if self.horizon < 1 or self.feature_count < 1 or self.budget < 0:
            raise InvalidArgumentError("horizon and feature_count must be >= 1, budget >= 0")
        if self.init not in ('posterior', 'zeros'):
            raise InvalidArgumentError(f"Unknown init '{self.init}' (expected 'posterior' or 'zeros')")


@dataclass
class TrainingReport:
    policy: str
    initial: LossBreakdown
    final: LossBreakdown
    loss_curve: List[LossBreakdown] = field(default_factory=list)
    samples: int = 0


def fit_posterior(batch: SampleBatch, config: TrainingConfig, policy: str = '') -> PredictorParams:
    """
    Conjugate Bayesian linear regression of the behaviors on the feature map.

    The noise variance is estimated from ridge residuals; every output shares
    the posterior covariance, whose diagonal becomes the weight variances.
    """
    params = PredictorParams.zeros(batch.observation_dim, config.horizon, config.feature_count,
                                   config.seed, config.lengthscale, config.dt, policy)
    phi = feature_map(params, batch.observations, batch.goals)
    targets = batch.behaviors.reshape(len(batch), -1)
    gram = phi.T @ phi
    eye = np.eye(gram.shape[0])

    ridge = linalg.cho_factor(gram + config.prior_precision * 1e-2 * eye)
    residual = targets - phi @ linalg.cho_solve(ridge, phi.T @ targets)
    noise = max(float(np.mean(residual ** 2)), VARIANCE_FLOOR)

    factor = linalg.cho_factor(config.prior_precision * eye + gram / noise)
    means = linalg.cho_solve(factor, phi.T @ targets) / noise
    covariance_diag = np.diag(linalg.cho_solve(factor, eye))
    log_vars = np.log(np.maximum(np.repeat(covariance_diag[:, None], params.output_dim, axis=1), VARIANCE_FLOOR))
    per_output = np.maximum(np.mean((targets - phi @ means) ** 2, axis=0), VARIANCE_FLOOR)
    return params._replace(weight_means=means.reshape(-1), weight_log_variances=log_vars.reshape(-1),
                           noise_log_variance=np.log(per_output))


def train_policy(batch: SampleBatch, config: TrainingConfig, policy: str = '') -> Tuple[PredictorParams, TrainingReport]:
    """
    Train one prediction model.

    Starts from the conjugate posterior (or the zero model), then runs
    `config.budget` zeroth-order steps on minibatch losses. With the default
    'sign' update every coordinate moves by exactly eta_t along the sign of its
    gradient estimate; 'sgd' takes the raw estimate. A step whose full-batch
    loss is worse than the best so far is undone, so the final loss never
    exceeds the initial one. From the posterior start the eta_t steps are small
    and most are undone, so the posterior fit carries almost all of the
    learning; init='zeros' leaves all of it to the zeroth-order steps.

    Raises:
        InvalidArgumentError: If fewer than 100 samples are given
        TrainingDivergedError: If the loss exceeds 1e6
    """
    if len(batch) < MIN_TRAINING_SAMPLES:
        raise InvalidArgumentError(
            f"Policy '{policy}' has {len(batch)} samples; at least {MIN_TRAINING_SAMPLES} are required"
        )
    if config.init == 'posterior':
        params = fit_posterior(batch, config, policy)
    else:
        params = PredictorParams.zeros(batch.observation_dim, config.horizon, config.feature_count,
                                       config.seed, config.lengthscale, config.dt, policy)
    initial = loss_components(params, batch, config.lambda1, config.lambda2)
    if not math.isfinite(initial.total) or initial.total > DIVERGENCE_LOSS:
        raise TrainingDivergedError(0, initial.total, policy)

    rng = np.random.default_rng(config.seed)
    best, best_loss = params, initial
    curve = [initial]
    x = params.flat()
    batch_size = min(config.batch_size, len(batch))
    for t in range(config.budget):
        minibatch = batch.subset(rng.choice(len(batch), size=batch_size, replace=False))

        def objective(point, _mb=minibatch):
            return loss_components(params.with_flat(point), _mb, config.lambda1, config.lambda2).total

        eta = config.step_size / math.sqrt(t + 1)
        gradient = zo_gradient_estimate(objective, x, config.smoothing, config.zo_samples, rng)
        if config.update == 'sign':
            gradient = np.sign(gradient)
        candidate = params.with_flat(x - eta * gradient)
        loss = loss_components(candidate, batch, config.lambda1, config.lambda2)
        if not math.isfinite(loss.total) or loss.total > DIVERGENCE_LOSS:
            raise TrainingDivergedError(t + 1, loss.total, policy)
        if loss.total < best_loss.total:
            best, best_loss = candidate, loss
            x = candidate.flat()
        else:
            x = best.flat()
        curve.append(best_loss)
        if best_loss.clamped and t == 0:
            logger.warning(f"Variance clamping active while training '{policy}'")

    logger.info(f"Trained '{policy}': loss {initial.total:.4f} -> {best_loss.total:.4f} "
                f"({config.budget} steps, {len(batch)} samples)")
    return best, TrainingReport(policy, initial, best_loss, curve, len(batch))


def _train_job(args):
    name, batch, config = args
    return name, train_policy(batch, config, name)


def train(samples: Dict[str, SampleBatch], config: TrainingConfig = TrainingConfig(),
          workers: int = 1) -> Dict[str, Tuple[PredictorParams, TrainingReport]]:
    """
    Train one model per policy.

    Args:
        samples (dict): Policy name -> SampleBatch
        config (TrainingConfig): Hyperparameters (defaults lambda1=0.1, lambda2=10, T=9)
        workers (int): Process-pool size; policies are independent

    Returns:
        dict: Policy name -> (PredictorParams, TrainingReport), in input order
    """
    jobs = [(name, batch, config) for name, batch in samples.items()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_train_job, jobs))
    else:
        results = dict(_train_job(job) for job in jobs)
    return {name: results[name] for name in samples}


def behavior_mse(params: PredictorParams, batch: SampleBatch) -> float:
    """Mean squared error of the predicted behavior means."""
    mean, _ = predict_arrays(params, batch.observations, batch.goals)
    return float(np.mean((mean - batch.behaviors) ** 2))
