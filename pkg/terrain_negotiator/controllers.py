"""
Controllers run by the simulator: the negotiating controller and two baselines.

Every controller is a callable controller(perception, state, goal) -> Behavior,
where goal is the world-frame displacement to the navigation goal, and exposes
telemetry() for the run trace.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .core import Behavior, Goal, ObservationVector, RobotState
from .exceptions import ConfigError, InvalidArgumentError
from .negotiation import (
    NegotiationConfig,
    RegretVector,
    SolverDiagnostics,
    WeightMatrix,
    blend_behaviors,
    initial_weights,
    objective_eq3,
    policy_weights,
    project_to_constraint,
    solve_negotiation,
)
from .policies import PolicyLibrary, PolicyParams, DEFAULT_PARAMS
from .predictor import PolicyPrediction, PredictorParams, predict
from .simulator import Perception, Telemetry

logger = logging.getLogger(__name__)

CONTROLLER_MODES = ('nauts', 'single_policy', 'uniform_blend')


def robot_frame_goal(goal: Goal, state: RobotState, reach: Optional[float] = None) -> Goal:
    """Rotate a world-frame goal into the robot frame, optionally clipped to `reach`."""
    local = goal.rotated(state.heading)
    norm = local.norm()
    if norm == 0.0:
        return Goal(1.0, 0.0) if reach is None else Goal(reach, 0.0)
    if reach is not None and norm > reach:
        scale = reach / norm
        return Goal(local.dx * scale, local.dy * scale)
    return local


@dataclass
class NegotiationRecord:
    """One negotiation: its instance, the warm start it used and the solver outcome."""

    tick: int
    observation: ObservationVector
    regrets: RegretVector
    V_init: WeightMatrix
    V: WeightMatrix
    diagnostics: SolverDiagnostics


class NegotiationController:
    """
    Blends predicted policy behaviors with weights negotiated from regrets.

    Each tick all N models predict T behaviors for the current observation and
    goal, and the first blended behavior is executed. Every `config.period`
    ticks (starting at tick 0) the regrets of the predictions are computed and
    V is re-solved, warm-started from the current V.
    """

    def __init__(self, predictors: Sequence[PredictorParams], V_state: Optional[WeightMatrix] = None,
                 config: NegotiationConfig = NegotiationConfig(), v_max: float = 2.0,
                 omega_max: float = 1.5, dt: float = 0.1):
        if not predictors:
            raise ConfigError("The negotiating controller needs at least one prediction model")
        horizons = {p.horizon for p in predictors}
        if len(horizons) != 1:
            raise ConfigError(f"Prediction models disagree on the horizon: {sorted(horizons)}")
        self.predictors = list(predictors)
        self.config = config
        self.v_max = v_max
        self.omega_max = omega_max
        self.dt = dt
        self.horizon = horizons.pop()
        self.V = V_state
        self.history: List[NegotiationRecord] = []
        self._ticks = 0
        self._weights = np.full(len(self.predictors), 1.0 / len(self.predictors))
        self._regrets = np.full(len(self.predictors), np.nan)
        self._objective = float('nan')

    @property
    def n_policies(self) -> int:
        return len(self.predictors)

    def predictions(self, o: ObservationVector, g: Goal) -> List[PolicyPrediction]:
        return [predict(p, o, g) for p in self.predictors]

    def negotiate(self, o: ObservationVector, g: Goal, predictions: Sequence[PolicyPrediction]) -> WeightMatrix:
        regrets = RegretVector.from_predictions(predictions, g, self.config.r_max, self.config.epsilon)
        V_init = self.V if self.V is not None else initial_weights(o, self.n_policies)
        V_new, diagnostics = solve_negotiation(o, regrets, V_init, config=self.config)
        self.history.append(NegotiationRecord(self._ticks, o, regrets, V_init, V_new, diagnostics))
        self._regrets = regrets.per_policy.mean(axis=1)
        if diagnostics.converged:
            self.V = V_new
            self._objective = diagnostics.objective_trace[-1]
        else:
            logger.warning(f"Negotiation at tick {self._ticks} did not converge in "
                           f"{diagnostics.iterations} iterations; keeping previous weights")
            self.V = V_init
            self._objective = objective_eq3(V_init, o, regrets, self.config.lambda3, self.config.lambda4)
        return self.V

    def __call__(self, perception: Perception, state: RobotState, goal: Goal) -> Behavior:
        o = perception.observation
        g = robot_frame_goal(goal, state, self.v_max * self.horizon * self.dt)
        predictions = self.predictions(o, g)
        if self.V is None:
            self.V = initial_weights(o, self.n_policies)
        if self._ticks % self.config.period == 0:
            self.negotiate(o, g, predictions)
        V_exec = project_to_constraint(self.V, o)
        self._weights = policy_weights(V_exec, o)
        blended = blend_behaviors(o, V_exec, predictions, self.v_max, self.omega_max, self.dt)
        self._ticks += 1
        return blended.behaviors[0]

    def telemetry(self) -> Telemetry:
        return Telemetry(tuple(float(w) for w in self._weights),
                         tuple(float(r) for r in self._regrets), self._objective)


def nauts_controller(predictors: Sequence[PredictorParams], V_state: Optional[WeightMatrix] = None,
                     config: NegotiationConfig = NegotiationConfig(), v_max: float = 2.0,
                     omega_max: float = 1.5, dt: float = 0.1) -> NegotiationController:
    """
    Build the negotiating controller.

    Args:
        predictors (sequence): One trained model per policy, in library order
        V_state (WeightMatrix): Initial weights; None starts uniform at the first tick
        config (NegotiationConfig): Solver settings and negotiation period (ticks)

    Returns:
        NegotiationController: Callable controller with telemetry()
    """
    return NegotiationController(predictors, V_state, config, v_max, omega_max, dt)


class SinglePolicyController:
    """Runs one policy of the library directly on the sensed environment."""

    def __init__(self, library: PolicyLibrary, index: int):
        if not 0 <= index < len(library):
            raise IndexError(f"Policy index {index} out of range (library has {len(library)} policies)")
        self.library = library
        self.index = index

    def __call__(self, perception: Perception, state: RobotState, goal: Goal) -> Behavior:
        return self.library.act(self.index, state, perception.environment, perception.time)

    def telemetry(self) -> Telemetry:
        weights = [0.0] * len(self.library)
        weights[self.index] = 1.0
        return Telemetry(tuple(weights), tuple(float('nan') for _ in weights))


def single_policy_controller(library: PolicyLibrary, policy: str) -> SinglePolicyController:
    return SinglePolicyController(library, library.index_of(policy))


class UniformBlendController:
    """Blends predicted behaviors with equal weights 1/N."""

    def __init__(self, predictors: Sequence[PredictorParams], v_max: float = 2.0,
                 omega_max: float = 1.5, dt: float = 0.1):
        if not predictors:
            raise ConfigError("The uniform blend needs at least one prediction model")
        self.predictors = list(predictors)
        self.v_max = v_max
        self.omega_max = omega_max
        self.dt = dt

    def __call__(self, perception: Perception, state: RobotState, goal: Goal) -> Behavior:
        o = perception.observation
        horizon = self.predictors[0].horizon
        g = robot_frame_goal(goal, state, self.v_max * horizon * self.dt)
        predictions = [predict(p, o, g) for p in self.predictors]
        V = initial_weights(o, len(self.predictors))
        return blend_behaviors(o, V, predictions, self.v_max, self.omega_max, self.dt).behaviors[0]

    def telemetry(self) -> Telemetry:
        n = len(self.predictors)
        return Telemetry(tuple(1.0 / n for _ in range(n)), tuple(float('nan') for _ in range(n)))


def uniform_blend_controller(predictors: Sequence[PredictorParams], v_max: float = 2.0,
                             omega_max: float = 1.5, dt: float = 0.1) -> UniformBlendController:
    return UniformBlendController(predictors, v_max, omega_max, dt)


def make_controller(seed: int, mode: str, policy_names: Sequence[str],
                    predictors: Optional[Sequence[PredictorParams]] = None,
                    policy: Optional[str] = None, params: PolicyParams = DEFAULT_PARAMS,
                    config: NegotiationConfig = NegotiationConfig(), v_max: float = 2.0,
                    omega_max: float = 1.5, dt: float = 0.1):
    """
    Controller factory for trial batches; `seed` is the trial seed.

    Bind everything but the seed with functools.partial to get a picklable factory.
    """
    if mode not in CONTROLLER_MODES:
        raise ConfigError(f"Unknown controller mode '{mode}' (expected one of {CONTROLLER_MODES})")
    if mode == 'single_policy':
        if policy is None:
            raise ConfigError("single_policy mode needs a policy name")
        return single_policy_controller(PolicyLibrary(policy_names, params, seed), policy)
    if not predictors:
        raise ConfigError(f"{mode} mode needs trained prediction models")
    if len(predictors) != len(policy_names):
        raise InvalidArgumentError(f"{len(predictors)} models for {len(policy_names)} policies")
    if mode == 'uniform_blend':
        return uniform_blend_controller(predictors, v_max, omega_max, dt)
    return nauts_controller(predictors, None, config, v_max, omega_max, dt)
