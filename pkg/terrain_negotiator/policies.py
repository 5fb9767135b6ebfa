"""
Library of synthetic navigational policies.

Each policy maps the robot state and the simulator's ground-truth sensing to a
behavior. The policies are black boxes to the rest of the system: only their
outputs are recorded for training and, in the single-policy baseline, executed.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import Behavior, RobotState, normalize_angle
from .exceptions import ConfigError, InvalidArgumentError

POLICY_NAMES: Tuple[str, ...] = (
    'max_speed',
    'obstacle_avoidance',
    'min_steering',
    'adaptive',
    'no_bias',
)

MIN_STEERING_SPEED = 0.75

# Ruggedness in [0, 1] per terrain class
DEFAULT_RUGGEDNESS: Dict[str, float] = {
    'concrete': 0.0,
    'short_grass': 0.1,
    'gravel': 0.4,
    'medium_rocks': 0.6,
    'large_rocks': 1.0,
    'tall_grass': 0.2,
    'forest': 0.5,
}


@dataclass(frozen=True)
class PolicyId:
    index: int
    name: str

    def __post_init__(self):
        if self.name not in POLICY_NAMES:
            raise InvalidArgumentError(f"Unknown policy name '{self.name}'")
        if self.index < 0:
            raise InvalidArgumentError(f"Policy index must be non-negative (got {self.index})")


@dataclass(frozen=True)
class SensedEnvironment:
    """
    Ground-truth sensing handed to the policies.

    Bearings are relative to the robot heading. Obstacle distances are measured to
    the obstacle surface. `soft_obstacles` are tall-grass boundary points ahead of
    the robot; obstacle-averse policies treat them as (weaker) obstacles.
    """

    goal_bearing: float
    goal_distance: float
    obstacles: Tuple[Tuple[float, float], ...] = ()
    terrain_ruggedness: float = 0.0
    soft_obstacles: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.goal_bearing) or not math.isfinite(self.goal_distance):
            raise InvalidArgumentError("Goal bearing and distance must be finite")
        if self.goal_distance < 0:
            raise InvalidArgumentError(f"Goal distance must be >= 0 (got {self.goal_distance})")
        if not 0.0 <= self.terrain_ruggedness <= 1.0:
            raise InvalidArgumentError(
                f"Terrain ruggedness must lie in [0, 1] (got {self.terrain_ruggedness})"
            )
        object.__setattr__(self, 'goal_bearing', normalize_angle(self.goal_bearing))
        object.__setattr__(self, 'obstacles', _normalize_polar(self.obstacles))
        object.__setattr__(self, 'soft_obstacles', _normalize_polar(self.soft_obstacles))


def _normalize_polar(points) -> Tuple[Tuple[float, float], ...]:
    result = []
    for bearing, distance in points:
        if not math.isfinite(bearing) or not math.isfinite(distance) or distance < 0:
            raise InvalidArgumentError(f"Invalid obstacle reading ({bearing}, {distance})")
        result.append((normalize_angle(float(bearing)), float(distance)))
    return tuple(result)


@dataclass(frozen=True)
class PolicyParams:
    """Gains and limits shared by the policy library."""

    v_max: float = 2.0
    omega_max: float = 1.5
    k_goal: float = 1.0
    v_cruise: float = 1.0
    repulsive_gain: float = 0.5
    soft_gain_scale: float = 0.5
    contact_distance: float = 0.3
    slowdown_distance: float = 2.0
    lookahead: float = 3.0
    omega_cap: float = 0.4
    min_steering_gain: float = 0.6
    mixture_period: float = 2.0
    ruggedness: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_RUGGEDNESS))

    def __post_init__(self):
        positive = {
            'v_max': self.v_max,
            'omega_max': self.omega_max,
            'v_cruise': self.v_cruise,
            'slowdown_distance': self.slowdown_distance,
            'lookahead': self.lookahead,
            'omega_cap': self.omega_cap,
            'mixture_period': self.mixture_period,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"Policy parameter {name} must be positive (got {value})")
        if self.v_max < MIN_STEERING_SPEED:
            raise ConfigError(f"v_max must be at least {MIN_STEERING_SPEED} m/s (got {self.v_max})")
        if self.v_cruise > self.v_max:
            raise ConfigError("v_cruise cannot exceed v_max")
        if self.omega_cap >= self.omega_max:
            raise ConfigError("omega_cap must be smaller than omega_max")
        if self.slowdown_distance <= self.contact_distance:
            raise ConfigError("slowdown_distance must exceed contact_distance")
        for terrain, value in self.ruggedness.items():
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"Ruggedness of '{terrain}' must lie in [0, 1] (got {value})")


DEFAULT_PARAMS = PolicyParams()


def _clip(value: float, limit: float) -> float:
    return max(-limit, min(limit, value))


def _turn_away_sign(bearing: float) -> float:
    # obstacle on the left (positive bearing) means turning right
    return -1.0 if bearing >= 0.0 else 1.0


def _repulsive_turn(points, gain: float) -> float:
    """Sum of 1/d^2 repulsive turns from points in the forward half-plane."""
    omega = 0.0
    for bearing, distance in points:
        if abs(bearing) >= math.pi / 2:
            continue
        d = max(distance, 0.05)
        omega += _turn_away_sign(bearing) * gain * math.cos(bearing) / (d * d)
    return omega


def _nearest_ahead(points) -> Optional[float]:
    ahead = [d for b, d in points if abs(b) < math.pi / 2]
    return min(ahead) if ahead else None


def policy_max_speed(s: RobotState, env: SensedEnvironment,
                     params: PolicyParams = DEFAULT_PARAMS) -> Behavior:
    """
    Drive at maximum speed regardless of terrain, steering only toward the goal.

    Args:
        s (RobotState): Current robot state (unused beyond validation)
        env (SensedEnvironment): Ground-truth sensing
        params (PolicyParams): Gains and limits

    Returns:
        Behavior: (v_max, k_goal * goal_bearing clamped to omega_max)
    """
    return Behavior(params.v_max, _clip(params.k_goal * env.goal_bearing, params.omega_max))


def _avoidance_turn(env: SensedEnvironment, params: PolicyParams) -> float:
    omega = params.k_goal * env.goal_bearing
    omega += _repulsive_turn(env.obstacles, params.repulsive_gain)
    omega += _repulsive_turn(env.soft_obstacles, params.repulsive_gain * params.soft_gain_scale)
    return _clip(omega, params.omega_max)


def policy_obstacle_avoidance(s: RobotState, env: SensedEnvironment,
                              params: PolicyParams = DEFAULT_PARAMS) -> Behavior:
    """
    Potential-field obstacle avoidance.

    Attraction toward the goal plus a 1/d^2 repulsive turn from every obstacle
    ahead. Linear velocity falls linearly from v_cruise at slowdown_distance to
    zero at contact_distance from the nearest hard obstacle ahead.
    """
    nearest = _nearest_ahead(env.obstacles)
    v = params.v_cruise
    if nearest is not None:
        span = params.slowdown_distance - params.contact_distance
        v *= min(max((nearest - params.contact_distance) / span, 0.0), 1.0)
    return Behavior(v, _avoidance_turn(env, params))


def policy_min_steering(s: RobotState, env: SensedEnvironment,
                        params: PolicyParams = DEFAULT_PARAMS) -> Behavior:
    """
    Fixed 0.75 m/s with smooth, early turns.

    Obstacles start contributing once inside the lookahead distance, with a weight
    that ramps up linearly as they get closer. The turn rate never exceeds omega_cap.
    """
    omega = params.k_goal * env.goal_bearing
    points = [(b, d, 1.0) for b, d in env.obstacles]
    points += [(b, d, params.soft_gain_scale) for b, d in env.soft_obstacles]
    for bearing, distance, scale in points:
        if abs(bearing) >= math.pi / 2 or distance >= params.lookahead:
            continue
        ramp = 1.0 - distance / params.lookahead
        omega += _turn_away_sign(bearing) * params.min_steering_gain * scale * math.cos(bearing) * ramp
    return Behavior(MIN_STEERING_SPEED, _clip(omega, params.omega_cap))


def policy_adaptive(s: RobotState, env: SensedEnvironment,
                    params: PolicyParams = DEFAULT_PARAMS) -> Behavior:
    """Slow down on rugged terrain: v = v_max * (1 - 0.8 * ruggedness); steer like obstacle avoidance."""
    v = params.v_max * (1.0 - 0.8 * env.terrain_ruggedness)
    return Behavior(v, _avoidance_turn(env, params))


BASE_POLICIES: Tuple[Callable[..., Behavior], ...] = (
    policy_max_speed,
    policy_obstacle_avoidance,
    policy_min_steering,
    policy_adaptive,
)


def mixture_weights(rng_seed: int, epoch: int, count: int = len(BASE_POLICIES)) -> np.ndarray:
    """Dirichlet(1, ..., 1) mixture weights for one resampling epoch."""
    rng = np.random.default_rng([int(rng_seed) & 0xFFFFFFFF, max(int(epoch), 0)])
    return rng.dirichlet(np.ones(count))


def mix_behaviors(behaviors: Sequence[Behavior], weights: Sequence[float]) -> Behavior:
    """Convex combination of behaviors."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(behaviors),) or np.any(w < 0) or not math.isclose(w.sum(), 1.0, abs_tol=1e-9):
        raise InvalidArgumentError(f"Mixture weights must be a point of the simplex (got {list(w)})")
    stacked = np.array([b.as_array() for b in behaviors])
    v, omega = w @ stacked
    return Behavior(float(v), float(omega))


def policy_no_bias(s: RobotState, env: SensedEnvironment, rng_seed: int,
                   time: float = 0.0, params: PolicyParams = DEFAULT_PARAMS,
                   weights: Optional[Sequence[float]] = None) -> Behavior:
    """
    Seeded random convex mixture of the four base policies.

    The weights are redrawn every `mixture_period` simulated seconds and are fully
    determined by (rng_seed, epoch), so repeated calls give identical output.

    Args:
        s (RobotState): Current robot state
        env (SensedEnvironment): Ground-truth sensing
        rng_seed (int): Seed of the mixture sequence
        time (float): Simulated time in seconds (selects the epoch)
        params (PolicyParams): Gains and limits
        weights (sequence, optional): Explicit simplex weights, bypassing the draw
    """
    if weights is None:
        weights = mixture_weights(rng_seed, int(math.floor(time / params.mixture_period)))
    outputs = [policy(s, env, params) for policy in BASE_POLICIES]
    return mix_behaviors(outputs, weights)


class PolicyLibrary:
    """
    Ordered set of N >= 2 policies sharing one parameter set.

    Example:
        >>> library = PolicyLibrary(['max_speed', 'obstacle_avoidance'])
        >>> library.act(0, state, env)
    """

    def __init__(self, names: Optional[Sequence[str]] = None,
                 params: PolicyParams = DEFAULT_PARAMS, seed: int = 0):
        names = list(names) if names is not None else list(POLICY_NAMES)
        if len(names) < 2:
            raise ConfigError(f"A policy library needs at least 2 policies (got {len(names)})")
        if len(set(names)) != len(names):
            raise ConfigError(f"Duplicate policy names in {names}")
        self.ids: List[PolicyId] = [PolicyId(i, name) for i, name in enumerate(names)]
        self.params = params
        self.seed = seed

    @property
    def names(self) -> List[str]:
        return [pid.name for pid in self.ids]

    def __len__(self) -> int:
        return len(self.ids)

    def index_of(self, name: str) -> int:
        for pid in self.ids:
            if pid.name == name:
                return pid.index
        raise IndexError(f"Policy '{name}' is not in the library {self.names}")

    def act(self, index: int, s: RobotState, env: SensedEnvironment, time: float = 0.0) -> Behavior:
        if index < 0 or index >= len(self.ids):
            raise IndexError(f"Policy index {index} out of range (library has {len(self.ids)} policies)")
        return run_policy(self.ids[index].name, s, env, self.params, time=time, seed=self.seed)


def run_policy(name: str, s: RobotState, env: SensedEnvironment,
               params: PolicyParams = DEFAULT_PARAMS, time: float = 0.0, seed: int = 0) -> Behavior:
    """Dispatch a policy by name."""
    if name == 'max_speed':
        return policy_max_speed(s, env, params)
    if name == 'obstacle_avoidance':
        return policy_obstacle_avoidance(s, env, params)
    if name == 'min_steering':
        return policy_min_steering(s, env, params)
    if name == 'adaptive':
        return policy_adaptive(s, env, params)
    if name == 'no_bias':
        return policy_no_bias(s, env, seed, time=time, params=params)
    raise InvalidArgumentError(f"Unknown policy name '{name}'")


def ruggedness_of(terrain: str, params: PolicyParams = DEFAULT_PARAMS) -> float:
    if terrain not in params.ruggedness:
        raise InvalidArgumentError(f"No ruggedness entry for terrain '{terrain}'")
    return params.ruggedness[terrain]
