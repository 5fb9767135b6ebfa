"""
Shared domain types and small geometric primitives.

All types are immutable value objects; the functions here are pure.
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Tuple

import numpy as np

from .exceptions import InvalidArgumentError

TWO_PI = 2.0 * math.pi

TERRAIN_CLASSES: Tuple[str, ...] = (
    'concrete',
    'short_grass',
    'gravel',
    'medium_rocks',
    'large_rocks',
    'tall_grass',
    'forest',
)

DEFAULT_OBSERVATION_DIM = 8


def _require_finite(name: str, *values: float) -> None:
    for value in values:
        if not math.isfinite(value):
            raise InvalidArgumentError(f"{name} must be finite (got {value})")


def normalize_angle(theta: float) -> float:
    """
    Wrap an angle into (-pi, pi].

    Args:
        theta (float): Angle in radians

    Returns:
        float: Equivalent angle in (-pi, pi]

    Raises:
        InvalidArgumentError: If theta is NaN or infinite

    Example:
        >>> normalize_angle(3 * math.pi)
        3.141592653589793
    """
    if not math.isfinite(theta):
        raise InvalidArgumentError(f"Angle must be finite (got {theta})")
    wrapped = math.remainder(theta, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


@dataclass(frozen=True)
class RobotState:
    """Planar pose: position in meters, heading in radians (normalized on creation)."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        _require_finite('RobotState coordinates', self.x, self.y)
        object.__setattr__(self, 'heading', normalize_angle(self.heading))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading])


@dataclass(frozen=True)
class Behavior:
    """
    Navigational behavior: linear velocity (m/s) and angular velocity (rad/s).

    Only finiteness is enforced here. Actuator limits depend on the robot
    configuration, so they are applied with clamped() when a behavior is executed.
    """

    linear_velocity: float
    angular_velocity: float

    def __post_init__(self):
        _require_finite('Behavior', self.linear_velocity, self.angular_velocity)

    def clamped(self, v_max: float, omega_max: float) -> 'Behavior':
        return Behavior(
            min(max(self.linear_velocity, 0.0), v_max),
            min(max(self.angular_velocity, -omega_max), omega_max),
        )

    def within_limits(self, v_max: float, omega_max: float, tol: float = 1e-12) -> bool:
        return (
            -tol <= self.linear_velocity <= v_max + tol
            and abs(self.angular_velocity) <= omega_max + tol
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.linear_velocity, self.angular_velocity])


@dataclass(frozen=True)
class Goal:
    """Relative goal displacement (meters) from the state at planning time."""

    dx: float
    dy: float

    def __post_init__(self):
        _require_finite('Goal', self.dx, self.dy)

    def norm(self) -> float:
        return math.hypot(self.dx, self.dy)

    def bearing(self) -> float:
        return math.atan2(self.dy, self.dx)

    def rotated(self, angle: float) -> 'Goal':
        """Rotate the displacement by -angle, i.e. express it in a frame with heading `angle`."""
        c, s = math.cos(angle), math.sin(angle)
        return Goal(c * self.dx + s * self.dy, -s * self.dx + c * self.dy)

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy])


@dataclass(frozen=True, eq=False)
class ObservationVector:
    """
    q-dimensional terrain descriptor.

    Entry 0 is a constant bias of 1.0, the remaining entries lie in [0, 1].
    """

    features: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.features, dtype=float).reshape(-1)
        if arr.size < 1:
            raise InvalidArgumentError("ObservationVector needs at least the bias feature")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("ObservationVector features must be finite")
        if arr[0] != 1.0:
            raise InvalidArgumentError(f"Bias feature must be 1.0 (got {arr[0]})")
        if np.any(arr[1:] < 0.0) or np.any(arr[1:] > 1.0):
            raise InvalidArgumentError("Observation features 1..q-1 must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, 'features', arr)

    @property
    def q(self) -> int:
        return int(self.features.size)

    @classmethod
    def from_terrain(cls, values: Iterable[float]) -> 'ObservationVector':
        """Build an observation by prepending the bias to terrain features."""
        return cls(np.concatenate(([1.0], np.asarray(list(values), dtype=float))))

    def __eq__(self, other) -> bool:
        return isinstance(other, ObservationVector) and np.array_equal(self.features, other.features)

    def __hash__(self) -> int:
        return hash(self.features.tobytes())


@dataclass(frozen=True)
class Trajectory:
    """T behaviors and the T+1 states they connect."""

    states: Tuple[RobotState, ...]
    behaviors: Tuple[Behavior, ...]

    def __post_init__(self):
        object.__setattr__(self, 'states', tuple(self.states))
        object.__setattr__(self, 'behaviors', tuple(self.behaviors))
        if len(self.states) != len(self.behaviors) + 1:
            raise InvalidArgumentError(
                f"Trajectory needs len(states) == len(behaviors) + 1 "
                f"(got {len(self.states)} states, {len(self.behaviors)} behaviors)"
            )

    @property
    def horizon(self) -> int:
        return len(self.behaviors)

    def behavior_array(self) -> np.ndarray:
        return np.array([b.as_array() for b in self.behaviors]).reshape(-1, 2)

    def state_array(self) -> np.ndarray:
        return np.array([s.as_array() for s in self.states]).reshape(-1, 3)


def relative_displacement(origin: RobotState, target: RobotState) -> Goal:
    """
    World-frame displacement from one state to another.

    Args:
        origin (RobotState): State the displacement starts at
        target (RobotState): State the displacement ends at

    Returns:
        Goal: (target.x - origin.x, target.y - origin.y)
    """
    return Goal(target.x - origin.x, target.y - origin.y)


def behaviors_from_array(values: np.ndarray) -> Tuple[Behavior, ...]:
    return tuple(Behavior(float(v), float(w)) for v, w in np.asarray(values).reshape(-1, 2))


def states_from_array(values: np.ndarray) -> Tuple[RobotState, ...]:
    return tuple(RobotState(float(x), float(y), float(h)) for x, y, h in np.asarray(values).reshape(-1, 3))


def as_observation_matrix(observations, n_policies: int) -> np.ndarray:
    """
    Stack per-policy observations into an (N, q) array.

    A single ObservationVector (or 1-D array) is shared by all N policies.
    """
    if isinstance(observations, ObservationVector):
        return np.tile(observations.features, (n_policies, 1))
    if isinstance(observations, np.ndarray) and observations.ndim == 1:
        return np.tile(observations.astype(float), (n_policies, 1))
    if isinstance(observations, np.ndarray):
        matrix = observations.astype(float)
    else:
        rows: Sequence = list(observations)
        matrix = np.array([o.features if isinstance(o, ObservationVector) else o for o in rows], dtype=float)
    if matrix.shape[0] != n_policies:
        raise InvalidArgumentError(
            f"Expected {n_policies} observations, got {matrix.shape[0]}"
        )
    return matrix
