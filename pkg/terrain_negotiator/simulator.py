"""
Deterministic 2D terrain simulator.

Unicycle kinematics over a grid of terrain classes with disc obstacles, some of
them hidden in tall grass until the robot comes close. Episodes are driven by a
controller callable and produce a RunTrace plus the four evaluation metrics
(failure, traversal time, distance traveled, adaptation time).
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .core import (
    TERRAIN_CLASSES,
    Behavior,
    Goal,
    ObservationVector,
    RobotState,
    normalize_angle,
    relative_displacement,
)
from .exceptions import ConfigError, InvalidArgumentError
from .policies import DEFAULT_RUGGEDNESS, SensedEnvironment

logger = logging.getLogger(__name__)

# traction multiplier, slip noise bound (fraction of v)
TERRAIN_TRACTION: Dict[str, Tuple[float, float]] = {
    'concrete': (1.0, 0.0),
    'short_grass': (0.95, 0.0),
    'gravel': (0.9, 0.02),
    'medium_rocks': (0.9, 0.02),
    'large_rocks': (0.6, 0.05),
    'tall_grass': (0.8, 0.05),
    'forest': (0.9, 0.02),
}

# q=8 groups the seven classes into five histogram bins
GROUPED_BINS: Tuple[Tuple[str, ...], ...] = (
    ('concrete', 'short_grass'),
    ('gravel',),
    ('medium_rocks', 'large_rocks'),
    ('tall_grass',),
    ('forest',),
)
PER_CLASS_BINS: Tuple[Tuple[str, ...], ...] = tuple((name,) for name in TERRAIN_CLASSES)

CONE_HALF_ANGLE = math.pi / 4
CONE_RADIAL_SAMPLES = 10
CONE_ANGULAR_SAMPLES = 10
ARC_EPSILON = 1e-6

DEFAULT_TRAINING_TERRAINS: Tuple[str, ...] = (
    'concrete', 'short_grass', 'gravel', 'medium_rocks', 'large_rocks', 'forest',
)


@dataclass(frozen=True)
class SimConfig:
    """Physics, timing and failure-detection parameters of an episode."""

    dt: float = 0.1
    v_max: float = 2.0
    omega_max: float = 1.5
    timeout: float = 120.0
    stuck_window: float = 5.0
    stuck_threshold: float = 0.05
    seed: int = 0
    goal_tolerance: float = 0.5
    robot_radius: float = 0.3
    sensing_radius: float = 5.0
    reveal_radius: float = 1.5
    training_terrains: Tuple[str, ...] = DEFAULT_TRAINING_TERRAINS
    adaptation_window: float = 5.0
    euler: bool = False

    def __post_init__(self):
        positive = ('dt', 'v_max', 'omega_max', 'timeout', 'stuck_window', 'stuck_threshold',
                    'goal_tolerance', 'sensing_radius', 'reveal_radius', 'adaptation_window')
        for name in positive:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"SimConfig.{name} must be positive (got {value})")
        if self.robot_radius < 0:
            raise ConfigError(f"SimConfig.robot_radius must be >= 0 (got {self.robot_radius})")
        object.__setattr__(self, 'training_terrains', tuple(self.training_terrains))
        for terrain in self.training_terrains:
            if terrain not in TERRAIN_CLASSES:
                raise ConfigError(f"Unknown training terrain '{terrain}'")

    @property
    def max_ticks(self) -> int:
        return int(round(self.timeout / self.dt))

    def ticks(self, seconds: float) -> int:
        return max(int(round(seconds / self.dt)), 1)


@dataclass(frozen=True)
class Obstacle:
    x: float
    y: float
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)) or not self.radius > 0:
            raise InvalidArgumentError(f"Invalid obstacle ({self.x}, {self.y}, r={self.radius})")

    def clearance(self, x: float, y: float, robot_radius: float = 0.0) -> float:
        return math.hypot(x - self.x, y - self.y) - self.radius - robot_radius


@dataclass(frozen=True, eq=False)
class WorldModel:
    """
    Terrain grid with obstacles, a start pose and a goal.

    `grid[row, col]` holds an index into TERRAIN_CLASSES; cell (col, row) covers
    [col*cell_size, (col+1)*cell_size) x [row*cell_size, (row+1)*cell_size).
    `goal` is the displacement from the start position to the goal position.
    """

    grid: np.ndarray = field(repr=False)
    hard_obstacles: Tuple[Obstacle, ...]
    occluded_obstacles: Tuple[Obstacle, ...]
    start: RobotState
    goal: Goal
    cell_size: float = 0.5
    name: str = 'world'

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.int8)
        if grid.ndim != 2 or grid.size == 0:
            raise ConfigError("World grid must be a non-empty 2-D array")
        if grid.min() < 0 or grid.max() >= len(TERRAIN_CLASSES):
            raise ConfigError("World grid contains unknown terrain indices")
        grid.setflags(write=False)
        object.__setattr__(self, 'grid', grid)
        object.__setattr__(self, 'hard_obstacles', tuple(self.hard_obstacles))
        object.__setattr__(self, 'occluded_obstacles', tuple(self.occluded_obstacles))
        if not self.cell_size > 0:
            raise ConfigError(f"cell_size must be positive (got {self.cell_size})")
        if not self.in_bounds(self.start.x, self.start.y):
            raise ConfigError(f"Start ({self.start.x}, {self.start.y}) lies outside the world")
        gx, gy = self.goal_position
        if not self.in_bounds(gx, gy):
            raise ConfigError(f"Goal ({gx}, {gy}) lies outside the world")
        for obstacle in self.hard_obstacles:
            if obstacle.clearance(gx, gy) < 0:
                raise ConfigError(f"Goal ({gx}, {gy}) lies inside obstacle {obstacle}")
        for obstacle in self.occluded_obstacles:
            if self.terrain_at(obstacle.x, obstacle.y) != 'tall_grass':
                raise ConfigError(f"Occluded obstacle {obstacle} is not inside tall grass")

    @property
    def width(self) -> float:
        return self.grid.shape[1] * self.cell_size

    @property
    def height(self) -> float:
        return self.grid.shape[0] * self.cell_size

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    @property
    def goal_position(self) -> Tuple[float, float]:
        return (self.start.x + self.goal.dx, self.start.y + self.goal.dy)

    def in_bounds(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    def terrain_at(self, x: float, y: float) -> Optional[str]:
        """Terrain class under a point, or None outside the grid."""
        index = int(self.terrain_indices(np.array([x]), np.array([y]))[0])
        return TERRAIN_CLASSES[index] if index >= 0 else None

    def terrain_indices(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized terrain lookup; -1 marks points outside the grid."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        inside = (xs >= 0.0) & (xs <= self.width) & (ys >= 0.0) & (ys <= self.height)
        cols = np.clip(np.floor(np.where(inside, xs, 0.0) / self.cell_size).astype(int), 0, self.grid.shape[1] - 1)
        rows = np.clip(np.floor(np.where(inside, ys, 0.0) / self.cell_size).astype(int), 0, self.grid.shape[0] - 1)
        return np.where(inside, self.grid[rows, cols], -1)

    def visible_obstacles(self, revealed: Iterable[int] = ()) -> List[Obstacle]:
        revealed = set(revealed)
        return list(self.hard_obstacles) + [
            obstacle for i, obstacle in enumerate(self.occluded_obstacles) if i in revealed
        ]

    @classmethod
    def from_spec(cls, width: float, height: float, start: RobotState, goal_position: Sequence[float],
                  cell_size: float = 0.5, default_terrain: str = 'concrete',
                  patches: Sequence[dict] = (), hard_obstacles: Sequence[Obstacle] = (),
                  occluded_obstacles: Sequence[Obstacle] = (), name: str = 'world') -> 'WorldModel':
        """
        Build a world from a default terrain plus rectangular patches.

        Args:
            width (float): World width in meters
            height (float): World height in meters
            start (RobotState): Start pose
            goal_position (sequence): Goal (x, y) in world coordinates
            cell_size (float): Grid resolution in meters
            default_terrain (str): Terrain of cells not covered by a patch
            patches (list): Dicts with 'terrain' and 'x0', 'y0', 'x1', 'y1' (meters); later patches win
            hard_obstacles (list): Visible disc obstacles
            occluded_obstacles (list): Discs hidden in tall grass
            name (str): Scenario name
        """
        cols = int(math.ceil(width / cell_size))
        rows = int(math.ceil(height / cell_size))
        grid = np.full((rows, cols), _terrain_index(default_terrain), dtype=np.int8)
        centers_x = (np.arange(cols) + 0.5) * cell_size
        centers_y = (np.arange(rows) + 0.5) * cell_size
        for patch in patches:
            index = _terrain_index(patch['terrain'])
            cols_in = (centers_x >= patch['x0']) & (centers_x < patch['x1'])
            rows_in = (centers_y >= patch['y0']) & (centers_y < patch['y1'])
            grid[np.ix_(rows_in, cols_in)] = index
        goal = relative_displacement(start, RobotState(float(goal_position[0]), float(goal_position[1])))
        return cls(grid, tuple(hard_obstacles), tuple(occluded_obstacles), start, goal, cell_size, name)


def _terrain_index(name: str) -> int:
    if name not in TERRAIN_CLASSES:
        raise ConfigError(f"Unknown terrain class '{name}' (expected one of {', '.join(TERRAIN_CLASSES)})")
    return TERRAIN_CLASSES.index(name)


def step_kinematics(s: RobotState, a: Behavior, dt: float, euler: bool = False) -> RobotState:
    """
    Integrate unicycle kinematics over one step.

    Uses the exact arc when |omega| > 1e-6 and the straight-line update otherwise
    (or always, when euler=True).

    Example:
        >>> step_kinematics(RobotState(0, 0, 0), Behavior(1, 1), math.pi)
        RobotState(x=~0, y=2.0, heading=3.14159...)
    """
    v, omega = a.linear_velocity, a.angular_velocity
    theta = s.heading
    if euler or abs(omega) <= ARC_EPSILON:
        x = s.x + v * math.cos(theta) * dt
        y = s.y + v * math.sin(theta) * dt
    else:
        radius = v / omega
        x = s.x + radius * (math.sin(theta + omega * dt) - math.sin(theta))
        y = s.y - radius * (math.cos(theta + omega * dt) - math.cos(theta))
    return RobotState(x, y, normalize_angle(theta + omega * dt))


def integrate_behaviors(behaviors: np.ndarray, dt: float, start: Optional[RobotState] = None,
                        euler: bool = False) -> np.ndarray:
    """
    Vectorized rollout of step_kinematics.

    Args:
        behaviors (np.ndarray): (..., T, 2) linear/angular velocities
        dt (float): Step length in seconds
        start (RobotState, optional): Start pose shared by every batch entry (origin by default)

    Returns:
        np.ndarray: (..., T+1, 3) poses, the first one being the start pose
    """
    behaviors = np.asarray(behaviors, dtype=float)
    batch_shape = behaviors.shape[:-2]
    horizon = behaviors.shape[-2]
    states = np.zeros(batch_shape + (horizon + 1, 3))
    if start is not None:
        states[..., 0, :] = (start.x, start.y, start.heading)
    for k in range(horizon):
        x, y, theta = states[..., k, 0], states[..., k, 1], states[..., k, 2]
        v, omega = behaviors[..., k, 0], behaviors[..., k, 1]
        arc = (np.abs(omega) > ARC_EPSILON) & (not euler)
        safe_omega = np.where(arc, omega, 1.0)
        radius = v / safe_omega
        new_theta = theta + omega * dt
        x_arc = x + radius * (np.sin(new_theta) - np.sin(theta))
        y_arc = y - radius * (np.cos(new_theta) - np.cos(theta))
        x_line = x + v * np.cos(theta) * dt
        y_line = y + v * np.sin(theta) * dt
        states[..., k + 1, 0] = np.where(arc, x_arc, x_line)
        states[..., k + 1, 1] = np.where(arc, y_arc, y_line)
        # same wrapping as normalize_angle, elementwise
        wrapped = np.remainder(new_theta + math.pi, 2 * math.pi) - math.pi
        states[..., k + 1, 2] = np.where(wrapped <= -math.pi, wrapped + 2 * math.pi, wrapped)
    return states


def _in_contact(s: RobotState, obstacles: Iterable[Obstacle], robot_radius: float) -> bool:
    for obstacle in obstacles:
        if obstacle.clearance(s.x, s.y, robot_radius) > 1e-9:
            continue
        bearing = normalize_angle(math.atan2(obstacle.y - s.y, obstacle.x - s.x) - s.heading)
        if abs(bearing) < math.pi / 2:
            return True
    return False


def apply_terrain_effects(s: RobotState, a: Behavior, world: WorldModel, rng: np.random.Generator,
                          config: Optional[SimConfig] = None,
                          revealed: Iterable[int] = ()) -> Behavior:
    """
    Turn a commanded behavior into the behavior the terrain lets the robot realize.

    Forward velocity is scaled by the traction of the cell under the robot with
    bounded, seeded slip noise. Touching a hard (or revealed occluded) obstacle
    while facing it blocks forward motion; rotation is unaffected.
    """
    config = config or SimConfig()
    if _in_contact(s, world.visible_obstacles(revealed), config.robot_radius):
        return Behavior(0.0, a.angular_velocity)
    terrain = world.terrain_at(s.x, s.y) or 'concrete'
    traction, slip = TERRAIN_TRACTION[terrain]
    v = a.linear_velocity * traction
    if slip > 0.0:
        v += a.linear_velocity * rng.uniform(-slip, slip)
    return Behavior(max(v, 0.0), a.angular_velocity)


def observation_bins(q: int) -> Tuple[Tuple[str, ...], ...]:
    """Histogram layout for an observation of dimension q (bias + bins + proximity + goal distance)."""
    if q == 3 + len(GROUPED_BINS):
        return GROUPED_BINS
    if q == 3 + len(PER_CLASS_BINS):
        return PER_CLASS_BINS
    raise InvalidArgumentError(
        f"Unsupported observation dimension q={q} "
        f"(supported: {3 + len(GROUPED_BINS)}, {3 + len(PER_CLASS_BINS)})"
    )


def _cone_samples(radius: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Polar sample points of the forward cone: (ranges, bearings, area weights)."""
    ranges = (np.arange(CONE_RADIAL_SAMPLES) + 0.5) * radius / CONE_RADIAL_SAMPLES
    bearings = -CONE_HALF_ANGLE + (np.arange(CONE_ANGULAR_SAMPLES) + 0.5) * (
        2 * CONE_HALF_ANGLE / CONE_ANGULAR_SAMPLES)
    rr, bb = np.meshgrid(ranges, bearings, indexing='ij')
    return rr, bb, rr.copy()


def _cone_terrain(s: RobotState, world: WorldModel, radius: float):
    rr, bb, weights = _cone_samples(radius)
    xs = s.x + rr * np.cos(s.heading + bb)
    ys = s.y + rr * np.sin(s.heading + bb)
    return rr, bb, weights, world.terrain_indices(xs, ys)


def synthesize_observation(s: RobotState, world: WorldModel, q: int = 8,
                           revealed: Iterable[int] = (),
                           config: Optional[SimConfig] = None) -> ObservationVector:
    """
    Synthesize the q-dimensional terrain observation seen from a pose.

    Layout: [1.0, terrain histogram over the forward 90 degree cone, proximity of
    the nearest visible obstacle, goal distance / world diagonal]. Occluded
    obstacles only count once revealed.

    Raises:
        InvalidArgumentError: If the robot is outside the world or q is unsupported
    """
    config = config or SimConfig()
    if not world.in_bounds(s.x, s.y):
        raise InvalidArgumentError(f"Robot at ({s.x:.2f}, {s.y:.2f}) is outside the world")
    bins = observation_bins(q)
    _, _, weights, terrain = _cone_terrain(s, world, config.sensing_radius)
    histogram = np.zeros(len(bins))
    for b, members in enumerate(bins):
        member_indices = [TERRAIN_CLASSES.index(name) for name in members]
        histogram[b] = weights[np.isin(terrain, member_indices)].sum()
    total = weights[terrain >= 0].sum()
    if total > 0:
        histogram /= total

    proximity = 0.0
    for obstacle in world.visible_obstacles(revealed):
        gap = max(obstacle.clearance(s.x, s.y, config.robot_radius), 0.0)
        if gap < config.sensing_radius:
            proximity = max(proximity, 1.0 - gap / config.sensing_radius)

    gx, gy = world.goal_position
    goal_distance = min(math.hypot(gx - s.x, gy - s.y) / world.diagonal, 1.0)
    return ObservationVector.from_terrain(np.concatenate((histogram, [proximity, goal_distance])))


def sense_environment(s: RobotState, world: WorldModel, revealed: Iterable[int] = (),
                      config: Optional[SimConfig] = None,
                      ruggedness: Optional[Dict[str, float]] = None) -> SensedEnvironment:
    """Ground-truth sensing for the policies: goal, visible obstacles, ruggedness, tall-grass edges."""
    config = config or SimConfig()
    ruggedness = ruggedness or DEFAULT_RUGGEDNESS
    gx, gy = world.goal_position
    goal_bearing = normalize_angle(math.atan2(gy - s.y, gx - s.x) - s.heading)
    goal_distance = math.hypot(gx - s.x, gy - s.y)

    obstacles = []
    for obstacle in world.visible_obstacles(revealed):
        gap = max(obstacle.clearance(s.x, s.y, config.robot_radius), 0.0)
        if gap <= config.sensing_radius:
            bearing = normalize_angle(math.atan2(obstacle.y - s.y, obstacle.x - s.x) - s.heading)
            obstacles.append((bearing, gap))

    here = world.terrain_at(s.x, s.y) or 'concrete'
    soft = []
    if here != 'tall_grass':
        rr, bb, _, terrain = _cone_terrain(s, world, config.sensing_radius)
        grass = terrain == TERRAIN_CLASSES.index('tall_grass')
        for k in range(rr.shape[1]):
            if grass[:, k].any():
                soft.append((float(bb[0, k]), float(rr[grass[:, k], k].min())))

    return SensedEnvironment(
        goal_bearing=goal_bearing,
        goal_distance=goal_distance,
        obstacles=tuple(obstacles),
        terrain_ruggedness=float(ruggedness.get(here, 0.0)),
        soft_obstacles=tuple(soft),
    )


@dataclass(frozen=True)
class Perception:
    """Everything a controller sees at one tick."""

    observation: ObservationVector
    environment: SensedEnvironment
    time: float
    tick: int
    terrain: Optional[str] = None


@dataclass(frozen=True)
class Telemetry:
    """Negotiation state a controller reports for the trace."""

    weights: Tuple[float, ...] = ()
    regrets: Tuple[float, ...] = ()
    objective: float = float('nan')


@dataclass(frozen=True)
class TraceRow:
    tick: int
    time: float
    x: float
    y: float
    heading: float
    v: float
    omega: float
    v_effective: float
    terrain: str
    weights: Tuple[float, ...] = ()
    regrets: Tuple[float, ...] = ()
    objective: float = float('nan')


@dataclass
class RunTrace:
    """Time-stamped log of an episode. Poses are the poses reached after each tick."""

    policy_names: Tuple[str, ...]
    start: RobotState
    rows: List[TraceRow] = field(default_factory=list)
    scenario: str = ''
    seed: int = 0

    def positions(self) -> np.ndarray:
        points = [(self.start.x, self.start.y)] + [(r.x, r.y) for r in self.rows]
        return np.array(points, dtype=float)


@dataclass(frozen=True)
class MetricsReport:
    failure: bool
    cause: Optional[str]
    traversal_time: float
    distance_traveled: float
    adaptation_time: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            'failure': self.failure,
            'cause': self.cause,
            'traversal_time': self.traversal_time,
            'distance_traveled': self.distance_traveled,
            'adaptation_time': self.adaptation_time,
        }


def _reveal(s: RobotState, world: WorldModel, revealed: Set[int], radius: float) -> None:
    for i, obstacle in enumerate(world.occluded_obstacles):
        if i not in revealed and obstacle.clearance(s.x, s.y) <= radius:
            revealed.add(i)
            logger.debug(f"Revealed occluded obstacle {i} at ({obstacle.x:.1f}, {obstacle.y:.1f})")


def _adaptation_time(terrains: Sequence[Optional[str]], speeds: Sequence[float],
                     config: SimConfig) -> Optional[float]:
    entry = next((k for k, t in enumerate(terrains)
                  if t is not None and t not in config.training_terrains), None)
    if entry is None:
        return None
    window = speeds[max(0, entry - config.ticks(config.adaptation_window)):entry]
    v_ref = float(np.mean(window)) if len(window) else 0.0
    for k in range(entry, len(speeds)):
        if speeds[k] >= 0.5 * v_ref:
            return (k - entry) * config.dt
    return None


def run_episode(world: WorldModel, config: SimConfig, controller: Callable,
                policy_names: Sequence[str] = (), q: int = 8,
                ruggedness: Optional[Dict[str, float]] = None) -> Tuple[RunTrace, MetricsReport]:
    """
    Run one navigation episode.

    Every tick the robot observes, the controller chooses a behavior, actuator
    limits and terrain effects are applied and the unicycle model is integrated.
    The episode ends when the goal is within goal_tolerance (success), when the
    robot moved less than stuck_threshold over stuck_window (failure 'stuck'),
    when timeout elapses (failure 'timeout') or when the controller raises
    (failure 'controller_error: ...').

    Args:
        world (WorldModel): Scenario
        config (SimConfig): Physics and failure parameters; config.seed seeds terrain noise
        controller (callable): controller(perception, state, goal) -> Behavior, with goal the
            world-frame displacement to the goal. An optional telemetry() method is recorded.
        policy_names (sequence): Names labelling the per-policy trace columns
        q (int): Observation dimension

    Returns:
        tuple: (RunTrace, MetricsReport)
    """
    rng = np.random.default_rng(config.seed)
    gx, gy = world.goal_position
    goal_state = RobotState(gx, gy)
    state = world.start
    revealed: Set[int] = set()
    trace = RunTrace(tuple(policy_names), world.start, scenario=world.name, seed=config.seed)
    positions = [(state.x, state.y)]
    terrains: List[Optional[str]] = []
    speeds: List[float] = []
    distance = 0.0
    telemetry_fn = getattr(controller, 'telemetry', None)
    stuck_ticks = config.ticks(config.stuck_window)
    cause: Optional[str] = 'timeout'
    ticks_run = 0

    for tick in range(config.max_ticks):
        if math.hypot(gx - state.x, gy - state.y) <= config.goal_tolerance:
            cause = None
            break
        _reveal(state, world, revealed, config.reveal_radius)
        terrain = world.terrain_at(state.x, state.y)
        perception = Perception(
            observation=synthesize_observation(state, world, q, revealed, config),
            environment=sense_environment(state, world, revealed, config, ruggedness),
            time=tick * config.dt,
            tick=tick,
            terrain=terrain,
        )
        try:
            command = controller(perception, state, relative_displacement(state, goal_state))
        except Exception as e:
            logger.warning(f"Controller raised at tick {tick}: {e}")
            cause = f"controller_error: {e}"
            break
        command = command.clamped(config.v_max, config.omega_max)
        effective = apply_terrain_effects(state, command, world, rng, config, revealed)
        new_state = step_kinematics(state, effective, config.dt, config.euler)
        if not world.in_bounds(new_state.x, new_state.y):
            new_state = RobotState(
                min(max(new_state.x, 0.0), world.width),
                min(max(new_state.y, 0.0), world.height),
                new_state.heading,
            )
        step = math.hypot(new_state.x - state.x, new_state.y - state.y)
        distance += step
        ticks_run = tick + 1

        telemetry = telemetry_fn() if callable(telemetry_fn) else Telemetry()
        trace.rows.append(TraceRow(
            tick=tick,
            time=ticks_run * config.dt,
            x=new_state.x,
            y=new_state.y,
            heading=new_state.heading,
            v=command.linear_velocity,
            omega=command.angular_velocity,
            v_effective=step / config.dt,
            terrain=terrain or '',
            weights=tuple(telemetry.weights),
            regrets=tuple(telemetry.regrets),
            objective=telemetry.objective,
        ))
        terrains.append(terrain)
        speeds.append(step / config.dt)
        positions.append((new_state.x, new_state.y))
        state = new_state

        if ticks_run >= stuck_ticks:
            px, py = positions[-1 - stuck_ticks]
            if math.hypot(state.x - px, state.y - py) < config.stuck_threshold:
                cause = 'stuck'
                break
    else:
        if math.hypot(gx - state.x, gy - state.y) <= config.goal_tolerance:
            cause = None

    metrics = MetricsReport(
        failure=cause is not None,
        cause=cause,
        traversal_time=ticks_run * config.dt,
        distance_traveled=distance,
        adaptation_time=_adaptation_time(terrains, speeds, config),
    )
    return trace, metrics


def _run_trial(args) -> Tuple[RunTrace, MetricsReport]:
    world, config, controller_factory, policy_names, q, ruggedness, trial_seed = args
    controller = controller_factory(trial_seed)
    return run_episode(world, replace(config, seed=trial_seed), controller, policy_names, q, ruggedness)


def run_trials(world: WorldModel, config: SimConfig, controller_factory: Callable[[int], Callable],
               trials: int, seed: int = 0, policy_names: Sequence[str] = (), q: int = 8,
               ruggedness: Optional[Dict[str, float]] = None,
               workers: int = 1) -> List[Tuple[RunTrace, MetricsReport]]:
    """
    Run a seeded batch of episodes.

    Trial k uses seed `seed + k` both for the simulator and for the controller
    built by `controller_factory(seed + k)`, so results do not depend on `workers`.
    With workers > 1 the factory must be picklable (e.g. a functools.partial of a
    module-level function).
    """
    if trials < 1:
        raise InvalidArgumentError(f"trials must be >= 1 (got {trials})")
    jobs = [(world, config, controller_factory, tuple(policy_names), q, ruggedness, seed + k)
            for k in range(trials)]
    if workers <= 1:
        return [_run_trial(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_trial, jobs))
