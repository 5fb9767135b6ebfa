"""
YAML scenario files and experiment configs.

A scenario describes the world (terrain patches, obstacles, start/goal), the
simulator physics and the policy library. An experiment config names a scenario
and carries the hyperparameters of data generation, training and evaluation.
"""

import logging
import math
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .core import TERRAIN_CLASSES, RobotState
from .exceptions import ConfigError
from .negotiation import NegotiationConfig
from .policies import POLICY_NAMES, PolicyParams
from .predictor import UPDATE_RULES, TrainingConfig
from .simulator import Obstacle, SimConfig, WorldModel, observation_bins

logger = logging.getLogger(__name__)

SCENARIO_SECTIONS = ('world', 'sim', 'policies')
MODES = ('nauts', 'single_policy', 'uniform_blend')


@dataclass(frozen=True)
class Scenario:
    name: str
    world: WorldModel
    sim: SimConfig
    policy_params: PolicyParams
    policy_names: Tuple[str, ...]
    observation_dim: int = 8
    path: Optional[str] = None


def _load_yaml(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file not found: {path}")
    with open(path, 'r') as f:
        try:
            config = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ConfigError(f"Could not parse YAML: {e}", path) from None
    if config is None:
        config = {}
    if not isinstance(config, dict):
        raise ConfigError("Top level must be a mapping", path)
    return config


def _number(value, name: str, path: Optional[str], positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{name} must be a number (found: {value!r})", path)
    if positive and value <= 0:
        raise ConfigError(f"{name} must be positive (found: {value})", path)
    return float(value)


def _obstacles(entries, name: str, path: Optional[str]) -> List[Obstacle]:
    if entries is None:
        return []
    if not isinstance(entries, list):
        raise ConfigError(f"{name} must be a list", path)
    result = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or not {'x', 'y', 'radius'} <= set(entry):
            raise ConfigError(f"{name}[{i}] needs x, y and radius", path)
        result.append(Obstacle(_number(entry['x'], f"{name}[{i}].x", path),
                               _number(entry['y'], f"{name}[{i}].y", path),
                               _number(entry['radius'], f"{name}[{i}].radius", path, positive=True)))
    return result


def validate_scenario(config: Dict[str, Any], config_path: Optional[str] = None) -> None:
    """
    Check a parsed scenario for required fields and valid values.

    Raises:
        ConfigError: On the first problem found, naming the field and file
    """
    if 'world' not in config:
        raise ConfigError("Required section 'world' missing", config_path)
    for section in SCENARIO_SECTIONS:
        if section in config and not isinstance(config[section], dict):
            raise ConfigError(f"Section '{section}' must be a mapping", config_path)
    world = config['world']
    for key in ('width', 'height', 'start', 'goal'):
        if key not in world:
            raise ConfigError(f"Required field 'world.{key}' missing", config_path)
    _number(world['width'], 'world.width', config_path, positive=True)
    _number(world['height'], 'world.height', config_path, positive=True)
    for key in ('start', 'goal'):
        point = world[key]
        if not isinstance(point, dict) or 'x' not in point or 'y' not in point:
            raise ConfigError(f"world.{key} needs x and y", config_path)
    default = world.get('default_terrain', 'concrete')
    if default not in TERRAIN_CLASSES:
        raise ConfigError(f"Unknown default_terrain '{default}'", config_path)
    patches = world.get('patches', []) or []
    if not isinstance(patches, list):
        raise ConfigError("world.patches must be a list", config_path)
    for i, patch in enumerate(patches):
        if not isinstance(patch, dict) or not {'terrain', 'x0', 'y0', 'x1', 'y1'} <= set(patch):
            raise ConfigError(f"world.patches[{i}] needs terrain, x0, y0, x1, y1", config_path)
        if patch['terrain'] not in TERRAIN_CLASSES:
            raise ConfigError(f"world.patches[{i}] has unknown terrain '{patch['terrain']}'", config_path)

    policies = config.get('policies', {}) or {}
    names = policies.get('names', list(POLICY_NAMES))
    if not isinstance(names, list) or len(names) < 2:
        raise ConfigError("policies.names must list at least 2 policies", config_path)
    for name in names:
        if name not in POLICY_NAMES:
            raise ConfigError(f"Unknown policy '{name}' (expected one of {', '.join(POLICY_NAMES)})", config_path)
    if len(set(names)) != len(names):
        raise ConfigError("policies.names contains duplicates", config_path)

    q = config.get('observation_dim', 8)
    try:
        observation_bins(q)
    except Exception:
        raise ConfigError(f"observation_dim must be 8 or 10 (found: {q!r})", config_path) from None


def scenario_from_dict(config: Dict[str, Any], config_path: Optional[str] = None) -> Scenario:
    """Validate a parsed scenario and build its typed form."""
    validate_scenario(config, config_path)
    world = config['world']
    name = config.get('name') or (os.path.splitext(os.path.basename(config_path))[0] if config_path else 'scenario')
    start = world['start']
    goal = world['goal']
    try:
        model = WorldModel.from_spec(
            width=float(world['width']),
            height=float(world['height']),
            start=RobotState(float(start['x']), float(start['y']), float(start.get('heading', 0.0))),
            goal_position=(float(goal['x']), float(goal['y'])),
            cell_size=float(world.get('cell_size', 0.5)),
            default_terrain=world.get('default_terrain', 'concrete'),
            patches=world.get('patches', []) or [],
            hard_obstacles=_obstacles(world.get('hard_obstacles'), 'world.hard_obstacles', config_path),
            occluded_obstacles=_obstacles(world.get('occluded_obstacles'), 'world.occluded_obstacles', config_path),
            name=name,
        )
        sim_section = dict(config.get('sim', {}) or {})
        if 'training_terrains' in sim_section:
            sim_section['training_terrains'] = tuple(sim_section['training_terrains'])
        known = {f.name for f in fields(SimConfig)}
        unknown = set(sim_section) - known
        if unknown:
            raise ConfigError(f"Unknown sim parameters: {', '.join(sorted(unknown))}", config_path)
        sim = SimConfig(**sim_section)

        policies = dict(config.get('policies', {}) or {})
        names = tuple(policies.pop('names', POLICY_NAMES))
        param_section = dict(policies.get('params', {}) or {})
        if 'ruggedness' in policies:
            param_section['ruggedness'] = {**PolicyParams().ruggedness, **policies['ruggedness']}
        known = {f.name for f in fields(PolicyParams)}
        unknown = set(param_section) - known
        if unknown:
            raise ConfigError(f"Unknown policy parameters: {', '.join(sorted(unknown))}", config_path)
        params = PolicyParams(**param_section)
    except ConfigError as e:
        if e.path is None and config_path:
            raise ConfigError(str(e), config_path) from None
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), config_path) from None
    return Scenario(name, model, sim, params, names, int(config.get('observation_dim', 8)), config_path)


def load_scenario(path: str) -> Scenario:
    """
    Load and validate a scenario file.

    Args:
        path (str): YAML scenario file

    Returns:
        Scenario: World, physics and policy configuration

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If the file is not a valid scenario

    Example:
        >>> scenario = load_scenario('examples_and_configs/configs/tall_grass.yaml')
        >>> scenario.world.width
        40.0
    """
    return scenario_from_dict(_load_yaml(path), path)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a CLI command needs besides the scenario file itself."""

    scenario: Optional[str] = None
    training_scenario: Optional[str] = None
    lambda1: float = 0.1
    lambda2: float = 10.0
    lambda3: float = 1.0
    lambda4: float = 0.1
    horizon: int = 9
    trials: int = 10
    seed: int = 0
    mode: str = 'nauts'
    policy: Optional[str] = None
    out: str = 'output'
    models: Optional[str] = None
    dataset: Optional[str] = None
    episodes: int = 4
    ticks: Optional[int] = None
    budget: int = 200
    workers: int = 1
    negotiation_period: int = 20
    feature_count: int = 64
    step_size: float = 1e-3
    smoothing: float = 1e-2
    zo_samples: int = 8
    init: str = 'posterior'
    update: str = 'sign'
    constraint: str = 'kkt'

    def __post_init__(self):
        for name in ('lambda1', 'lambda3', 'lambda4'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive (found: {getattr(self, name)})")
        if self.lambda2 < 0:
            raise ConfigError(f"lambda2 must be non-negative (found: {self.lambda2})")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1 (found: {self.horizon})")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1 (found: {self.trials})")
        if self.episodes < 0 or self.budget < 0:
            raise ConfigError("episodes and budget must be non-negative")
        if self.ticks is not None and self.ticks < 1:
            raise ConfigError(f"ticks must be >= 1 (found: {self.ticks})")
        if self.init not in ('posterior', 'zeros'):
            raise ConfigError(f"init must be 'posterior' or 'zeros' (found: {self.init})")
        if self.update not in UPDATE_RULES:
            raise ConfigError(f"update must be one of {', '.join(UPDATE_RULES)} (found: {self.update})")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)} (found: {self.mode})")
        if self.mode == 'single_policy' and not self.policy:
            raise ConfigError("single_policy mode needs a policy name")
        if self.policy is not None and self.policy not in POLICY_NAMES:
            raise ConfigError(f"Unknown policy '{self.policy}'")

    @property
    def model_dir(self) -> str:
        return self.models or os.path.join(self.out, 'models')

    @property
    def dataset_path(self) -> str:
        return self.dataset or os.path.join(self.out, 'dataset.npz')

    def training_config(self) -> TrainingConfig:
        return TrainingConfig(lambda1=self.lambda1, lambda2=self.lambda2, horizon=self.horizon,
                              feature_count=self.feature_count, budget=self.budget,
                              step_size=self.step_size, smoothing=self.smoothing,
                              zo_samples=self.zo_samples, init=self.init, update=self.update,
                              seed=self.seed)

    def negotiation_config(self) -> NegotiationConfig:
        return NegotiationConfig(lambda3=self.lambda3, lambda4=self.lambda4,
                                 period=self.negotiation_period, constraint=self.constraint)


def experiment_from_dict(config: Dict[str, Any], config_path: Optional[str] = None,
                         base: ExperimentConfig = ExperimentConfig()) -> ExperimentConfig:
    """
    Overlay a parsed experiment config on `base`.

    Relative scenario/model/dataset/output paths are resolved against the config file's directory.
    """
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(config) - known
    if unknown:
        raise ConfigError(f"Unknown experiment fields: {', '.join(sorted(unknown))}", config_path)
    values = dict(config)
    if config_path:
        root = os.path.dirname(os.path.abspath(config_path))
        for key in ('scenario', 'training_scenario', 'out', 'models', 'dataset'):
            if isinstance(values.get(key), str) and not os.path.isabs(values[key]):
                values[key] = os.path.normpath(os.path.join(root, values[key]))
    try:
        return replace(base, **values)
    except ConfigError as e:
        raise ConfigError(str(e), config_path) from None
    except TypeError as e:
        raise ConfigError(str(e), config_path) from None


def load_experiment(path: str, base: ExperimentConfig = ExperimentConfig()) -> ExperimentConfig:
    """Load an experiment config file; its values override `base` (typically built from CLI flags)."""
    return experiment_from_dict(_load_yaml(path), path, base)
