"""
High-level workflows behind the command-line subcommands.

gen-data rolls every policy out on a scenario and slices the episodes into
T-step training windows; train fits one prediction model per policy; run
executes a seeded trial batch in one controller mode and aggregates metrics;
plot-data turns traces into per-policy importance time series.
"""

import logging
import math
import os
from dataclasses import replace
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .controllers import SinglePolicyController, make_controller
from .core import Goal, RobotState, normalize_angle, relative_displacement
from .exceptions import ConfigError, InvalidArgumentError
from .formats import (
    MetricsSummary,
    load_dataset,
    load_models,
    model_path,
    read_trace,
    save_dataset,
    save_model,
    summarize,
    write_importance,
    write_loss_curve,
    write_metrics,
    write_metrics_table,
    write_trace,
)
from .negotiation import importance
from .policies import PolicyLibrary
from .predictor import SampleBatch, TrainingConfig, TrainingReport, train
from .scenario import ExperimentConfig, Scenario, load_scenario
from .simulator import Perception, run_episode, run_trials

logger = logging.getLogger(__name__)

START_JITTER = 1.0
HEADING_JITTER = 0.3


class RecordingController:
    """Wraps a controller and records what it saw and commanded at every tick."""

    def __init__(self, controller):
        self.controller = controller
        self.observations: List[np.ndarray] = []
        self.states: List[RobotState] = []
        self.commands: List[np.ndarray] = []

    def __call__(self, perception: Perception, state: RobotState, goal: Goal):
        command = self.controller(perception, state, goal)
        self.observations.append(perception.observation.features)
        self.states.append(state)
        self.commands.append(command.as_array())
        return command

    def telemetry(self):
        return self.controller.telemetry()


def _to_frame(origin: RobotState, state: RobotState) -> Tuple[float, float, float]:
    c, s = math.cos(origin.heading), math.sin(origin.heading)
    dx, dy = state.x - origin.x, state.y - origin.y
    return (c * dx + s * dy, -s * dx + c * dy, normalize_angle(state.heading - origin.heading))


def episode_windows(recorder: RecordingController, final_state: RobotState,
                    goal_position: Tuple[float, float], horizon: int) -> SampleBatch:
    """
    Slice one recorded episode into overlapping T-step training samples.

    Every window start t with t + T recorded behaviors yields a sample. States are
    expressed in the robot frame at t. The goal is the navigation-goal direction at
    t scaled to the distance actually covered over the window.
    """
    states = recorder.states + [final_state]
    count = len(recorder.commands) - horizon + 1
    q = recorder.observations[0].size if recorder.observations else 0
    if count <= 0:
        return SampleBatch.empty(q, horizon)
    commands = np.array(recorder.commands)
    observations, goals, behaviors, windows = [], [], [], []
    for t in range(count):
        origin = states[t]
        frame = np.array([_to_frame(origin, s) for s in states[t:t + horizon + 1]])
        covered = float(np.hypot(frame[-1, 0], frame[-1, 1]))
        direction = relative_displacement(origin, RobotState(*goal_position)).rotated(origin.heading)
        norm = direction.norm()
        goal = (0.0, 0.0) if norm == 0.0 else (direction.dx / norm * covered, direction.dy / norm * covered)
        observations.append(recorder.observations[t])
        goals.append(goal)
        behaviors.append(commands[t:t + horizon])
        windows.append(frame)
    return SampleBatch(np.array(observations), np.array(goals), np.array(behaviors), np.array(windows))


def _jittered_world(scenario: Scenario, rng: np.random.Generator):
    world = scenario.world
    start = world.start
    y = min(max(start.y + rng.uniform(-START_JITTER, START_JITTER), 0.0), world.height)
    new_start = RobotState(start.x, y, start.heading + rng.uniform(-HEADING_JITTER, HEADING_JITTER))
    gx, gy = world.goal_position
    return replace(world, start=new_start, goal=relative_displacement(new_start, RobotState(gx, gy)))


def generate_dataset(scenario: Scenario, policy_names: Optional[Sequence[str]] = None,
                     episodes: int = 4, seed: int = 0, ticks: Optional[int] = None,
                     horizon: int = 9) -> Dict[str, SampleBatch]:
    """
    Roll out each policy for `episodes` seeded episodes and collect training windows.

    Stuck detection is disabled during data generation so every episode runs until
    the goal or the tick limit.

    Args:
        scenario (Scenario): Data-generation course
        policy_names (sequence): Policies to demonstrate (default: the scenario's library)
        episodes (int): Episodes per policy
        seed (int): Base seed; episode e of policy i uses seeds derived from (seed, i, e)
        ticks (int): Tick limit per episode (default: the scenario timeout)
        horizon (int): Window length T

    Returns:
        dict: Policy name -> SampleBatch (possibly empty)
    """
    names = list(policy_names or scenario.policy_names)
    sim = scenario.sim
    if ticks is not None:
        sim = replace(sim, timeout=ticks * sim.dt)
    sim = replace(sim, stuck_window=sim.timeout + sim.dt)
    library = PolicyLibrary(scenario.policy_names if set(names) <= set(scenario.policy_names) else names,
                            scenario.policy_params, seed)
    if episodes == 0:
        logger.warning("Zero episodes requested; the dataset will be empty")

    datasets = {}
    for i, name in enumerate(names):
        batches = []
        for e in range(episodes):
            rng = np.random.default_rng([seed, i, e])
            world = _jittered_world(scenario, rng)
            episode_seed = int(rng.integers(0, 2**31 - 1))
            recorder = RecordingController(SinglePolicyController(
                PolicyLibrary(library.names, scenario.policy_params, episode_seed), library.index_of(name)))
            trace, _ = run_episode(world, replace(sim, seed=episode_seed), recorder, library.names,
                                   scenario.observation_dim, scenario.policy_params.ruggedness)
            final = trace.rows[-1] if trace.rows else None
            final_state = RobotState(final.x, final.y, final.heading) if final else world.start
            batches.append(episode_windows(recorder, final_state, world.goal_position, horizon))
        if batches:
            datasets[name] = SampleBatch(
                np.concatenate([b.observations for b in batches]),
                np.concatenate([b.goals for b in batches]),
                np.concatenate([b.behaviors for b in batches]),
                np.concatenate([b.states for b in batches]),
            )
        else:
            datasets[name] = SampleBatch.empty(scenario.observation_dim, horizon)
        logger.info(f"  {name}: {len(datasets[name])} samples")
    return datasets


def cmd_gen_data(config: ExperimentConfig) -> Dict[str, int]:
    """
    Generate and save a dataset; returns sample counts per policy.

    Rolls out on `training_scenario` when set, otherwise on `scenario`.
    """
    path = config.training_scenario or config.scenario
    if not path:
        raise ConfigError("gen-data needs a scenario")
    scenario = load_scenario(path)
    logger.info(f"Generating data for {len(scenario.policy_names)} policies on '{scenario.name}' "
                f"({config.episodes} episodes each)...")
    datasets = generate_dataset(scenario, None, config.episodes, config.seed, config.ticks, config.horizon)
    meta = {'scenario': scenario.name, 'episodes': config.episodes, 'seed': config.seed,
            'horizon': config.horizon, 'q': scenario.observation_dim}
    save_dataset(config.dataset_path, datasets, meta)
    logger.info(f"Dataset written to {config.dataset_path}")
    return {name: len(batch) for name, batch in datasets.items()}


def cmd_train(config: ExperimentConfig) -> Dict[str, TrainingReport]:
    """
    Train one model per policy in the dataset and write models plus loss curves.

    Raises:
        FileNotFoundError: If the dataset does not exist
        TrainingDivergedError: If a training run diverges
    """
    datasets, meta = load_dataset(config.dataset_path)
    if not datasets or all(len(b) == 0 for b in datasets.values()):
        raise InvalidArgumentError(f"Dataset {config.dataset_path} holds no samples")
    training = config.training_config()
    if 'horizon' in meta and meta['horizon'] != training.horizon:
        logger.warning(f"Dataset horizon {meta['horizon']} differs from configured horizon {training.horizon}; "
                       f"using the dataset's")
        training = replace(training, horizon=int(meta['horizon']))
    logger.info(f"Training {len(datasets)} models (budget {training.budget})...")
    results = train(datasets, training, workers=config.workers)
    reports = {}
    for name, (params, report) in results.items():
        save_model(params, model_path(config.model_dir, name))
        write_loss_curve(os.path.join(config.model_dir, f"{name}_loss.csv"), report.loss_curve)
        reports[name] = report
    logger.info(f"Models written to {config.model_dir}")
    return reports


def mode_label(config: ExperimentConfig) -> str:
    return f"single_policy({config.policy})" if config.mode == 'single_policy' else config.mode


def cmd_run(config: ExperimentConfig) -> MetricsSummary:
    """
    Run a trial batch and write traces, per-trial metrics and the aggregated table.

    Navigation failures are results, not errors.

    Raises:
        ConfigError: If models are missing in a prediction-based mode
    """
    if not config.scenario:
        raise ConfigError("run needs a scenario")
    scenario = load_scenario(config.scenario)
    sim = scenario.sim if config.ticks is None else replace(scenario.sim, timeout=config.ticks * scenario.sim.dt)
    predictors = None
    if config.mode != 'single_policy':
        try:
            predictors = load_models(config.model_dir, scenario.policy_names)
        except FileNotFoundError as e:
            raise ConfigError(f"{config.mode} mode needs trained models: {e}") from None
    elif config.policy not in scenario.policy_names:
        raise ConfigError(f"Policy '{config.policy}' is not part of scenario '{scenario.name}'")

    factory = partial(make_controller, mode=config.mode, policy_names=scenario.policy_names,
                      predictors=predictors, policy=config.policy, params=scenario.policy_params,
                      config=config.negotiation_config(), v_max=sim.v_max,
                      omega_max=sim.omega_max, dt=sim.dt)
    logger.info(f"Running {config.trials} trials of {mode_label(config)} on '{scenario.name}'...")
    results = run_trials(scenario.world, sim, factory, config.trials, config.seed, scenario.policy_names,
                         scenario.observation_dim, scenario.policy_params.ruggedness, config.workers)

    for k, (trace, metrics) in enumerate(results):
        write_trace(os.path.join(config.out, f"trial_{k:02d}_trace.csv"), trace)
        write_metrics(os.path.join(config.out, f"trial_{k:02d}_metrics.json"), metrics,
                      {'trial': k, 'seed': config.seed + k, 'mode': mode_label(config)})
        if metrics.failure:
            logger.info(f"  trial {k}: failed ({metrics.cause})")
    summary = summarize([m for _, m in results], mode_label(config))
    write_metrics_table(os.path.join(config.out, 'metrics_table.csv'),
                        os.path.join(config.out, 'metrics_table.txt'), [summary])
    logger.info(f"Complete: {config.trials}/{config.trials} trials run, {summary.failures} failures")
    return summary


def cmd_plot_data(trace_paths: Sequence[str], out_path: str) -> int:
    """
    Turn traces into one CSV of per-tick normalized policy importance.

    Returns:
        int: Number of rows written
    """
    names: Optional[Tuple[str, ...]] = None
    rows = []
    for path in trace_paths:
        trace = read_trace(path)
        if names is None:
            names = trace.policy_names
        elif trace.policy_names != names:
            raise InvalidArgumentError(f"Trace {path} has policies {trace.policy_names}, expected {names}")
        label = os.path.splitext(os.path.basename(path))[0]
        for row in trace.rows:
            weights = np.nan_to_num(np.array(row.weights, dtype=float))
            rows.append((label, row.tick, row.time, importance(weights).tolist()))
    write_importance(out_path, names or (), rows)
    if not trace_paths:
        logger.warning("No traces given; wrote header only")
    return len(rows)
