"""
Long-running experiments. Deselected by default; run with `pytest -m slow`.
"""

import json
import math
import os
import time

import numpy as np
import pytest

from conftest import CONFIG_DIR, constant_params, random_instance
from terrain_negotiator.controllers import nauts_controller
from terrain_negotiator.core import Goal, ObservationVector
from terrain_negotiator.formats import read_trace
from terrain_negotiator.negotiation import NegotiationConfig, importance, solve_negotiation
from terrain_negotiator.predictor import TrainingConfig, predict, train_policy
from terrain_negotiator.scenario import ExperimentConfig, load_scenario
from terrain_negotiator.simulator import SimConfig, run_episode
from terrain_negotiator.workflow import cmd_gen_data, cmd_run, cmd_train, generate_dataset

pytestmark = pytest.mark.slow


def test_negotiation_latency(rng):
    durations = []
    for _ in range(20):
        obs, R = random_instance(rng, n=5, q=8, horizon=9)
        start = time.perf_counter()
        solve_negotiation(obs, R)
        durations.append(time.perf_counter() - start)
    assert np.median(durations) < 0.1


def test_warm_start_over_an_episode(grass_world):
    models = [constant_params(2.0, 0.0), constant_params(1.0, 0.3), constant_params(0.75, -0.2)]
    config = NegotiationConfig(period=1)
    controller = nauts_controller(models, config=config)
    run_episode(grass_world, SimConfig(timeout=20.0), controller, ('a', 'b', 'c'))
    warm = [record.diagnostics.iterations for record in controller.history[1:]]
    cold = [solve_negotiation(record.observation, record.regrets, config=config)[1].iterations
            for record in controller.history[1:]]
    assert len(warm) >= 50
    assert np.mean(warm) < np.mean(cold)


def test_trained_max_speed_model_drives_fast(small_scenario):
    scenario = load_scenario(small_scenario)
    batch = generate_dataset(scenario, ['max_speed'], episodes=4, seed=0, ticks=100)['max_speed']
    params, _ = train_policy(batch, TrainingConfig(), 'max_speed')
    o = ObservationVector(batch.observations[0])
    prediction = predict(params, o, Goal(1.8, 0.0))
    v_max = scenario.sim.v_max
    assert prediction.behaviors[0].linear_velocity == pytest.approx(v_max, rel=0.1)


@pytest.fixture(scope='module')
def tall_grass_runs(tmp_path_factory):
    """Models trained on the training course; nauts and obstacle_avoidance on tall grass."""
    root = tmp_path_factory.mktemp('tall_grass')
    base = ExperimentConfig(scenario=os.path.join(CONFIG_DIR, 'tall_grass.yaml'),
                            training_scenario=os.path.join(CONFIG_DIR, 'training_course.yaml'),
                            out=str(root / 'nauts'), models=str(root / 'models'),
                            dataset=str(root / 'dataset.npz'), trials=10)
    cmd_gen_data(base)
    cmd_train(base)
    cmd_run(base)
    baseline = ExperimentConfig(scenario=base.scenario, out=str(root / 'oa'), trials=10,
                                mode='single_policy', policy='obstacle_avoidance')
    cmd_run(baseline)
    return base, baseline


def per_trial(out, trials=10):
    results = []
    for k in range(trials):
        with open(os.path.join(out, f"trial_{k:02d}_metrics.json")) as f:
            results.append(json.load(f))
    return results


def test_tall_grass_trend(tall_grass_runs):
    base, baseline = tall_grass_runs
    nauts, oa = per_trial(base.out), per_trial(baseline.out)
    faster = sum(1 for a, b in zip(nauts, oa) if a['traversal_time'] < b['traversal_time'])
    assert faster >= 8
    assert sum(r['failure'] for r in nauts) <= sum(r['failure'] for r in oa)


def test_obstacle_avoidance_gains_importance_in_tall_grass(tall_grass_runs):
    base, _ = tall_grass_runs
    shifted = 0
    for k in range(10):
        trace = read_trace(os.path.join(base.out, f"trial_{k:02d}_trace.csv"))
        column = trace.policy_names.index('obstacle_avoidance')
        share = [importance(np.array(row.weights))[column] for row in trace.rows]
        entry = next((i for i, row in enumerate(trace.rows) if row.terrain == 'tall_grass'), None)
        if not entry:
            continue
        before = share[max(0, entry - 50):entry]
        after = share[entry:entry + 50]
        if np.mean(after) > np.mean(before):
            shifted += 1
    assert shifted >= 6


def test_forest_run_gives_valid_metrics(tall_grass_runs, tmp_path):
    base, _ = tall_grass_runs
    config = ExperimentConfig(scenario=os.path.join(CONFIG_DIR, 'forest.yaml'), out=str(tmp_path),
                              models=base.model_dir, trials=2, ticks=300)
    summary = cmd_run(config)
    assert summary.trials == 2
    limit = 300 * load_scenario(config.scenario).sim.dt
    for report in per_trial(str(tmp_path), trials=2):
        assert isinstance(report['failure'], bool)
        assert 0.0 <= report['traversal_time'] <= limit + 1e-9
        assert math.isfinite(report['distance_traveled'])
        assert report['distance_traveled'] >= 0.0
