#!/usr/bin/env python
"""
Example: Full Experiment from a YAML Config

Generates a dataset on the training scenario, trains one prediction model per
policy, then evaluates the negotiating controller against the uniform blend and
every single policy on the evaluation scenario. The combined metrics table is
written next to the per-mode results.

Usage:
    python run_experiment.py configs/example_experiment.yaml
    python run_experiment.py configs/example_experiment.yaml --skip-training

Requirements:
    - The config must name a scenario (and optionally a training_scenario)
    - With --skip-training, models must already exist in the model directory
"""

import sys
import os
from dataclasses import replace

# Add parent directory to path to import terrain_negotiator
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from terrain_negotiator import (
    ConfigError,
    FormatError,
    InvalidArgumentError,
    NumericalError,
    load_experiment,
    load_scenario,
)
from terrain_negotiator.cli import configure_logging
from terrain_negotiator.formats import format_metrics_table, write_metrics_table
from terrain_negotiator.workflow import cmd_gen_data, cmd_run, cmd_train


def main(config_path, skip_training=False):
    """
    Run the whole pipeline for one experiment config.

    Args:
        config_path (str): Path to the experiment YAML
        skip_training (bool): Reuse the models already in the model directory

    Raises:
        SystemExit: With code 1 on config errors, 2 on I/O errors, 3 on numeric failures
    """
    configure_logging()
    try:
        config = load_experiment(config_path)
        if not config.scenario:
            print(f"[ERROR] Required field 'scenario' missing in {config_path}")
            sys.exit(1)
        scenario = load_scenario(config.scenario)

        if not skip_training:
            counts = cmd_gen_data(config)
            too_few = [name for name, count in counts.items() if count < 100]
            if too_few:
                print(f"[ERROR] Too few training samples for: {', '.join(too_few)}")
                print("Increase 'episodes' or the training scenario's timeout")
                sys.exit(1)
            cmd_train(config)
        elif not os.path.isdir(config.model_dir):
            print(f"[ERROR] Model directory not found: {config.model_dir}")
            sys.exit(1)

        runs = [('nauts', None), ('uniform_blend', None)]
        runs += [('single_policy', name) for name in scenario.policy_names]
        summaries = []
        for mode, policy in runs:
            label = mode if policy is None else f"{mode}_{policy}"
            mode_config = replace(config, mode=mode, policy=policy, out=os.path.join(config.out, label),
                                  models=config.model_dir, dataset=config.dataset_path)
            summaries.append(cmd_run(mode_config))
    except (ConfigError, InvalidArgumentError) as e:
        print(f"[ERROR] {e}")
        sys.exit(1)
    except (OSError, FormatError) as e:
        print(f"[ERROR] {e}")
        sys.exit(2)
    except NumericalError as e:
        print(f"[ERROR] {e}")
        sys.exit(3)

    write_metrics_table(os.path.join(config.out, 'metrics_table.csv'),
                        os.path.join(config.out, 'metrics_table.txt'), summaries)
    print()
    print(format_metrics_table(summaries))
    print(f"Complete: {len(summaries)} modes evaluated on '{scenario.name}'")
    print(f"Output: {config.out}")


if __name__ == "__main__":
    args = [a for a in sys.argv[1:] if a != '--skip-training']
    if len(args) != 1:
        print("Usage: python run_experiment.py <experiment.yaml> [--skip-training]")
        print("\nExample:")
        print("  python run_experiment.py configs/example_experiment.yaml")
        sys.exit(1)

    config_path = args[0]

    if not os.path.exists(config_path):
        print(f"Error: Config file not found: {config_path}")
        sys.exit(1)

    main(config_path, skip_training='--skip-training' in sys.argv[1:])
