"""
Command-line interface.

Usage:
    python -m terrain_negotiator gen-data --scenario configs/training_course.yaml --out runs/demo
    python -m terrain_negotiator train --out runs/demo
    python -m terrain_negotiator run --scenario configs/tall_grass.yaml --mode nauts --out runs/demo
    python -m terrain_negotiator plot-data runs/demo/trial_*_trace.csv --out runs/demo/importance.csv

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error, 3 numeric failure.
"""

import argparse
import logging
import sys
from typing import List, Optional

from . import __version__
from .exceptions import ConfigError, FormatError, InvalidArgumentError, NumericalError
from .policies import POLICY_NAMES
from .predictor import UPDATE_RULES
from .scenario import MODES, ExperimentConfig, load_experiment
from .workflow import cmd_gen_data, cmd_plot_data, cmd_run, cmd_train

logger = logging.getLogger('terrain_negotiator')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('[%(levelname)s] %(message)s'))
    logger.handlers[:] = [handler]
    logger.propagate = False
    logger.setLevel(logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='Experiment YAML; its values override flags')
    parser.add_argument('--scenario', help='Scenario YAML file')
    parser.add_argument('--training-scenario', dest='training_scenario',
                        help='Scenario for gen-data (default: --scenario)')
    parser.add_argument('--seed', type=int, help='Base seed (default 0)')
    parser.add_argument('--horizon', type=int, help='Prediction horizon T (default 9)')
    parser.add_argument('--out', help='Output directory (default: output)')
    parser.add_argument('--models', help='Model directory (default: <out>/models)')
    parser.add_argument('--dataset', help='Dataset file (default: <out>/dataset.npz)')
    parser.add_argument('--workers', type=int, help='Process-pool size (default 1)')
    parser.add_argument('--ticks', type=int, help='Tick limit per episode')
    for k in range(1, 5):
        parser.add_argument(f'--lambda{k}', type=float, help=f'lambda{k}')
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug output')
    parser.add_argument('-q', '--quiet', action='store_true', help='Warnings and errors only')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='terrain_negotiator',
                                     description='Regret-based negotiation of navigation policies.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen-data', help='Roll out policies and write a training dataset')
    _common(gen)
    gen.add_argument('--episodes', type=int, help='Episodes per policy (default 4)')

    tr = sub.add_parser('train', help='Train one prediction model per policy')
    _common(tr)
    tr.add_argument('--budget', type=int, help='Zeroth-order iterations per policy (default 200)')
    tr.add_argument('--init', choices=('posterior', 'zeros'), help='Model initialization')
    tr.add_argument('--update', choices=UPDATE_RULES, help='Zeroth-order step rule (default sign)')

    run = sub.add_parser('run', help='Run a seeded trial batch and write metrics')
    _common(run)
    run.add_argument('--trials', type=int, help='Number of trials (default 10)')
    run.add_argument('--mode', choices=MODES, help='Controller mode (default nauts)')
    run.add_argument('--policy', choices=POLICY_NAMES, help='Policy for single_policy mode')

    plot = sub.add_parser('plot-data', help='Per-policy importance time series from traces')
    plot.add_argument('traces', nargs='*', help='Trace CSV files')
    plot.add_argument('--out', required=True, help='Output CSV')
    plot.add_argument('-v', '--verbose', action='store_true')
    plot.add_argument('-q', '--quiet', action='store_true')
    return parser


_FLAG_FIELDS = ('scenario', 'training_scenario', 'seed', 'horizon', 'out', 'models', 'dataset', 'workers', 'ticks',
                'lambda1', 'lambda2', 'lambda3', 'lambda4', 'episodes', 'budget', 'init', 'update',
                'trials', 'mode', 'policy')


def experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Flags form the base config; a --config file overrides them."""
    values = {name: getattr(args, name) for name in _FLAG_FIELDS
              if getattr(args, name, None) is not None}
    base = ExperimentConfig(**values)
    if args.config:
        return load_experiment(args.config, base)
    return base


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    configure_logging(args.verbose, args.quiet)

    try:
        if args.command == 'plot-data':
            count = cmd_plot_data(args.traces, args.out)
            logger.info(f"Wrote {count} rows to {args.out}")
            return EXIT_OK
        config = experiment_from_args(args)
        if args.command == 'gen-data':
            counts = cmd_gen_data(config)
            logger.info(f"Sample counts: {counts}")
        elif args.command == 'train':
            cmd_train(config)
        elif args.command == 'run':
            cmd_run(config)
    except (ConfigError, InvalidArgumentError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (OSError, FormatError) as e:
        logger.error(str(e))
        return EXIT_IO
    except NumericalError as e:
        logger.error(str(e))
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
