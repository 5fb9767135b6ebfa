import os

import pytest

from terrain_negotiator.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, build_parser, experiment_from_args, main


def test_version():
    assert main(['--version']) == EXIT_OK


@pytest.mark.parametrize('argv', [[], ['fly'], ['run', '--mode', 'teleop'], ['plot-data'], ['run', '--trials', 'x']])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


def test_flags_become_the_experiment():
    args = build_parser().parse_args(['train', '--scenario', 'a.yaml', '--budget', '7', '--lambda2', '0',
                                      '--update', 'sgd', '--init', 'zeros'])
    config = experiment_from_args(args)
    assert (config.scenario, config.budget, config.lambda2) == ('a.yaml', 7, 0.0)
    assert (config.update, config.init) == ('sgd', 'zeros')
    assert config.trials == 10


def test_config_file_overrides_flags(write_yaml):
    path = write_yaml('exp.yaml', "trials: 2\n")
    args = build_parser().parse_args(['run', '--config', path, '--trials', '5', '--seed', '9'])
    config = experiment_from_args(args)
    assert (config.trials, config.seed) == (2, 9)


def test_invalid_value_is_a_usage_error(small_scenario, tmp_path):
    assert main(['run', '--scenario', small_scenario, '--out', str(tmp_path), '--mode', 'single_policy']) == EXIT_USAGE
    assert main(['train', '--lambda1', '0', '--out', str(tmp_path)]) == EXIT_USAGE
    assert main(['run', '--scenario', small_scenario, '--out', str(tmp_path), '--lambda4', '0']) == EXIT_USAGE


def test_missing_files_are_io_errors(tmp_path):
    assert main(['run', '--scenario', str(tmp_path / 'none.yaml'), '--out', str(tmp_path)]) == EXIT_IO
    assert main(['train', '--out', str(tmp_path)]) == EXIT_IO
    assert main(['plot-data', str(tmp_path / 'none.csv'), '--out', str(tmp_path / 'i.csv')]) == EXIT_IO


def test_run_and_plot(small_scenario, tmp_path):
    out = str(tmp_path / 'run')
    assert main(['run', '--scenario', small_scenario, '--out', out, '--trials', '1', '--ticks', '20',
                 '--mode', 'single_policy', '--policy', 'min_steering', '-q']) == EXIT_OK
    assert os.path.exists(os.path.join(out, 'metrics_table.txt'))
    target = str(tmp_path / 'importance.csv')
    assert main(['plot-data', os.path.join(out, 'trial_00_trace.csv'), '--out', target, '-q']) == EXIT_OK
    assert os.path.exists(target)


def test_gen_data(small_scenario, tmp_path):
    assert main(['gen-data', '--scenario', small_scenario, '--out', str(tmp_path), '--episodes', '1',
                 '--ticks', '12', '-q']) == EXIT_OK
    assert os.path.exists(tmp_path / 'dataset.npz')
