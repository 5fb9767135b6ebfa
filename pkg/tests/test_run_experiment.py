import importlib.util
import os

import pytest

from conftest import CONFIG_DIR
from terrain_negotiator.exceptions import InvalidArgumentError

SCRIPT = os.path.join(os.path.dirname(CONFIG_DIR), 'run_experiment.py')


@pytest.fixture
def script():
    spec = importlib.util.spec_from_file_location('run_experiment', SCRIPT)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_invalid_argument_exits_with_usage_code(script, small_scenario, write_yaml, tmp_path, monkeypatch):
    def rejected(config):
        raise InvalidArgumentError('at least 100 samples are required')

    monkeypatch.setattr(script, 'cmd_gen_data', rejected)
    path = write_yaml('exp.yaml', f"scenario: {small_scenario}\nout: {tmp_path / 'out'}\n")
    with pytest.raises(SystemExit) as info:
        script.main(path)
    assert info.value.code == 1


def test_missing_scenario_field(script, write_yaml):
    path = write_yaml('exp.yaml', "trials: 2\n")
    with pytest.raises(SystemExit) as info:
        script.main(path)
    assert info.value.code == 1
