import os

import pytest

from terrain_negotiator.exceptions import ConfigError
from terrain_negotiator.negotiation import NegotiationConfig
from terrain_negotiator.predictor import TrainingConfig
from terrain_negotiator.scenario import (
    ExperimentConfig,
    experiment_from_dict,
    load_experiment,
    load_scenario,
    scenario_from_dict,
)

MINIMAL = {
    'world': {'width': 20, 'height': 10, 'start': {'x': 1, 'y': 5}, 'goal': {'x': 18, 'y': 5}},
}


@pytest.mark.parametrize('name', ['tall_grass.yaml', 'forest.yaml', 'training_course.yaml'])
def test_shipped_scenarios_load(config_dir, name):
    scenario = load_scenario(os.path.join(config_dir, name))
    assert scenario.name == os.path.splitext(name)[0]
    assert len(scenario.policy_names) >= 2
    assert scenario.observation_dim in (8, 10)
    assert scenario.world.in_bounds(*scenario.world.goal_position)


def test_tall_grass_contents(config_dir):
    scenario = load_scenario(os.path.join(config_dir, 'tall_grass.yaml'))
    world = scenario.world
    assert world.width == 40.0
    assert len(world.occluded_obstacles) == 3
    assert world.terrain_at(20.0, 10.0) == 'tall_grass'
    assert world.terrain_at(2.0, 10.0) == 'concrete'
    assert scenario.sim.timeout == 90.0
    assert 'tall_grass' not in scenario.sim.training_terrains
    assert scenario.policy_params.omega_cap == 0.4


class TestScenarioValidation:

    def test_minimal_defaults(self):
        scenario = scenario_from_dict(MINIMAL)
        assert scenario.name == 'scenario'
        assert scenario.world.terrain_at(5.0, 5.0) == 'concrete'
        assert len(scenario.policy_names) == 5
        assert scenario.sim.dt == 0.1

    @pytest.mark.parametrize('config, message', [
        ({}, "'world' missing"),
        ({'world': {'width': 20, 'height': 10, 'start': {'x': 1, 'y': 5}}}, 'world.goal'),
        ({'world': {**MINIMAL['world'], 'width': -1}}, 'world.width must be positive'),
        ({'world': {**MINIMAL['world'], 'default_terrain': 'lava'}}, "Unknown default_terrain"),
        ({'world': {**MINIMAL['world'], 'patches': [{'terrain': 'mud', 'x0': 0, 'y0': 0, 'x1': 1, 'y1': 1}]}},
         'unknown terrain'),
        ({**MINIMAL, 'policies': {'names': ['max_speed']}}, 'at least 2'),
        ({**MINIMAL, 'policies': {'names': ['max_speed', 'teleport']}}, "Unknown policy 'teleport'"),
        ({**MINIMAL, 'observation_dim': 9}, 'observation_dim'),
        ({**MINIMAL, 'sim': {'gravity': 9.8}}, 'Unknown sim parameters'),
        ({**MINIMAL, 'sim': {'dt': 0}}, 'dt'),
        ({**MINIMAL, 'policies': {'params': {'omega_cap': 5.0}}}, 'omega_cap'),
    ])
    def test_invalid(self, config, message):
        with pytest.raises(ConfigError, match=message):
            scenario_from_dict(config, 'bad.yaml')

    def test_error_names_the_file(self):
        with pytest.raises(ConfigError) as info:
            scenario_from_dict({}, 'bad.yaml')
        assert info.value.path == 'bad.yaml'

    def test_obstacle_entries(self):
        world = {**MINIMAL['world'], 'hard_obstacles': [{'x': 5, 'y': 5}]}
        with pytest.raises(ConfigError, match='radius'):
            scenario_from_dict({'world': world})

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_scenario(str(tmp_path / 'nope.yaml'))

    def test_unparsable_yaml(self, write_yaml):
        path = write_yaml('broken.yaml', "world: [unclosed\n")
        with pytest.raises(ConfigError, match='Could not parse YAML'):
            load_scenario(path)

    def test_top_level_must_be_a_mapping(self, write_yaml):
        with pytest.raises(ConfigError, match='mapping'):
            load_scenario(write_yaml('list.yaml', "- a\n- b\n"))


class TestExperimentConfig:

    def test_shipped_experiment(self, config_dir):
        config = load_experiment(os.path.join(config_dir, 'example_experiment.yaml'))
        assert config.scenario == os.path.join(config_dir, 'tall_grass.yaml')
        assert config.training_scenario == os.path.join(config_dir, 'training_course.yaml')
        assert os.path.isabs(config.out)
        assert config.model_dir == os.path.join(config.out, 'models')
        assert config.dataset_path == os.path.join(config.out, 'dataset.npz')

    def test_file_overrides_base(self, write_yaml, tmp_path):
        path = write_yaml('exp.yaml', """\
            scenario: worlds/a.yaml
            trials: 3
            lambda4: 0.5
        """)
        config = load_experiment(path, ExperimentConfig(trials=7, seed=4))
        assert config.trials == 3
        assert config.seed == 4
        assert config.lambda4 == 0.5
        assert config.scenario == str(tmp_path / 'worlds' / 'a.yaml')

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match='Unknown experiment fields'):
            experiment_from_dict({'lambda5': 1.0}, 'exp.yaml')

    @pytest.mark.parametrize('values', [
        {'lambda1': 0.0},
        {'lambda4': -0.1},
        {'lambda4': 0.0},
        {'horizon': 0},
        {'trials': 0},
        {'mode': 'random'},
        {'mode': 'single_policy'},
        {'policy': 'teleport'},
        {'init': 'random'},
        {'update': 'adam'},
    ])
    def test_invalid_values(self, values):
        with pytest.raises(ConfigError):
            experiment_from_dict(values, 'exp.yaml')

    def test_derived_configs(self):
        config = ExperimentConfig(lambda1=0.2, lambda4=0.3, horizon=5, budget=7, negotiation_period=4,
                                  update='sgd')
        training = config.training_config()
        assert isinstance(training, TrainingConfig)
        assert (training.lambda1, training.horizon, training.budget, training.update) == (0.2, 5, 7, 'sgd')
        negotiation = config.negotiation_config()
        assert isinstance(negotiation, NegotiationConfig)
        assert (negotiation.lambda4, negotiation.period) == (0.3, 4)
