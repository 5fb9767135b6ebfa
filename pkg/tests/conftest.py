import os
import textwrap

import numpy as np
import pytest

from terrain_negotiator.core import RobotState
from terrain_negotiator.predictor import PredictorParams
from terrain_negotiator.simulator import Obstacle, SimConfig, WorldModel

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                          'examples_and_configs', 'configs')


@pytest.fixture
def config_dir():
    return CONFIG_DIR


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def sim_config():
    return SimConfig()


@pytest.fixture
def open_world():
    """30 x 10 m of concrete, start at (2, 5) facing the goal at (12, 5)."""
    return WorldModel.from_spec(30.0, 10.0, RobotState(2.0, 5.0, 0.0), (12.0, 5.0), name='open')


@pytest.fixture
def grass_world():
    """Concrete up to x=10, tall grass beyond, one hidden rock at (15, 5)."""
    return WorldModel.from_spec(
        30.0, 10.0, RobotState(2.0, 5.0, 0.0), (28.0, 5.0),
        patches=[{'terrain': 'tall_grass', 'x0': 10.0, 'y0': 0.0, 'x1': 30.0, 'y1': 10.0}],
        occluded_obstacles=[Obstacle(15.0, 5.0, 0.4)],
        name='grass',
    )


def constant_params(v, omega, horizon=9, q=8, feature_count=4, policy=''):
    """A model whose prediction is (v, omega) at every step, for any input."""
    params = PredictorParams.zeros(q, horizon, feature_count, policy=policy)
    means = params.mean_matrix().copy()
    means[0, :] = np.tile([v, omega], horizon)
    return params._replace(weight_means=means.reshape(-1))


def random_instance(rng, n=5, q=8, horizon=9):
    """Observations with bias 1 and U[0,1] features, regrets U[0,10]."""
    obs = np.hstack((np.ones((n, 1)), rng.uniform(0.0, 1.0, (n, q - 1))))
    regrets = rng.uniform(0.0, 10.0, (n, horizon + 1))
    return obs, regrets


SMALL_SCENARIO = """\
name: small
world:
  width: 30
  height: 10
  cell_size: 0.5
  default_terrain: concrete
  start: {x: 2, y: 5, heading: 0}
  goal: {x: 28, y: 5}
sim:
  timeout: 30
policies:
  names: [max_speed, obstacle_avoidance, min_steering]
observation_dim: 8
"""


@pytest.fixture
def small_scenario(tmp_path):
    """Obstacle-free 30 x 10 m scenario with three policies."""
    path = tmp_path / 'small.yaml'
    path.write_text(SMALL_SCENARIO)
    return str(path)


@pytest.fixture
def write_yaml(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text))
        return str(path)
    return write
