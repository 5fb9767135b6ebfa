"""
Terrain Negotiator

Learns goal-conditioned prediction models for a library of navigation policies
and blends them at run time with weights negotiated from predicted regret,
regularized by an exploration norm that keeps every policy in play. Ships with
a 2D terrain simulator, scenario files and a command-line interface.
"""

__version__ = "1.0.0"

from .core import (
    TERRAIN_CLASSES,
    Behavior,
    Goal,
    ObservationVector,
    RobotState,
    Trajectory,
    normalize_angle,
    relative_displacement,
)

from .exceptions import (
    ConfigError,
    FormatError,
    InvalidArgumentError,
    NonFiniteObjectiveError,
    NumericalError,
    SingularSystemError,
    SolverConsistencyError,
    TrainingDivergedError,
    UnsupportedVersionError,
)

from .policies import (
    POLICY_NAMES,
    PolicyId,
    PolicyLibrary,
    PolicyParams,
    SensedEnvironment,
    policy_adaptive,
    policy_max_speed,
    policy_min_steering,
    policy_no_bias,
    policy_obstacle_avoidance,
)

from .predictor import (
    PolicyPrediction,
    PredictorParams,
    SampleBatch,
    TrainingConfig,
    TrainingSample,
    loss_eq1,
    predict,
    train,
    zo_gradient_estimate,
    zo_minimize,
)

from .negotiation import (
    NegotiationConfig,
    RegretVector,
    SolverDiagnostics,
    WeightMatrix,
    blend_behaviors,
    closed_form_column,
    exploration_norm,
    objective_eq3,
    oracle_solve,
    regret,
    solve_negotiation,
)

from .simulator import (
    MetricsReport,
    RunTrace,
    SimConfig,
    WorldModel,
    apply_terrain_effects,
    run_episode,
    run_trials,
    step_kinematics,
    synthesize_observation,
)

from .controllers import (
    nauts_controller,
    single_policy_controller,
    uniform_blend_controller,
)

from .scenario import (
    ExperimentConfig,
    Scenario,
    load_experiment,
    load_scenario,
)

from .backup import (
    backup_file,
)

from .workflow import (
    cmd_gen_data,
    cmd_plot_data,
    cmd_run,
    cmd_train,
)

__all__ = [
    # Core types
    'TERRAIN_CLASSES',
    'Behavior',
    'Goal',
    'ObservationVector',
    'RobotState',
    'Trajectory',
    'normalize_angle',
    'relative_displacement',

    # Errors
    'ConfigError',
    'FormatError',
    'InvalidArgumentError',
    'NonFiniteObjectiveError',
    'NumericalError',
    'SingularSystemError',
    'SolverConsistencyError',
    'TrainingDivergedError',
    'UnsupportedVersionError',

    # Policy library
    'POLICY_NAMES',
    'PolicyId',
    'PolicyLibrary',
    'PolicyParams',
    'SensedEnvironment',
    'policy_adaptive',
    'policy_max_speed',
    'policy_min_steering',
    'policy_no_bias',
    'policy_obstacle_avoidance',

    # Prediction models
    'PolicyPrediction',
    'PredictorParams',
    'SampleBatch',
    'TrainingConfig',
    'TrainingSample',
    'loss_eq1',
    'predict',
    'train',
    'zo_gradient_estimate',
    'zo_minimize',

    # Negotiation
    'NegotiationConfig',
    'RegretVector',
    'SolverDiagnostics',
    'WeightMatrix',
    'blend_behaviors',
    'closed_form_column',
    'exploration_norm',
    'objective_eq3',
    'oracle_solve',
    'regret',
    'solve_negotiation',

    # Simulation
    'MetricsReport',
    'RunTrace',
    'SimConfig',
    'WorldModel',
    'apply_terrain_effects',
    'run_episode',
    'run_trials',
    'step_kinematics',
    'synthesize_observation',

    # Controllers
    'nauts_controller',
    'single_policy_controller',
    'uniform_blend_controller',

    # Configuration
    'ExperimentConfig',
    'Scenario',
    'load_experiment',
    'load_scenario',

    # Backup system
    'backup_file',

    # Workflows
    'cmd_gen_data',
    'cmd_plot_data',
    'cmd_run',
    'cmd_train',
]
