"""
Policy negotiation: regrets, the exploration-norm objective and its solvers.

Conventions:
    V is stored as an (N, q) array whose row i is the column vector v^i of the
    weight matrix. Observations are an (N, q) array (row i observed by policy i;
    a single observation is broadcast). Regrets are an (N, T+1) array.

    The blending coefficient of policy i is w_i = o_i^T v^i, and feasible
    weight matrices satisfy sum_i w_i = 1.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .core import Behavior, Goal, RobotState, Trajectory, as_observation_matrix
from .exceptions import InvalidArgumentError, SingularSystemError, SolverConsistencyError
from .predictor import PolicyPrediction
from .simulator import step_kinematics

logger = logging.getLogger(__name__)

R_MAX = 1e3
EPSILON = 1e-3
MONOTONE_SLACK = 1e-9
STATIONARITY_TOL = 1e-4
ACCEPT_SLACK = 1e-10
TINY = 1e-300
CONSTRAINT_MODES = ('kkt', 'min_norm')


@dataclass(frozen=True)
class NegotiationConfig:
    """Solver and regret settings."""

    lambda3: float = 1.0
    lambda4: float = 0.1
    tol: float = 1e-8
    max_iters: int = 100
    r_max: float = R_MAX
    epsilon: float = EPSILON
    constraint: str = 'kkt'
    literal_gram: bool = False
    max_halvings: int = 40
    period: int = 20

    def __post_init__(self):
        if not self.lambda3 > 0 or not self.lambda4 > 0:
            raise InvalidArgumentError(f"Need lambda3 > 0 and lambda4 > 0 (got {self.lambda3}, {self.lambda4})")
        if not self.tol > 0 or self.max_iters < 1:
            raise InvalidArgumentError("tol must be positive and max_iters >= 1")
        if not self.r_max > 0 or not 0 < self.epsilon < 1:
            raise InvalidArgumentError("r_max must be positive and epsilon in (0, 1)")
        if self.constraint not in CONSTRAINT_MODES:
            raise InvalidArgumentError(f"constraint must be one of {CONSTRAINT_MODES} (got '{self.constraint}')")
        if self.period < 1:
            raise InvalidArgumentError(f"period must be >= 1 (got {self.period})")


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """V = [v^1, ..., v^N]; `columns[i]` is v^i."""

    columns: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.columns, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidArgumentError(f"WeightMatrix needs an (N, q) array (got shape {arr.shape})")
        if not np.all(np.isfinite(arr)):
            raise InvalidArgumentError("WeightMatrix entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, 'columns', arr)

    @property
    def n_policies(self) -> int:
        return self.columns.shape[0]

    @property
    def q(self) -> int:
        return self.columns.shape[1]

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.columns, axis=1)

    def __repr__(self) -> str:
        return f"WeightMatrix(N={self.n_policies}, q={self.q})"


@dataclass(frozen=True, eq=False)
class RegretVector:
    """Per-policy regrets r^i_k, shape (N, T+1), and their pointwise minimum r*_k."""

    per_policy: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.per_policy, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.size == 0:
            raise InvalidArgumentError(f"Regrets need an (N, T+1) array (got shape {arr.shape})")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise InvalidArgumentError("Regrets must be finite and non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, 'per_policy', arr)

    @property
    def pointwise_min(self) -> np.ndarray:
        return self.per_policy.min(axis=0)

    @property
    def n_policies(self) -> int:
        return self.per_policy.shape[0]

    @property
    def steps(self) -> int:
        return self.per_policy.shape[1]

    @classmethod
    def from_predictions(cls, predictions: Sequence[PolicyPrediction], g: Goal,
                         r_max: float = R_MAX, epsilon: float = EPSILON) -> 'RegretVector':
        return cls(np.array([regret(p, g, r_max=r_max, epsilon=epsilon) for p in predictions]))


@dataclass
class SolverDiagnostics:
    iterations: int
    objective_trace: List[float]
    converged: bool
    stationarity_residual: float
    halvings: int = 0
    multiplier: float = 0.0


def regret_term_goal(g: np.ndarray, displacement: np.ndarray, r_max: float = R_MAX,
                     epsilon: float = EPSILON) -> float:
    """
    Direction term ||g|| ||s|| / (g^T s) - 1, clamped to [0, r_max].

    A zero displacement or a displacement within epsilon of orthogonal (or
    pointing away from the goal) maps to r_max.
    """
    g = np.asarray(g, dtype=float)
    s = np.asarray(displacement, dtype=float)
    g_norm = float(np.linalg.norm(g))
    s_norm = float(np.linalg.norm(s))
    if g_norm == 0.0:
        raise InvalidArgumentError("Regret needs a nonzero goal")
    if s_norm == 0.0:
        return r_max
    dot = float(g @ s)
    if dot <= epsilon * g_norm * s_norm:
        return r_max
    return min(max(g_norm * s_norm / dot - 1.0, 0.0), r_max)


def regret_term_effort(behaviors: np.ndarray, weights: Optional[np.ndarray] = None) -> float:
    """
    Effort term sum_j (t - j) a_j^T a_j over a window ending at step t.

    `behaviors` holds the window oldest first. Without explicit weights the
    newest entry is behavior t itself and gets weight 0.
    """
    window = np.asarray(behaviors, dtype=float).reshape(-1, 2)
    if window.shape[0] == 0:
        return 0.0
    if weights is None:
        weights = np.arange(window.shape[0] - 1, -1, -1, dtype=float)
    return float(weights @ np.sum(window * window, axis=1))


def step_regret(g: np.ndarray, displacement: np.ndarray, behaviors: np.ndarray,
                r_max: float = R_MAX, epsilon: float = EPSILON,
                weights: Optional[np.ndarray] = None) -> float:
    return regret_term_goal(g, displacement, r_max, epsilon) + regret_term_effort(behaviors, weights)


def regret(prediction: PolicyPrediction, g: Goal, horizon: Optional[int] = None,
           r_max: float = R_MAX, epsilon: float = EPSILON) -> np.ndarray:
    """
    Per-step regrets of one policy along its prediction, for k = 0..T.

    At step k the direction term uses the predicted displacement s_k - s_0 (step 0
    uses the first step's displacement, since s_0 - s_0 carries no direction) and
    the effort term covers the last T+1 predicted behaviors up to step k, older
    behaviors weighted more. Behaviors before the prediction start count as zero.

    Args:
        prediction (PolicyPrediction): Predicted behaviors and states
        g (Goal): Goal in the same frame as the predicted states
        horizon (int): Effort window length; defaults to the prediction horizon
        r_max (float): Cap of the direction term
        epsilon (float): Near-orthogonality threshold

    Returns:
        np.ndarray: T+1 non-negative regrets

    Raises:
        InvalidArgumentError: If g is the zero vector or r_max <= 0

    Example:
        >>> p = PolicyPrediction.from_behaviors([Behavior(1.0, 0.0)] * 3)
        >>> float(regret(p, Goal(1.0, 0.0))[0])
        0.0
    """
    if not r_max > 0:
        raise InvalidArgumentError(f"r_max must be positive (got {r_max})")
    g_arr = g.as_array()
    if not np.any(g_arr):
        raise InvalidArgumentError("Regret needs a nonzero goal")
    states = prediction.state_array()
    behaviors = prediction.behavior_array()
    steps = prediction.horizon
    window = steps if horizon is None else int(horizon)
    origin = states[0, :2]
    out = np.empty(steps + 1)
    for k in range(steps + 1):
        displacement = states[max(k, 1), :2] - origin
        lo, hi = max(0, k - window), min(k + 1, steps)
        weights = k - np.arange(lo, hi, dtype=float)
        out[k] = step_regret(g_arr, displacement, behaviors[lo:hi], r_max, epsilon, weights)
    return out


def _columns(V) -> np.ndarray:
    return V.columns if isinstance(V, WeightMatrix) else np.asarray(V, dtype=float)


def _regret_matrix(regrets) -> np.ndarray:
    return regrets.per_policy if isinstance(regrets, RegretVector) else RegretVector(regrets).per_policy


def exploration_norm(V) -> float:
    """
    ||V||_E = sum_i ||V||_F / ||v^i||_2.

    Returns +inf when any column is zero.

    Example:
        >>> exploration_norm(np.eye(2))
        2.8284271247461903
    """
    cols = _columns(V)
    norms = np.linalg.norm(cols, axis=1)
    if np.any(norms == 0.0):
        return math.inf
    return float(np.linalg.norm(cols) * np.sum(1.0 / norms))


def policy_weights(V, observations) -> np.ndarray:
    """Blending coefficients w_i = o_i^T v^i."""
    cols = _columns(V)
    obs = as_observation_matrix(observations, cols.shape[0])
    if obs.shape != cols.shape:
        raise InvalidArgumentError(f"Observation shape {obs.shape} does not match V shape {cols.shape}")
    return np.sum(obs * cols, axis=1)


def importance(weights: np.ndarray) -> np.ndarray:
    """|w_i| / sum_j |w_j|; uniform when every weight is zero."""
    magnitude = np.abs(np.asarray(weights, dtype=float))
    total = magnitude.sum()
    if total == 0.0:
        return np.full(magnitude.shape, 1.0 / max(magnitude.size, 1))
    return magnitude / total


def data_term(V, observations, regrets, lambda3: float = 1.0) -> float:
    R = _regret_matrix(regrets)
    w = policy_weights(V, observations)
    residual = R.min(axis=0)[None, :] - w[:, None] * R
    return float(lambda3 * np.sum(residual * residual))


def objective_eq3(V, observations, regrets, lambda3: float = 1.0, lambda4: float = 0.1) -> float:
    """
    lambda3 * sum_i sum_k (r*_k - (o_i^T v^i) r^i_k)^2 + lambda4 * ||V||_E.

    Returns +inf when V has a zero column and lambda4 > 0.
    """
    if lambda4 == 0.0:
        return data_term(V, observations, regrets, lambda3)
    norm = exploration_norm(V)
    if math.isinf(norm):
        return math.inf
    return data_term(V, observations, regrets, lambda3) + lambda4 * norm


def regularizer_matrix(V) -> np.ndarray:
    """Q = I_q / (2 ||V||_E)."""
    cols = _columns(V)
    norm = exploration_norm(cols)
    if math.isinf(norm):
        raise InvalidArgumentError("Q is undefined for a weight matrix with a zero column")
    return np.eye(cols.shape[1]) / (2.0 * norm)


def column_system(i: int, observations, regrets, Q: np.ndarray, lambda3: float = 1.0,
                  lambda4: float = 0.1, literal_gram: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    Left- and right-hand side of the per-column stationarity system.

    A = lambda4 Q + 2 lambda3 sum_k (r^i_k)^2 o_i o_i^T and
    b = 2 lambda3 sum_k r*_k r^i_k o_i. With `literal_gram`, the outer product
    is replaced by (o_i^T o_i) I.
    """
    R = _regret_matrix(regrets)
    if not 0 <= i < R.shape[0]:
        raise IndexError(f"Policy index {i} out of range for {R.shape[0]} policies")
    o = as_observation_matrix(observations, R.shape[0])[i]
    r = R[i]
    r_star = R.min(axis=0)
    gram = float(o @ o) * np.eye(o.size) if literal_gram else np.outer(o, o)
    A = lambda4 * np.asarray(Q, dtype=float) + 2.0 * lambda3 * float(r @ r) * gram
    b = 2.0 * lambda3 * float(r_star @ r) * o
    return A, b


def _solve_spd(A: np.ndarray, rhs: np.ndarray, i: int) -> np.ndarray:
    try:
        return linalg.solve(A, rhs, assume_a='pos')
    except (linalg.LinAlgError, ValueError):
        raise SingularSystemError(i, float(np.linalg.cond(A))) from None


def closed_form_column(i: int, observations, regrets, Q: np.ndarray, lambda3: float = 1.0,
                       lambda4: float = 0.1, literal_gram: bool = False) -> np.ndarray:
    """
    Unconstrained minimizer of column i's quadratic with Q frozen: v^i = A^-1 b.

    Args:
        i (int): Policy index
        observations: (N, q) observations or a single ObservationVector
        regrets: RegretVector or (N, T+1) array
        Q (np.ndarray): q x q regularizer matrix
        lambda3 (float): Data-term weight
        lambda4 (float): Exploration-norm weight
        literal_gram (bool): Use (o^T o) I instead of o o^T

    Raises:
        SingularSystemError: If A is singular or not positive definite
        IndexError: If i is out of range

    Example:
        >>> closed_form_column(0, np.array([[1.0]]), np.array([[2.0]]), np.array([[0.5]]))
        array([0.99378882])
    """
    A, b = column_system(i, observations, regrets, Q, lambda3, lambda4, literal_gram)
    return _solve_spd(A, b, i)


def project_to_constraint(V, observations) -> np.ndarray:
    """Minimum-norm correction onto sum_i o_i^T v^i = 1: v^i += c o_i."""
    cols = _columns(V).astype(float)
    obs = as_observation_matrix(observations, cols.shape[0])
    total = float(np.sum(obs * obs))
    if total == 0.0:
        raise InvalidArgumentError("All observations are zero; the constraint cannot be met")
    c = (1.0 - float(np.sum(obs * cols))) / total
    return cols + c * obs


def initial_weights(observation, n_policies: int) -> WeightMatrix:
    """Uniform feasible start: every column o / (N ||o||^2)."""
    if n_policies < 1:
        raise InvalidArgumentError(f"n_policies must be >= 1 (got {n_policies})")
    obs = as_observation_matrix(observation, n_policies)
    norms = np.sum(obs * obs, axis=1, keepdims=True)
    return WeightMatrix(obs / (n_policies * norms))


def stationarity_residuals(V, observations, regrets, lambda3: float = 1.0, lambda4: float = 0.1,
                           literal_gram: bool = False,
                           with_multiplier: bool = True) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Per-column residuals of the stationarity system with Q recomputed from V.

    With `with_multiplier`, the residual is A_i v^i - b_i + mu o_i where mu is the
    common Lagrange multiplier of the normalization constraint (least-squares fit).

    Returns:
        tuple: (residual norms, right-hand-side norms, mu)
    """
    cols = _columns(V)
    R = _regret_matrix(regrets)
    obs = as_observation_matrix(observations, R.shape[0])
    Q = regularizer_matrix(cols)
    raw = []
    rhs = []
    for i in range(R.shape[0]):
        A, b = column_system(i, obs, R, Q, lambda3, lambda4, literal_gram)
        raw.append(A @ cols[i] - b)
        rhs.append(float(np.linalg.norm(b)))
    raw = np.array(raw)
    mu = 0.0
    if with_multiplier:
        mu = -float(np.sum(obs * raw)) / float(np.sum(obs * obs))
        raw = raw + mu * obs
    return np.linalg.norm(raw, axis=1), np.array(rhs), mu


def _stationarity_score(V, obs, R, config: NegotiationConfig) -> Tuple[float, float]:
    norms, rhs, mu = stationarity_residuals(V, obs, R, config.lambda3, config.lambda4, config.literal_gram)
    return float(np.max(norms / (1.0 + rhs))), mu


def _sweep(cols: np.ndarray, obs: np.ndarray, R: np.ndarray, config: NegotiationConfig) -> np.ndarray:
    Q = regularizer_matrix(cols)
    n = cols.shape[0]
    if config.constraint == 'min_norm':
        updated = np.array([
            closed_form_column(i, obs, R, Q, config.lambda3, config.lambda4, config.literal_gram)
            for i in range(n)
        ])
        return project_to_constraint(updated, obs)
    ys, zs = [], []
    for i in range(n):
        A, b = column_system(i, obs, R, Q, config.lambda3, config.lambda4, config.literal_gram)
        solved = _solve_spd(A, np.column_stack((b, obs[i])), i)
        ys.append(solved[:, 0])
        zs.append(solved[:, 1])
    ys, zs = np.array(ys), np.array(zs)
    mu = (float(np.sum(obs * ys)) - 1.0) / float(np.sum(obs * zs))
    return ys - mu * zs


def solve_negotiation(observations, regrets, V_init: Optional[WeightMatrix] = None,
                      lambda3: Optional[float] = None, lambda4: Optional[float] = None,
                      tol: Optional[float] = None, max_iters: Optional[int] = None,
                      config: NegotiationConfig = NegotiationConfig()) -> Tuple[WeightMatrix, SolverDiagnostics]:
    """
    Iterative closed-form negotiation solver.

    Each iteration freezes Q = I_q / (2 ||V||_E) at the current V, updates every
    column in closed form under the normalization constraint and accepts the new
    matrix only if the objective does not increase; otherwise the step is halved
    along the segment between the two feasible iterates. Iteration stops when the
    relative objective change drops below `tol`. A stopped solve is reported as
    converged only if its stationarity residual is at most STATIONARITY_TOL.

    Args:
        observations: Single ObservationVector or (N, q) array
        regrets: RegretVector or (N, T+1) array
        V_init (WeightMatrix): Warm start; None starts from initial_weights
        lambda3, lambda4, tol, max_iters: Override the matching config fields
        config (NegotiationConfig): Solver settings

    Returns:
        tuple: (WeightMatrix, SolverDiagnostics)

    Raises:
        InvalidArgumentError: If V_init has a zero column or shapes disagree
        SingularSystemError: If a column system cannot be solved
        SolverConsistencyError: If the recorded objective ever increases beyond 1e-9
    """
    overrides = {k: v for k, v in dict(lambda3=lambda3, lambda4=lambda4, tol=tol, max_iters=max_iters).items()
                 if v is not None}
    if overrides:
        config = NegotiationConfig(**{**asdict(config), **overrides})
    R = _regret_matrix(regrets)
    n = R.shape[0]
    obs = as_observation_matrix(observations, n)
    if V_init is None:
        V_init = initial_weights(obs, n)
    cols = _columns(V_init)
    if cols.shape != obs.shape:
        raise InvalidArgumentError(f"V_init shape {cols.shape} does not match observations {obs.shape}")
    if np.any(np.linalg.norm(cols, axis=1) == 0.0):
        raise InvalidArgumentError("V_init has a zero column")

    cols = project_to_constraint(cols, obs)
    f = objective_eq3(cols, obs, R, config.lambda3, config.lambda4)
    trace = [f]
    stopped = False
    total_halvings = 0
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        candidate = _sweep(cols, obs, R, config)
        f_new = objective_eq3(candidate, obs, R, config.lambda3, config.lambda4)
        alpha = 1.0
        halvings = 0
        while not f_new <= f + ACCEPT_SLACK and halvings < config.max_halvings:
            alpha *= 0.5
            halvings += 1
            candidate = cols + alpha * (candidate - cols)
            f_new = objective_eq3(candidate, obs, R, config.lambda3, config.lambda4)
        total_halvings += halvings
        if not f_new <= f + ACCEPT_SLACK:
            logger.debug(f"No descent after {halvings} halvings at iteration {iterations}; stopping")
            stopped = True
            break
        if f_new > trace[-1] + MONOTONE_SLACK:
            raise SolverConsistencyError(
                f"Objective increased from {trace[-1]:.12g} to {f_new:.12g} at iteration {iterations}"
            )
        change = abs(f - f_new) / max(abs(f), TINY)
        cols, f = candidate, f_new
        trace.append(f)
        if change < config.tol:
            stopped = True
            break

    residual, mu = _stationarity_score(cols, obs, R, config)
    converged = stopped and residual <= STATIONARITY_TOL
    if not stopped:
        logger.debug(f"Negotiation did not converge in {config.max_iters} iterations")
    elif not converged:
        logger.warning(f"Negotiation stalled after {iterations} iterations with stationarity residual "
                       f"{residual:.3g} (limit {STATIONARITY_TOL:g})")
    return WeightMatrix(cols), SolverDiagnostics(iterations, trace, converged, residual, total_halvings, mu)


def _objective_and_gradient(cols: np.ndarray, obs: np.ndarray, R: np.ndarray,
                            lambda3: float, lambda4: float) -> Tuple[float, np.ndarray]:
    r_star = R.min(axis=0)
    w = np.sum(obs * cols, axis=1)
    residual = r_star[None, :] - w[:, None] * R
    value = lambda3 * float(np.sum(residual * residual))
    grad = (-2.0 * lambda3 * np.sum(residual * R, axis=1))[:, None] * obs
    if lambda4 > 0:
        norms = np.linalg.norm(cols, axis=1)
        if np.any(norms == 0.0):
            return math.inf, grad
        frob = float(np.linalg.norm(cols))
        inverse_sum = float(np.sum(1.0 / norms))
        value += lambda4 * frob * inverse_sum
        grad = grad + lambda4 * (cols * (inverse_sum / frob) - frob * cols / (norms ** 3)[:, None])
    return value, grad


def _tangent(grad: np.ndarray, obs: np.ndarray) -> np.ndarray:
    return grad - (float(np.sum(obs * grad)) / float(np.sum(obs * obs))) * obs


def _spg(cols: np.ndarray, obs: np.ndarray, R: np.ndarray, lambda3: float, lambda4: float,
         max_iters: int, tol: float, memory: int = 10, patience: int = 200) -> Tuple[np.ndarray, float]:
    """Spectral projected gradient with a non-monotone Armijo search on the constraint hyperplane."""
    x = project_to_constraint(cols, obs)
    f, g = _objective_and_gradient(x, obs, R, lambda3, lambda4)
    history = [f]
    best, stalled = f, 0
    d = -_tangent(g, obs)
    step = 1.0 / max(float(np.max(np.abs(d))), 1e-12)
    for _ in range(max_iters):
        if stalled > patience:
            break
        d = -step * _tangent(g, obs)
        if float(np.max(np.abs(d))) <= tol * step:
            break
        reference = max(history[-memory:])
        slope = float(np.sum(g * d))
        lam = 1.0
        while True:
            x_new = x + lam * d
            f_new, g_new = _objective_and_gradient(x_new, obs, R, lambda3, lambda4)
            if f_new <= reference + 1e-4 * lam * slope or lam < 1e-20:
                break
            lam *= 0.5
        s = x_new - x
        y = g_new - g
        sy = float(np.sum(s * y))
        step = min(max(float(np.sum(s * s)) / sy, 1e-12), 1e12) if sy > 0 else 1e12
        x, f, g = x_new, f_new, g_new
        history.append(f)
        if f < best - 1e-15 * abs(best):
            best, stalled = f, 0
        else:
            stalled += 1
    return x, f


def oracle_restarts(observations, regrets, lambda3: float = 1.0, lambda4: float = 0.1,
                    restarts: int = 4, seed: int = 0, max_iters: int = 3000,
                    tol: float = 1e-10) -> List[Tuple[np.ndarray, float]]:
    """Run the projected-gradient oracle from `restarts` random starts; one (V, objective) per start."""
    R = _regret_matrix(regrets)
    n = R.shape[0]
    obs = as_observation_matrix(observations, n)
    rng = np.random.default_rng(seed)
    results = []
    for r in range(max(restarts, 1)):
        if r == 0:
            start = initial_weights(obs, n).columns
        else:
            start = rng.standard_normal(obs.shape) * rng.uniform(0.1, 2.0)
        results.append(_spg(start, obs, R, lambda3, lambda4, max_iters, tol))
    return results


def oracle_solve(observations, regrets, lambda3: float = 1.0, lambda4: float = 0.1,
                 restarts: int = 4, seed: int = 0, max_iters: int = 3000) -> Tuple[WeightMatrix, float]:
    """
    Independent multi-start solver for small instances (N <= 5, q <= 8).

    Returns the best weight matrix over all restarts and its objective.
    """
    best_cols, best = min(oracle_restarts(observations, regrets, lambda3, lambda4, restarts, seed, max_iters),
                          key=lambda item: item[1])
    return WeightMatrix(best_cols), best


def blend_behavior_array(weights: np.ndarray, predictions: Sequence[PolicyPrediction]) -> np.ndarray:
    """Unclamped weighted sum of predicted behavior sequences, shape (T, 2)."""
    stacked = np.array([p.behavior_array() for p in predictions])
    weights = np.asarray(weights, dtype=float)
    if stacked.shape[0] != weights.size:
        raise InvalidArgumentError(f"{weights.size} weights for {stacked.shape[0]} predictions")
    return np.tensordot(weights, stacked, axes=1)


def blend_behaviors(observations, V, predictions: Sequence[PolicyPrediction],
                    v_max: Optional[float] = None, omega_max: Optional[float] = None,
                    dt: float = 0.1, start: Optional[RobotState] = None) -> Trajectory:
    """
    Blend the predicted behavior sequences with w_i = o_i^T v^i.

    Behaviors are clamped when limits are given; states are re-integrated from
    `start` (the origin by default).
    """
    weights = policy_weights(V, observations)
    blended = blend_behavior_array(weights, predictions)
    behaviors = [Behavior(float(v), float(w)) for v, w in blended]
    if v_max is not None and omega_max is not None:
        behaviors = [b.clamped(v_max, omega_max) for b in behaviors]
    states = [start if start is not None else RobotState(0.0, 0.0, 0.0)]
    for behavior in behaviors:
        states.append(step_kinematics(states[-1], behavior, dt))
    return Trajectory(tuple(states), tuple(behaviors))


def instance_to_dict(observations, regrets, V=None, config: Optional[NegotiationConfig] = None) -> Dict:
    """JSON-ready record of a solver instance (and optionally a solution)."""
    R = _regret_matrix(regrets)
    record = {
        'version': 1,
        'observations': as_observation_matrix(observations, R.shape[0]).tolist(),
        'regrets': R.tolist(),
    }
    if V is not None:
        record['V'] = _columns(V).tolist()
    if config is not None:
        record['config'] = asdict(config)
    return record


def instance_from_dict(record: Dict) -> Tuple[np.ndarray, RegretVector, Optional[WeightMatrix], Optional[NegotiationConfig]]:
    if record.get('version') != 1:
        raise InvalidArgumentError(f"Unsupported instance version {record.get('version')}")
    V = WeightMatrix(np.array(record['V'])) if 'V' in record else None
    config = NegotiationConfig(**record['config']) if 'config' in record else None
    return np.array(record['observations'], dtype=float), RegretVector(np.array(record['regrets'])), V, config


def dumps_instance(observations, regrets, V=None, config=None) -> str:
    return json.dumps(instance_to_dict(observations, regrets, V, config), sort_keys=True)
