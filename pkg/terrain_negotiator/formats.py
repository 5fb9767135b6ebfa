"""
Versioned file formats: datasets, prediction models, run traces, metrics and tables.

Every reader checks the declared format version and raises UnsupportedVersionError
for versions it does not know.
"""

import csv
import io
import json
import logging
import math
import os
import zipfile
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .backup import backup_file
from .core import RobotState
from .exceptions import FormatError, UnsupportedVersionError
from .predictor import LossBreakdown, PredictorParams, SampleBatch
from .simulator import MetricsReport, RunTrace, TraceRow

logger = logging.getLogger(__name__)

DATASET_VERSION = 1
MODEL_FORMAT = 'terrain-negotiator-model'
MODEL_VERSION = 1
TRACE_MAGIC = '# terrain-negotiator trace v1'
TABLE_MAGIC = '# terrain-negotiator metrics v1'
IMPORTANCE_MAGIC = '# terrain-negotiator importance v1'
LOSS_MAGIC = '# terrain-negotiator loss v1'
METRICS_VERSION = 1

# fixed zip entry timestamp so identical arrays give identical files
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
    except OSError as e:
        raise OSError(f"Cannot create output directory {parent}: {e}") from None


def _prepare_output(path: str, backup: bool) -> None:
    _ensure_parent(path)
    if backup and os.path.exists(path):
        try:
            backup_file(path)
        except OSError as e:
            logger.warning(f"Backup of {path} failed: {e}")


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ''
    return repr(float(value))


# Datasets


def save_dataset(path: str, datasets: Dict[str, SampleBatch], meta: Optional[Dict] = None,
                 backup: bool = True) -> None:
    """
    Write per-policy training samples to an uncompressed npz file.

    Keys: 'format_version', 'policies', 'meta' (JSON text) and, per policy,
    '<name>__observations', '<name>__goals', '<name>__behaviors', '<name>__states'.
    """
    _prepare_output(path, backup)
    arrays = {
        'format_version': np.array(DATASET_VERSION),
        'policies': np.array(list(datasets), dtype=str),
        'meta': np.array(json.dumps(meta or {}, sort_keys=True)),
    }
    for name, batch in datasets.items():
        arrays[f"{name}__observations"] = batch.observations
        arrays[f"{name}__goals"] = batch.goals
        arrays[f"{name}__behaviors"] = batch.behaviors
        arrays[f"{name}__states"] = batch.states
    try:
        with zipfile.ZipFile(path, 'w', zipfile.ZIP_STORED) as archive:
            for key, value in arrays.items():
                buffer = io.BytesIO()
                np.lib.format.write_array(buffer, np.ascontiguousarray(value), allow_pickle=False)
                archive.writestr(zipfile.ZipInfo(f"{key}.npy", date_time=_ZIP_EPOCH), buffer.getvalue())
    except OSError as e:
        raise OSError(f"Cannot write dataset {path}: {e}") from None


def load_dataset(path: str) -> Tuple[Dict[str, SampleBatch], Dict]:
    """
    Read a dataset written by save_dataset.

    Returns:
        tuple: (policy name -> SampleBatch, metadata dict)

    Raises:
        FileNotFoundError: If the file does not exist
        FormatError: If the file is not a dataset
        UnsupportedVersionError: If the format version is unknown
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Dataset not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            if 'format_version' not in data.files:
                raise FormatError("Missing format_version", path)
            version = int(data['format_version'])
            if version != DATASET_VERSION:
                raise UnsupportedVersionError(f"Unsupported dataset version {version}", path)
            names = [str(n) for n in data['policies']]
            meta = json.loads(str(data['meta'])) if 'meta' in data.files else {}
            datasets = {
                name: SampleBatch(data[f"{name}__observations"], data[f"{name}__goals"],
                                  data[f"{name}__behaviors"], data[f"{name}__states"])
                for name in names
            }
    except FormatError:
        raise
    except (KeyError, ValueError, zipfile.BadZipFile, OSError) as e:
        raise FormatError(f"Not a valid dataset: {e}", path) from None
    return datasets, meta


# Prediction models


def model_to_dict(params: PredictorParams) -> Dict:
    return {
        'format': MODEL_FORMAT,
        'version': MODEL_VERSION,
        'policy': params.policy,
        'q': params.observation_dim,
        'T': params.horizon,
        'feature_count': params.feature_count,
        'input_dim': params.input_dim,
        'feature_seed': params.feature_seed,
        'lengthscale': params.lengthscale,
        'dt': params.dt,
        'noise_log_variance': params.noise_log_variance.tolist(),
        'weight_means': params.weight_means.tolist(),
        'weight_log_variances': params.weight_log_variances.tolist(),
    }


def model_from_dict(record: Dict, path: Optional[str] = None) -> PredictorParams:
    if record.get('format') != MODEL_FORMAT:
        raise FormatError(f"Not a prediction model (format {record.get('format')!r})", path)
    if record.get('version') != MODEL_VERSION:
        raise UnsupportedVersionError(f"Unsupported model version {record.get('version')}", path)
    try:
        params = PredictorParams(
            weight_means=np.array(record['weight_means'], dtype=float),
            weight_log_variances=np.array(record['weight_log_variances'], dtype=float),
            feature_count=int(record['feature_count']),
            horizon=int(record['T']),
            observation_dim=int(record['q']),
            feature_seed=int(record['feature_seed']),
            lengthscale=float(record['lengthscale']),
            noise_log_variance=np.array(record['noise_log_variance'], dtype=float),
            dt=float(record['dt']),
            policy=str(record.get('policy', '')),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"Invalid model record: {e}", path) from None
    if params.input_dim != record.get('input_dim', params.input_dim):
        raise FormatError(f"input_dim {record['input_dim']} does not match q={params.observation_dim}", path)
    return params


def save_model(params: PredictorParams, path: str, backup: bool = True) -> None:
    """Write a model as deterministic JSON (header fields first, then the flat weight arrays)."""
    _prepare_output(path, backup)
    try:
        with open(path, 'w') as f:
            json.dump(model_to_dict(params), f)
            f.write('\n')
    except OSError as e:
        raise OSError(f"Cannot write model {path}: {e}") from None


def load_model(path: str) -> PredictorParams:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Model file not found: {path}")
    with open(path, 'r') as f:
        try:
            record = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"Invalid JSON: {e.msg}", path, e.lineno) from None
    return model_from_dict(record, path)


def model_path(model_dir: str, policy: str) -> str:
    return os.path.join(model_dir, f"{policy}.json")


def load_models(model_dir: str, policy_names: Sequence[str]) -> List[PredictorParams]:
    """Load one model per policy from a directory, in the given order."""
    missing = [name for name in policy_names if not os.path.exists(model_path(model_dir, name))]
    if missing:
        raise FileNotFoundError(f"Missing model files in {model_dir}: {', '.join(missing)}")
    return [load_model(model_path(model_dir, name)) for name in policy_names]


# Run traces

_BASE_COLUMNS = ('tick', 'time', 'x', 'y', 'heading', 'v', 'omega', 'v_effective', 'terrain')


def trace_header(policy_names: Sequence[str]) -> List[str]:
    return (list(_BASE_COLUMNS) + [f"weight_{n}" for n in policy_names]
            + [f"regret_{n}" for n in policy_names] + ['objective'])


def write_trace(path: str, trace: RunTrace) -> None:
    """Write a RunTrace as CSV behind a version line."""
    _prepare_output(path, backup=False)
    names = trace.policy_names
    try:
        with open(path, 'w', newline='') as f:
            f.write(f"{TRACE_MAGIC}\n")
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(trace_header(names))
            for row in trace.rows:
                weights = list(row.weights) + [math.nan] * (len(names) - len(row.weights))
                regrets = list(row.regrets) + [math.nan] * (len(names) - len(row.regrets))
                writer.writerow([row.tick, _fmt(row.time), _fmt(row.x), _fmt(row.y), _fmt(row.heading),
                                 _fmt(row.v), _fmt(row.omega), _fmt(row.v_effective), row.terrain]
                                + [_fmt(w) for w in weights[:len(names)]]
                                + [_fmt(r) for r in regrets[:len(names)]]
                                + [_fmt(row.objective)])
    except OSError as e:
        raise OSError(f"Cannot write trace {path}: {e}") from None


def read_trace(path: str) -> RunTrace:
    """
    Parse a trace CSV.

    The returned RunTrace starts at the first recorded pose; scenario and seed are not stored.

    Raises:
        FileNotFoundError: If the file does not exist
        UnsupportedVersionError: If the version line is unknown
        FormatError: On a malformed line, with its 1-based line number
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Trace file not found: {path}")
    with open(path, 'r', newline='') as f:
        lines = f.read().splitlines()
    if not lines:
        raise FormatError("Empty trace file", path, 1)
    if lines[0] != TRACE_MAGIC:
        if lines[0].startswith('# terrain-negotiator trace'):
            raise UnsupportedVersionError(f"Unsupported trace version line {lines[0]!r}", path, 1)
        raise FormatError("Missing trace version line", path, 1)
    if len(lines) < 2:
        raise FormatError("Missing header line", path, 2)
    header = next(csv.reader([lines[1]]))
    if tuple(header[:len(_BASE_COLUMNS)]) != _BASE_COLUMNS or header[-1] != 'objective':
        raise FormatError("Unexpected trace header", path, 2)
    policy_columns = header[len(_BASE_COLUMNS):-1]
    if len(policy_columns) % 2:
        raise FormatError("Weight and regret columns do not pair up", path, 2)
    n = len(policy_columns) // 2
    names = tuple(c[len('weight_'):] for c in policy_columns[:n])
    if policy_columns[:n] != [f"weight_{x}" for x in names] or policy_columns[n:] != [f"regret_{x}" for x in names]:
        raise FormatError("Unexpected weight/regret column names", path, 2)

    rows = []
    for number, values in enumerate(csv.reader(lines[2:]), start=3):
        if not values:
            continue
        if len(values) != len(header):
            raise FormatError(f"Expected {len(header)} fields, found {len(values)}", path, number)
        try:
            floats = [float(v) if v != '' else math.nan for v in values[1:8]]
            policy_values = [float(v) if v != '' else math.nan for v in values[9:]]
            rows.append(TraceRow(
                tick=int(values[0]),
                time=floats[0], x=floats[1], y=floats[2], heading=floats[3],
                v=floats[4], omega=floats[5], v_effective=floats[6],
                terrain=values[8],
                weights=tuple(policy_values[:n]),
                regrets=tuple(policy_values[n:2 * n]),
                objective=policy_values[-1],
            ))
        except ValueError as e:
            raise FormatError(f"Malformed value: {e}", path, number) from None
    start = RobotState(rows[0].x, rows[0].y, rows[0].heading) if rows else RobotState(0.0, 0.0)
    return RunTrace(names, start, rows)


# Metrics


def write_metrics(path: str, metrics: MetricsReport, extra: Optional[Dict] = None) -> None:
    _prepare_output(path, backup=False)
    record = {'version': METRICS_VERSION, **metrics.to_dict(), **(extra or {})}
    with open(path, 'w') as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write('\n')


def read_metrics(path: str) -> MetricsReport:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Metrics file not found: {path}")
    with open(path, 'r') as f:
        try:
            record = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"Invalid JSON: {e.msg}", path, e.lineno) from None
    if record.get('version') != METRICS_VERSION:
        raise UnsupportedVersionError(f"Unsupported metrics version {record.get('version')}", path)
    return MetricsReport(record['failure'], record['cause'], record['traversal_time'],
                         record['distance_traveled'], record.get('adaptation_time'))


@dataclass(frozen=True)
class MetricsSummary:
    """Aggregate over a trial batch: failures out of trials, and means over completed runs."""

    label: str
    trials: int
    failures: int
    traversal_time: Optional[float]
    distance_traveled: Optional[float]
    adaptation_time: Optional[float]

    def as_row(self) -> List[str]:
        return [self.label, str(self.trials), str(self.failures), _fmt(self.traversal_time),
                _fmt(self.distance_traveled), _fmt(self.adaptation_time)]


def summarize(reports: Sequence[MetricsReport], label: str = 'run') -> MetricsSummary:
    """
    FR counts failed trials; TT and DT average the successful trials; AT averages
    the trials where it was measured. Means over no trials are None.
    """
    def mean(values):
        values = [v for v in values if v is not None]
        return float(np.mean(values)) if values else None

    done = [r for r in reports if not r.failure]
    return MetricsSummary(
        label=label,
        trials=len(reports),
        failures=sum(1 for r in reports if r.failure),
        traversal_time=mean([r.traversal_time for r in done]),
        distance_traveled=mean([r.distance_traveled for r in done]),
        adaptation_time=mean([r.adaptation_time for r in reports]),
    )


TABLE_COLUMNS = ('mode', 'trials', 'FR', 'TT_s', 'DT_m', 'AT_s')


def write_metrics_table(csv_path: str, text_path: Optional[str], summaries: Sequence[MetricsSummary]) -> None:
    """Write the aggregated table as CSV and, optionally, as an aligned text table."""
    _prepare_output(csv_path, backup=True)
    with open(csv_path, 'w', newline='') as f:
        f.write(f"{TABLE_MAGIC}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(TABLE_COLUMNS)
        for summary in summaries:
            writer.writerow(summary.as_row())
    if text_path:
        _prepare_output(text_path, backup=True)
        with open(text_path, 'w') as f:
            f.write(format_metrics_table(summaries))


def format_metrics_table(summaries: Sequence[MetricsSummary]) -> str:
    def cell(value: Optional[float]) -> str:
        return '--' if value is None else f"{value:.2f}"

    rows = [('Mode', 'FR', 'TT (s)', 'DT (m)', 'AT (s)')]
    for s in summaries:
        rows.append((s.label, f"{s.failures}/{s.trials}", cell(s.traversal_time),
                     cell(s.distance_traveled), cell(s.adaptation_time)))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ['  '.join(value.ljust(width) for value, width in zip(row, widths)).rstrip() for row in rows]
    lines.insert(1, '  '.join('-' * width for width in widths))
    return '\n'.join(lines) + '\n'


def read_metrics_table(path: str) -> List[Dict[str, str]]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Metrics table not found: {path}")
    with open(path, 'r', newline='') as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != TABLE_MAGIC:
        raise UnsupportedVersionError("Missing or unknown metrics table version line", path, 1)
    return list(csv.DictReader(lines[1:]))


# Loss curves and importance series


def write_loss_curve(path: str, curve: Sequence[LossBreakdown]) -> None:
    """Columns: iteration, total, nll_term (lambda1 * nll), goal_term (lambda2 * goal)."""
    _prepare_output(path, backup=False)
    with open(path, 'w', newline='') as f:
        f.write(f"{LOSS_MAGIC}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['iteration', 'total', 'nll_term', 'goal_term'])
        for i, loss in enumerate(curve):
            writer.writerow([i, _fmt(loss.total), _fmt(loss.nll_term), _fmt(loss.goal_term)])


def read_loss_curve(path: str) -> List[Dict[str, float]]:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Loss curve not found: {path}")
    with open(path, 'r', newline='') as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != LOSS_MAGIC:
        raise UnsupportedVersionError("Missing or unknown loss curve version line", path, 1)
    rows = []
    for number, row in enumerate(csv.DictReader(lines[1:]), start=3):
        try:
            rows.append({key: float(value) for key, value in row.items()})
        except (TypeError, ValueError) as e:
            raise FormatError(f"Malformed value: {e}", path, number) from None
    return rows


def write_importance(path: str, policy_names: Sequence[str], rows: Sequence[Tuple[str, int, float, Sequence[float]]]) -> None:
    """Rows of (trace label, tick, time, normalized importances)."""
    _prepare_output(path, backup=False)
    with open(path, 'w', newline='') as f:
        f.write(f"{IMPORTANCE_MAGIC}\n")
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['trace', 'tick', 'time'] + [f"importance_{n}" for n in policy_names])
        for label, tick, time, values in rows:
            writer.writerow([label, tick, _fmt(time)] + [_fmt(v) for v in values])
