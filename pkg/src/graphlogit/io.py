"""Text file formats, covariate preprocessing and report serialisation.

Node tables are CSV with header ``id,y,x1,...,xp``.  Edge lists hold one
edge per line as two labels separated by whitespace or a comma; blank lines
and lines starting with ``#`` are ignored.  Floats are written with
``repr`` so a save/load round trip is bit exact.
"""

from __future__ import annotations

import csv
import json
import os
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from .em import EmConfig, FitResult
from .graph import SbmConfig, default_sbm_config, from_edge_list
from .model import Dataset, FullParams
from .simulation import SimConfig, default_truth

__all__ = [
    "InputError",
    "LabeledDataset",
    "RunManifest",
    "PcaResult",
    "read_nodes",
    "read_edge_list",
    "load_dataset",
    "save_dataset",
    "standardize",
    "pca_fit",
    "pca_reduce",
    "read_features",
    "write_json",
    "read_json",
    "write_weights",
    "write_scores",
    "read_scores",
    "write_roc_points",
    "write_replicate_table",
    "fit_from_report",
    "sim_config_from_dict",
    "study_spec_from_dict",
]

_SPLIT = re.compile(r"[,\s]+")


class InputError(ValueError):
    """Malformed input file or configuration."""


@dataclass(frozen=True)
class LabeledDataset(Dataset):
    """A :class:`Dataset` that remembers the node label of every row."""

    ids: tuple = ()

    def __post_init__(self):
        super().__post_init__()
        ids = tuple(str(v) for v in self.ids) if self.ids else tuple(str(i) for i in range(self.n))
        if len(ids) != self.n:
            raise ValueError("need one id per node")
        object.__setattr__(self, "ids", ids)

    @property
    def index(self) -> dict:
        return {label: k for k, label in enumerate(self.ids)}


@dataclass
class RunManifest:
    command: str
    inputs: dict
    config: dict
    seed: int | None
    output: str | None
    version: str

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- tables

def _check_exists(path) -> None:
    if not os.path.isfile(path):
        raise InputError(f"{path}: file not found")


def read_nodes(path):
    """Parse a node table into ``(ids, X, Y)``."""
    _check_exists(path)
    with open(path, newline="") as fh:
        rows = [(k, r) for k, r in enumerate(csv.reader(fh), start=1)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise InputError(f"{path}: empty node table")
    line, header = rows[0]
    header = [h.strip() for h in header]
    if len(header) < 3 or header[0] != "id" or header[1] != "y":
        raise InputError(f"{path}:{line}: header must be 'id,y,x1,...,xp', got {','.join(header)}")
    ncol = len(header)
    ids, ys, xs, seen = [], [], [], set()
    for line, r in rows[1:]:
        if len(r) != ncol:
            raise InputError(f"{path}:{line}: expected {ncol} columns, got {len(r)}")
        label = r[0].strip()
        if label in seen:
            raise InputError(f"{path}:{line}: duplicate node id {label!r}")
        seen.add(label)
        y = r[1].strip()
        if y not in ("0", "1"):
            raise InputError(f"{path}:{line}: y must be 0 or 1, got {y!r}")
        try:
            x = [float(v) for v in r[2:]]
        except ValueError as exc:
            raise InputError(f"{path}:{line}: {exc}") from None
        if not all(np.isfinite(x)):
            raise InputError(f"{path}:{line}: non-finite covariate")
        ids.append(label)
        ys.append(int(y))
        xs.append(x)
    if not ids:
        raise InputError(f"{path}: no data rows")
    return ids, np.array(xs, dtype=float), np.array(ys, dtype=float)


def _edge_lines(path):
    _check_exists(path)
    with open(path) as fh:
        for line, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            parts = [p for p in _SPLIT.split(text) if p]
            if len(parts) != 2:
                raise InputError(f"{path}:{line}: expected two node labels, got {text!r}")
            yield line, parts[0], parts[1]


def read_edge_list(path, index: dict | None = None):
    """Read an edge list.

    With ``index`` (label to row), unknown labels are errors.  Without it,
    labels are numbered in order of first appearance.  Returns
    ``(graph, labels)``.
    """
    fixed = index is not None
    index = dict(index) if fixed else {}
    pairs = []
    for line, a, b in _edge_lines(path):
        ends = []
        for label in (a, b):
            if label not in index:
                if fixed:
                    raise InputError(f"{path}:{line}: edge references unknown node id {label!r}")
                index[label] = len(index)
            ends.append(index[label])
        if ends[0] == ends[1]:
            raise InputError(f"{path}:{line}: self-loop on node {a!r}")
        pairs.append(ends)
    labels = sorted(index, key=index.get)
    return from_edge_list(pairs, len(index)), labels


def load_dataset(nodes_path, edges_path, standardize_x: bool = False) -> LabeledDataset:
    ids, X, Y = read_nodes(nodes_path)
    index = {label: k for k, label in enumerate(ids)}
    graph, _ = read_edge_list(edges_path, index=index)
    if standardize_x:
        X = standardize(X)
    return LabeledDataset(X=X, Y=Y, graph=graph, ids=tuple(ids))


def save_dataset(data: Dataset, nodes_path, edges_path, ids=None) -> None:
    if ids is None:
        ids = getattr(data, "ids", None) or [str(i) for i in range(data.n)]
    ids = [str(v) for v in ids]
    with open(nodes_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "y"] + [f"x{k + 1}" for k in range(data.p)])
        for label, y, x in zip(ids, data.Y, data.X):
            w.writerow([label, int(y)] + [repr(float(v)) for v in x])
    with open(edges_path, "w") as fh:
        fh.write("# undirected edge list, one edge per line\n")
        for i, j in data.graph.edges():
            fh.write(f"{ids[i]} {ids[j]}\n")


# ---------------------------------------------------------------- covariates

def standardize(X) -> np.ndarray:
    """Centre each column and scale it to unit (population) variance."""
    X = np.asarray(X, dtype=float)
    sd = X.std(axis=0)
    if np.any(sd == 0):
        raise InputError("cannot standardise a constant covariate column")
    return (X - X.mean(axis=0)) / sd


@dataclass(frozen=True)
class PcaResult:
    components: np.ndarray        # (k, d) unit rows
    scores: np.ndarray            # (n, k)
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray
    mean: np.ndarray


def pca_fit(features, k: int, rank_tol: float = 1e-10) -> PcaResult:
    """Principal components of the column-centred matrix.

    The covariance is diagonalised on whichever of the ``d x d`` or
    ``n x n`` sides is smaller.  Each component is signed so that its
    largest-magnitude loading is positive.
    """
    F = np.asarray(features, dtype=float)
    if F.ndim != 2:
        raise ValueError("features must be a 2-d array")
    n, d = F.shape
    if not 1 <= k <= min(n, d):
        raise ValueError(f"k must lie in [1, {min(n, d)}], got {k}")
    mean = F.mean(axis=0)
    Fc = F - mean
    denom = max(n - 1, 1)
    if d <= n:
        vals, vecs = np.linalg.eigh(Fc.T @ Fc / denom)
        vals, vecs = vals[::-1], vecs[:, ::-1]
        V = vecs[:, :k]
    else:
        vals, vecs = np.linalg.eigh(Fc @ Fc.T / denom)
        vals, vecs = vals[::-1], vecs[:, ::-1]
        lead = np.clip(vals[:k], 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            V = Fc.T @ vecs[:, :k] / np.sqrt(lead * denom)
    vals = np.clip(vals, 0.0, None)
    top = vals[0] if vals.size else 0.0
    rank = int(np.sum(vals > rank_tol * max(top, np.finfo(float).tiny)))
    if top <= 0 or k > rank:
        raise ValueError(f"k = {k} exceeds the rank ({rank}) of the centred features")
    pick = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[pick, np.arange(k)])
    V = V * signs
    total = vals.sum()
    return PcaResult(
        components=V.T.copy(),
        scores=Fc @ V,
        explained_variance=vals[:k].copy(),
        explained_variance_ratio=vals[:k] / total,
        mean=mean,
    )


def pca_reduce(features, k: int) -> np.ndarray:
    return pca_fit(features, k).scores


def read_features(path):
    """CSV with header ``id,f1,...,fd``.  Returns ``(ids, F)``."""
    _check_exists(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "id" or len(header) < 2:
            raise InputError(f"{path}:1: header must start with 'id'")
        ids, rows = [], []
        for line, r in enumerate(reader, start=2):
            if not r:
                continue
            if len(r) != len(header):
                raise InputError(f"{path}:{line}: expected {len(header)} columns, got {len(r)}")
            try:
                rows.append([float(v) for v in r[1:]])
            except ValueError as exc:
                raise InputError(f"{path}:{line}: {exc}") from None
            ids.append(r[0].strip())
    return ids, np.array(rows, dtype=float)


# ---------------------------------------------------------------- reports

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path, obj) -> str:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        return text
    with open(path, "w") as fh:
        fh.write(text)
    return text


def read_json(path) -> dict:
    _check_exists(path)
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None


def write_weights(path, ids, weights) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "weight"])
        for label, v in zip(ids, weights):
            w.writerow([label, repr(float(v))])


def write_scores(path, ids, scores, labels=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "score"] + (["y"] if labels is not None else []))
        for k, (label, v) in enumerate(zip(ids, scores)):
            row = [label, repr(float(v))]
            if labels is not None:
                row.append(int(labels[k]))
            w.writerow(row)


def read_scores(path):
    """Read ``id,score[,y]``.  Returns ``(ids, scores, labels or None)``."""
    _check_exists(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "score" not in reader.fieldnames:
            raise InputError(f"{path}:1: header must contain a 'score' column")
        has_y = "y" in reader.fieldnames
        ids, scores, labels = [], [], []
        for line, row in enumerate(reader, start=2):
            try:
                scores.append(float(row["score"]))
            except (TypeError, ValueError):
                raise InputError(f"{path}:{line}: bad score {row['score']!r}") from None
            ids.append(row.get("id", str(line - 2)))
            if has_y:
                if row["y"] not in ("0", "1"):
                    raise InputError(f"{path}:{line}: y must be 0 or 1")
                labels.append(int(row["y"]))
    return ids, np.array(scores), (np.array(labels) if has_y else None)


def write_roc_points(path, roc) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for f, t in roc.points:
            w.writerow([repr(float(f)), repr(float(t))])


def write_replicate_table(path, report) -> None:
    """Flat per-replicate CSV with one row per replicate."""
    keys = []
    rows = []
    for rec in report.records:
        flat = {}
        for key, val in rec.items():
            if key == "seed":
                flat["seed"] = val[0]
                flat["replicate_stream"] = val[1]
            elif isinstance(val, list):
                names = _vector_names(key, len(val))
                flat.update(zip(names, val))
            else:
                flat[key] = val
        for key in flat:
            if key not in keys:
                keys.append(key)
        rows.append(flat)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for flat in rows:
            w.writerow([_cell(flat.get(k, "")) for k in keys])


def _vector_names(key, size):
    if key == "em" and size == 7:
        from .simulation import PARAM_NAMES
        return [f"em_{nm}" for nm in PARAM_NAMES]
    if key == "logistic" and size == 3:
        return ["logistic_beta0", "logistic_beta1", "logistic_beta2"]
    return [f"{key}_{k}" for k in range(size)]


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def fit_from_report(report: dict) -> FitResult:
    """Rebuild a :class:`FitResult` from a ``fit`` command report."""
    try:
        fit = report["fit"]
        params = FullParams.from_dict(fit["params"])
        weights = np.asarray(fit["weights"], dtype=float)
        return FitResult(
            params=params,
            weights=weights,
            iterations=int(fit["iterations"]),
            converged=bool(fit["converged"]),
            marginal_loglik_trace=list(fit["marginal_loglik_trace"]),
            init=FullParams.from_dict(fit["init"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"not a fit report: {exc}") from None


# ---------------------------------------------------------------- configs

_SIM_KEYS = {
    "case", "delta", "delta_true", "theta_true", "sbm", "replicates", "test_B",
    "alpha", "seed", "x2_variance", "fixed_graph", "empty_graph", "grid_levels",
    "n_workers", "em",
}
_STUDY_KEYS = {"kind", "deltas", "estimator"}


def _sbm_from_dict(d) -> SbmConfig:
    if d is None or d == "default":
        return default_sbm_config()
    try:
        return SbmConfig(block_sizes=tuple(int(b) for b in d["block_sizes"]),
                         P=np.asarray(d["P"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise InputError(f"sbm needs 'block_sizes' and 'P': {exc}") from None


def sim_config_from_dict(d: dict, allowed_extra=()) -> SimConfig:
    """Build a :class:`SimConfig` from a parsed JSON config.

    Unknown keys are rejected so that typos do not silently fall back to
    defaults.
    """
    if not isinstance(d, dict):
        raise InputError("config must be a JSON object")
    unknown = set(d) - _SIM_KEYS - set(allowed_extra)
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    try:
        if "case" in d:
            kw["case"] = d["case"]
        delta = d.get("delta_true", d.get("delta"))
        if delta is not None:
            kw["delta_true"] = float(delta)
        if "theta_true" in d:
            base = default_truth().to_dict()
            base.update(d["theta_true"])
            kw["theta_true"] = FullParams.from_dict(base)
        if "sbm" in d:
            kw["sbm"] = _sbm_from_dict(d["sbm"])
        for key, cast in (("replicates", int), ("test_B", int), ("alpha", float),
                          ("seed", int), ("x2_variance", float), ("fixed_graph", bool),
                          ("empty_graph", bool), ("n_workers", int)):
            if key in d:
                kw[key] = cast(d[key])
        if "grid_levels" in d:
            kw["grid_levels"] = tuple(float(v) for v in d["grid_levels"])
        if "em" in d:
            kw["em"] = EmConfig(**d["em"])
        return SimConfig(**kw)
    except InputError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise InputError(f"invalid config: {exc}") from None


@dataclass(frozen=True)
class StudySpec:
    kind: str
    sim: SimConfig
    deltas: tuple
    estimator: str = "em"
    raw: dict = field(default_factory=dict)


def study_spec_from_dict(d: dict) -> StudySpec:
    if not isinstance(d, dict):
        raise InputError("config must be a JSON object")
    kind = d.get("kind")
    if kind not in ("size_power", "bias_mse"):
        raise InputError("study config needs kind 'size_power' or 'bias_mse'")
    sim = sim_config_from_dict({k: v for k, v in d.items() if k not in _STUDY_KEYS})
    default = (0.0, 0.01, 0.03, 0.05, 0.10) if kind == "size_power" else (0.1, 0.3)
    try:
        deltas = tuple(float(v) for v in d.get("deltas", default))
    except (TypeError, ValueError) as exc:
        raise InputError(f"deltas must be numbers: {exc}") from None
    estimator = d.get("estimator", "em")
    if estimator not in ("em", "logistic", "both"):
        raise InputError(f"unknown estimator {estimator!r}")
    return StudySpec(kind, sim, deltas, estimator, dict(d))
