"""Cohort ingestion: labeled point clouds, normalization, splits, run configuration.

A cohort is an ordered list of point clouds (one dense n x d matrix each)
plus per-cloud targets. Matrix files are CSV or the HPMX binary format;
labels live in a JSON manifest so matrix files stay reusable as raw dumps.
"""

from __future__ import annotations

import json
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, LoadError

HPMX_MAGIC = b"HPMX"

TASK_CLASSIFICATION = "classification"
TASK_REGRESSION = "regression"

POOLING_MODES = ("mean", "sum", "mean+max")
ORIENTATIONS = ("unoriented", "oriented")


@dataclass(frozen=True)
class PointCloud:
    """One point cloud: n points (rows) with d features (columns)."""

    points: np.ndarray
    id: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise LoadError(f"cloud '{self.id}': expected a 2-D matrix with n,d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise LoadError(f"cloud '{self.id}': non-finite value at row {bad[0]}, column {bad[1]}")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class Cohort:
    """An ordered set of point clouds with one target per cloud."""

    clouds: tuple
    labels: np.ndarray
    task: str

    def __post_init__(self):
        clouds = tuple(self.clouds)
        if len(clouds) == 0:
            raise LoadError("cohort is empty")
        d = clouds[0].d
        for c in clouds:
            if c.d != d:
                raise LoadError(f"cloud '{c.id}' has {c.d} features, expected {d} like the rest of the cohort")
        if self.task not in (TASK_CLASSIFICATION, TASK_REGRESSION):
            raise LoadError(f"unknown task '{self.task}'")
        if self.task == TASK_CLASSIFICATION:
            labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if labels.min(initial=0) < 0:
                raise LoadError("classification labels must be non-negative class indices")
        else:
            labels = np.asarray(self.labels, dtype=np.float64)
            if labels.ndim == 1:
                labels = labels[:, None]
            if not np.all(np.isfinite(labels)):
                raise LoadError("regression targets must be finite")
        if labels.shape[0] != len(clouds):
            raise LoadError(f"{labels.shape[0]} labels for {len(clouds)} clouds")
        object.__setattr__(self, "clouds", clouds)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.clouds)

    @property
    def d(self) -> int:
        return self.clouds[0].d

    @property
    def num_classes(self) -> int:
        if self.task != TASK_CLASSIFICATION:
            raise ValueError("num_classes is only defined for classification cohorts")
        return int(self.labels.max()) + 1

    @property
    def target_dim(self) -> int:
        if self.task == TASK_CLASSIFICATION:
            return self.num_classes
        return self.labels.shape[1]

    def to_bytes(self) -> bytes:
        """Canonical byte serialization (used to assert determinism)."""
        head = {
            "task": self.task,
            "ids": [c.id for c in self.clouds],
            "labels": self.labels.tolist(),
        }
        blob = json.dumps(head, sort_keys=True).encode()
        parts = [struct.pack("<I", len(blob)), blob]
        for c in self.clouds:
            parts.append(hpmx_bytes(c.points))
        return b"".join(parts)


@dataclass(frozen=True)
class RunConfig:
    """Pipeline knobs; defaults follow the reference training setup."""

    num_views: int = 4
    bandwidth: float = 1.0
    vr_threshold: float = 0.5
    max_order: int = 1
    num_scales: int = 4
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    epochs: int = 100
    seed: int = 0
    pooling: str = "mean"
    # artifact plumbing beyond the core knobs
    hidden_dim: int = 128
    batch_size: int = 1
    include_lowpass: bool = True
    include_raw: bool = True
    freeze_structure: bool = False
    simplex_budget: int = 5_000_000
    orientation: str = "unoriented"
    threads: int = 1

    def __post_init__(self):
        if self.num_views < 1:
            raise ConfigError("num_views must be >= 1")
        if not (self.bandwidth > 0):
            raise ConfigError("bandwidth must be positive")
        if not (0.0 < self.vr_threshold < 1.0):
            raise ConfigError("vr_threshold must lie in (0, 1)")
        if self.max_order < 0:
            raise ConfigError("max_order must be >= 0")
        if self.num_scales < 1:
            raise ConfigError("num_scales must be >= 1")
        if not (self.learning_rate >= 0):
            raise ConfigError("learning_rate must be non-negative")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.pooling not in POOLING_MODES:
            raise ConfigError(f"pooling must be one of {POOLING_MODES}")
        if self.orientation not in ORIENTATIONS:
            raise ConfigError(f"orientation must be one of {ORIENTATIONS}")
        if self.hidden_dim < 1 or self.batch_size < 1 or self.simplex_budget < 1:
            raise ConfigError("hidden_dim, batch_size and simplex_budget must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def updated(self, **kwargs) -> "RunConfig":
        unknown = set(kwargs) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        return replace(self, **kwargs)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def config_from_file(path) -> dict:
    """Parse a `key = value` config file into a dict of RunConfig kwargs."""
    known = {f.name: f.type for f in fields(RunConfig)}
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got '{raw.strip()}'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown config key '{key}'")
        out[key] = _parse_config_value(val.strip().strip('"').strip("'"))
    return out


def _parse_config_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


# ---------------------------------------------------------------------------
# matrix file IO

def hpmx_bytes(matrix: np.ndarray) -> bytes:
    m = np.ascontiguousarray(np.asarray(matrix, dtype=np.float64))
    if m.ndim == 1:
        m = m[None, :]
    header = HPMX_MAGIC + struct.pack("<II", m.shape[0], m.shape[1])
    return header + m.astype("<f8").tobytes()


def write_hpmx(path, matrix: np.ndarray) -> None:
    Path(path).write_bytes(hpmx_bytes(matrix))


def read_hpmx(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != HPMX_MAGIC:
        raise LoadError(f"{path}: not an HPMX file (bad magic)")
    n, d = struct.unpack("<II", raw[4:12])
    expect = 12 + 8 * n * d
    if len(raw) != expect:
        raise LoadError(f"{path}: truncated HPMX payload ({len(raw)} bytes, expected {expect})")
    return np.frombuffer(raw[12:], dtype="<f8").reshape(n, d).astype(np.float64)


def read_csv_matrix(path) -> np.ndarray:
    """Comma-separated numeric matrix, `.` decimal separator, optional single header row."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            cells = [c.strip() for c in line.split(",")]
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header row
                bad = next(c for c in cells if not _is_float(c))
                raise LoadError(f"{path}: non-numeric cell '{bad}' at row {lineno}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise LoadError(f"{path}: ragged row {lineno} has {len(vals)} cells, expected {width}")
            rows.append((lineno, vals))
    if not rows:
        raise LoadError(f"{path}: no numeric rows")
    mat = np.array([v for _, v in rows], dtype=np.float64)
    bad = np.argwhere(~np.isfinite(mat))
    if bad.size:
        i, j = bad[0]
        raise LoadError(f"{path}: non-finite value at row {rows[i][0]}, column {j}")
    return mat


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def read_matrix(path) -> np.ndarray:
    """Dispatch on the HPMX magic bytes, else parse as CSV."""
    p = Path(path)
    if not p.exists():
        raise LoadError(f"{path}: file not found")
    with open(p, "rb") as fh:
        magic = fh.read(4)
    if magic == HPMX_MAGIC:
        return read_hpmx(p)
    return read_csv_matrix(p)


# ---------------------------------------------------------------------------
# cohort loading

def normalize_cohort_points(mats) -> list:
    """Z-score every column over the union of all points; constant columns map to 0."""
    stacked = np.vstack(mats)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    return [(m - mean) / scale for m in mats]


def assemble_cohort(mats, labels, task: str, ids=None, normalize: bool = True) -> Cohort:
    """Build a validated, optionally cohort-normalized Cohort from raw matrices."""
    if ids is None:
        ids = [f"cloud{i}" for i in range(len(mats))]
    mats = [np.asarray(m, dtype=np.float64) for m in mats]
    d0 = mats[0].shape[1] if mats[0].ndim == 2 else -1
    for m, i in zip(mats, ids):
        if m.ndim != 2 or m.shape[1] != d0:
            raise LoadError(f"cloud '{i}': inconsistent feature count (expected d={d0})")
    if normalize:
        mats = normalize_cohort_points(mats)
    clouds = tuple(PointCloud(m, id=i) for m, i in zip(mats, ids))
    return Cohort(clouds=clouds, labels=labels, task=task)


def load_cohort(manifest_path, normalize: bool = True, threads: int = 1) -> Cohort:
    """Load a cohort from a JSON manifest of {file, label, id?} entries.

    Matrix files may be CSV or HPMX; paths are resolved relative to the
    manifest. Features are z-scored over the union of all points in the
    cohort (columns with zero variance are left at 0).
    """
    mpath = Path(manifest_path)
    if not mpath.exists():
        raise LoadError(f"{manifest_path}: manifest not found")
    try:
        doc = json.loads(mpath.read_text())
    except json.JSONDecodeError as e:
        raise LoadError(f"{manifest_path}: invalid JSON ({e})") from None
    if not isinstance(doc, dict) or "task" not in doc or "items" not in doc:
        raise LoadError(f"{manifest_path}: expected an object with 'task' and 'items'")
    task = doc["task"]
    items = doc["items"]
    if task not in (TASK_CLASSIFICATION, TASK_REGRESSION):
        raise LoadError(f"{manifest_path}: unknown task '{task}'")
    if not isinstance(items, list) or not items:
        raise LoadError(f"{manifest_path}: 'items' must be a non-empty list")

    paths, labels, ids = [], [], []
    for i, item in enumerate(items):
        if "file" not in item or "label" not in item:
            raise LoadError(f"{manifest_path}: item {i} is missing 'file' or 'label'")
        paths.append(mpath.parent / item["file"])
        labels.append(item["label"])
        ids.append(item.get("id", Path(item["file"]).stem))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            mats = list(pool.map(read_matrix, paths))
    else:
        mats = [read_matrix(p) for p in paths]

    if task == TASK_CLASSIFICATION:
        label_arr = np.array(labels, dtype=np.int64)
    else:
        # scalar or vector regression targets
        label_arr = np.array([np.atleast_1d(np.asarray(v, dtype=np.float64)) for v in labels])
    return assemble_cohort(mats, label_arr, task, ids=ids, normalize=normalize)


def subset_cohort(cohort: Cohort, idx) -> Cohort:
    idx = np.asarray(idx, dtype=np.int64)
    return Cohort(
        clouds=tuple(cohort.clouds[i] for i in idx),
        labels=cohort.labels[idx],
        task=cohort.task,
    )


def with_labels(cohort: Cohort, labels, task: str) -> Cohort:
    """Same clouds, new targets (e.g. swap class labels for topology summaries)."""
    return Cohort(clouds=cohort.clouds, labels=labels, task=task)


def split_cohort(cohort: Cohort, train_fraction: float, seed: int):
    """Deterministic train/test split; stratified per class for classification.

    Per-class train counts use round-half-up so proportions are preserved up
    to rounding. A class with a single member goes to train with a warning.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ConfigError("train_fraction must lie in (0, 1)")
    if len(cohort) < 2:
        raise ConfigError("need at least 2 clouds to split")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    if cohort.task == TASK_CLASSIFICATION:
        for cls in np.unique(cohort.labels):
            members = np.flatnonzero(cohort.labels == cls)
            if members.size == 1:
                warnings.warn(f"class {cls} has a single cloud; assigning it to train")
                train_idx.extend(members.tolist())
                continue
            perm = members[rng.permutation(members.size)]
            n_train = int(np.floor(train_fraction * members.size + 0.5))
            n_train = min(max(n_train, 1), members.size - 1)
            train_idx.extend(perm[:n_train].tolist())
            test_idx.extend(perm[n_train:].tolist())
    else:
        perm = rng.permutation(len(cohort))
        n_train = int(np.floor(train_fraction * len(cohort) + 0.5))
        n_train = min(max(n_train, 1), len(cohort) - 1)
        train_idx = perm[:n_train].tolist()
        test_idx = perm[n_train:].tolist()
    train_idx.sort()
    test_idx.sort()
    return subset_cohort(cohort, train_idx), subset_cohort(cohort, test_idx)
