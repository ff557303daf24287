"""Synthetic benchmark generators, CSV ingestion, scaling, and splitting."""

from __future__ import annotations

import csv as _csv
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng

TASKS = ("binary", "multiclass", "regression")


@dataclass
class ScalingRecord:
    """Per-column affine map applied by min-max scaling; invertible exactly."""

    mins: np.ndarray
    maxs: np.ndarray
    kept_columns: list[int]

    def inverse(self, X: np.ndarray) -> np.ndarray:
        span = self.maxs - self.mins
        return X * span + self.mins


@dataclass
class TargetScaling:
    mean: float
    std: float

    def inverse(self, y: np.ndarray) -> np.ndarray:
        return y * self.std + self.mean


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    task: str
    n_classes: int = 0
    column_names: list[str] = field(default_factory=list)
    scaling: ScalingRecord | None = None
    target_scaling: TargetScaling | None = None
    eta: np.ndarray | None = None  # latent response of the synthetic generators

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if np.any(~np.isfinite(self.X)):
            raise ValueError("covariates contain non-finite values")
        if not self.column_names:
            self.column_names = [f"x{i + 1}" for i in range(self.X.shape[1])]
        if self.task == "binary":
            self.n_classes = 2
        if self.task in ("binary", "multiclass"):
            labels = np.asarray(self.y, dtype=np.int64)
            if np.any((labels < 0) | (labels >= self.n_classes)):
                raise ValueError("labels outside [0, n_classes)")
            self.y = labels
        else:
            self.y = np.asarray(self.y, dtype=np.float64)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.X.shape[1]


def linear_response(X: np.ndarray) -> np.ndarray:
    """Noise-free latent response of the linear benchmark: 100 + x1 + x2."""
    return 100.0 + X[:, 0] + X[:, 1]


def nonlinear_response(X: np.ndarray) -> np.ndarray:
    """Latent response with interaction and squares:
    100 + x1 + x2 + x1*x2 + x1^2 + x2^2."""
    x1, x2 = X[:, 0], X[:, 1]
    return 100.0 + x1 + x2 + x1 * x2 + x1**2 + x2**2


def _gen_synthetic(n: int, rho: float, seed: int, response, tag: str) -> Dataset:
    if n < 2:
        raise ValueError("need at least two samples for the median split")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("dependence coefficient must lie in [0, 1]")
    stream = Rng(seed).stream(tag)
    X = stream.uniform(-10.0, 10.0, size=(n, 4))
    X[:, 2] = rho * X[:, 0] + (1.0 - rho) * X[:, 2]
    eta = response(X) + stream.normal(0.0, 0.01, size=n)
    y = (eta >= np.median(eta)).astype(np.int64)
    return Dataset(X, y, task="binary", eta=eta)


def gen_linear(n: int, rho: float, seed: int) -> Dataset:
    """Four U(-10, 10) covariates, x3 mixed toward x1 by ``rho``; the label is
    the median split of 100 + x1 + x2 + N(0, 0.01^2) noise (upper half is 1).
    x3 and x4 never enter the response."""
    return _gen_synthetic(n, rho, seed, linear_response, "linear-data")


def gen_nonlinear(n: int, rho: float, seed: int) -> Dataset:
    """Same setup as gen_linear with interaction and squared terms added."""
    return _gen_synthetic(n, rho, seed, nonlinear_response, "nonlinear-data")


class CsvError(ValueError):
    pass


def load_csv(path, target_column: str, task: str, n_classes: int | None = None) -> Dataset:
    """Read a headered numeric CSV into a Dataset.

    Feature cells must parse as floats. Classification targets may be
    numeric class indices or arbitrary strings; strings are label-encoded
    in order of first appearance down the column. Categorical *features*
    are not auto-encoded and must arrive numeric.
    """
    if task not in TASKS:
        raise CsvError(f"unknown task {task!r}")
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise CsvError(f"{path}: no data rows after the header")
    if target_column not in header:
        raise CsvError(f"{path}: target column {target_column!r} not in header {header}")
    t_idx = header.index(target_column)
    feat_names = [h for i, h in enumerate(header) if i != t_idx]

    feat_idx = [i for i in range(len(header)) if i != t_idx]
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
    raw_targets = [row[t_idx] for row in rows]
    try:
        # single C-level parse when every cell (target included) is numeric
        full = np.asarray(rows, dtype=np.float64)
        X = full[:, feat_idx]
    except ValueError:
        try:
            # target column may be non-numeric; parse features alone
            X = np.asarray([[row[i] for i in feat_idx] for row in rows], dtype=np.float64)
        except ValueError:
            for r, row in enumerate(rows):
                for c in feat_idx:
                    try:
                        float(row[c])
                    except ValueError:
                        raise CsvError(
                            f"{path}: non-numeric feature cell {row[c]!r} at row {r + 2}, "
                            f"column {header[c]!r}"
                        ) from None
            raise

    if task == "regression":
        try:
            y = np.array([float(t) for t in raw_targets])
        except ValueError:
            raise CsvError(f"{path}: regression target must be numeric") from None
        return Dataset(X, y, task="regression", column_names=feat_names)

    try:
        numeric = np.array([float(t) for t in raw_targets])
        if not np.all(numeric == numeric.astype(np.int64)):
            raise ValueError
        y = numeric.astype(np.int64)
    except ValueError:
        codes: dict[str, int] = {}
        y = np.array([codes.setdefault(t, len(codes)) for t in raw_targets], dtype=np.int64)
    if task == "binary":
        n_classes = 2
    elif n_classes is None:
        n_classes = int(y.max()) + 1
    return Dataset(X, y, task=task, n_classes=n_classes, column_names=feat_names)


def minmax_scale(ds: Dataset, on_constant: str = "error") -> tuple[Dataset, ScalingRecord]:
    """Map every column affinely onto [0, 1]; constant columns either raise
    or are dropped (``on_constant="drop"``)."""
    mins = ds.X.min(axis=0)
    maxs = ds.X.max(axis=0)
    constant = mins == maxs
    if np.any(constant):
        if on_constant == "error":
            bad = [ds.column_names[i] for i in np.nonzero(constant)[0]]
            raise ValueError(f"constant columns cannot be min-max scaled: {bad}")
        if on_constant != "drop":
            raise ValueError("on_constant must be 'error' or 'drop'")
    keep = np.nonzero(~constant)[0]
    record = ScalingRecord(mins[keep], maxs[keep], keep.tolist())
    scaled = (ds.X[:, keep] - record.mins) / (record.maxs - record.mins)
    out = Dataset(
        scaled,
        ds.y.copy(),
        task=ds.task,
        n_classes=ds.n_classes,
        column_names=[ds.column_names[i] for i in keep],
        scaling=record,
        target_scaling=ds.target_scaling,
        eta=ds.eta,
    )
    return out, record


def standardize_targets(ds: Dataset) -> tuple[Dataset, TargetScaling]:
    """Zero-mean unit-variance regression targets; keeps the inverse map."""
    if ds.task != "regression":
        raise ValueError("target standardization applies to regression tasks")
    mean = float(ds.y.mean())
    std = float(ds.y.std())
    if std == 0.0:
        raise ValueError("targets have zero variance")
    scaling = TargetScaling(mean, std)
    out = Dataset(
        ds.X.copy(),
        (ds.y - mean) / std,
        task="regression",
        column_names=list(ds.column_names),
        scaling=ds.scaling,
        target_scaling=scaling,
        eta=ds.eta,
    )
    return out, scaling


def split(ds: Dataset, n_train: int, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint seeded-shuffle split with exact sizes (n_train, n - n_train)."""
    if not 0 < n_train < ds.n:
        raise ValueError(f"n_train must lie in (0, {ds.n})")
    order = Rng(seed).stream("split").permutation(ds.n)
    tr, te = order[:n_train], order[n_train:]

    def take(idx):
        return Dataset(
            ds.X[idx],
            ds.y[idx],
            task=ds.task,
            n_classes=ds.n_classes,
            column_names=list(ds.column_names),
            scaling=ds.scaling,
            target_scaling=ds.target_scaling,
            eta=ds.eta[idx] if ds.eta is not None else None,
        )

    return take(tr), take(te)


def to_csv(ds: Dataset, path, target_column: str = "y") -> None:
    """Write the dataset in the same headered comma/'.'-decimal form read back
    by load_csv."""
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(ds.column_names + [target_column])
        for i in range(ds.n):
            target = int(ds.y[i]) if ds.task != "regression" else repr(float(ds.y[i]))
            writer.writerow([repr(float(v)) for v in ds.X[i]] + [target])
