"""Dataset ingestion, fold splitting, standardization, and synthetic data.

Benchmark CSVs are user-supplied local files (see ``scripts/fetch_uci.py``
for a download helper); nothing here touches the network.  All randomized
operations take explicit seeds and are bit-reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError


@dataclass
class Dataset:
    X: np.ndarray   # [N,Q]
    y: np.ndarray   # [N,K]
    name: str = ""
    task: str = "regression"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.ndim == 1:
            self.y = self.y[:, None]
        if len(self.X) != len(self.y):
            raise DataError(
                f"feature/target row counts differ: {len(self.X)} vs {len(self.y)}"
            )
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise DataError(f"dataset {self.name!r} contains NaN/Inf")

    @property
    def N(self) -> int:
        return len(self.X)

    @property
    def Q(self) -> int:
        return self.X.shape[1]


@dataclass
class StandardizeParams:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray


def load_csv(path, target_cols=-1, delimiter: str = ",",
             header: bool = False, name: str = "",
             task: str = "regression") -> Dataset:
    """Load a numeric CSV; ``target_cols`` selects target column(s) by index.

    Unparseable cells and ragged rows are rejected with their line number.
    """
    if isinstance(target_cols, int):
        target_cols = [target_cols]
    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open dataset file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        width = None
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            row = [cell for cell in row if cell.strip() != ""] \
                if delimiter == " " else row
            if not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DataError(
                    f"{path}:{lineno}: ragged row ({len(row)} cells, expected {width})"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    ncols = arr.shape[1]
    tset = {c % ncols for c in target_cols}
    fcols = [c for c in range(ncols) if c not in tset]
    tcols = sorted(tset)
    return Dataset(arr[:, fcols], arr[:, tcols],
                   name=name or str(path), task=task)


def make_folds(dataset: Dataset, n_folds: int, seed: int,
               test_fraction: float = 0.1):
    """Seeded independent resampled train/test splits (not disjoint CV folds)."""
    if n_folds < 1:
        raise ConfigError("n_folds must be >= 1")
    rng = np.random.default_rng(seed)
    n_test = max(1, int(round(dataset.N * test_fraction)))
    folds = []
    for _ in range(n_folds):
        perm = rng.permutation(dataset.N)
        folds.append((np.sort(perm[n_test:]), np.sort(perm[:n_test])))
    return folds


def standardize(train: Dataset, test: Dataset):
    """Zero-mean unit-std transform fit on the training split only.

    Constant feature columns are centered but not scaled (std treated as 1).
    Returns (train', test', params).
    """
    x_mean = train.X.mean(axis=0)
    x_std = train.X.std(axis=0)
    x_std = np.where(x_std == 0.0, 1.0, x_std)
    y_mean = train.y.mean(axis=0)
    y_std = train.y.std(axis=0)
    y_std = np.where(y_std == 0.0, 1.0, y_std)
    params = StandardizeParams(x_mean, x_std, y_mean, y_std)

    def _apply(ds: Dataset) -> Dataset:
        return Dataset((ds.X - x_mean) / x_std, (ds.y - y_mean) / y_std,
                       name=ds.name, task=ds.task)

    return _apply(train), _apply(test), params


def destandardize_target(pred: np.ndarray, params: StandardizeParams) -> np.ndarray:
    return np.asarray(pred) * params.y_std + params.y_mean


def synth_classification(n: int, seed: int, n_classes: int = 2,
                         n_features: int = 4, separation: float = 4.0,
                         sample_seed: int | None = None) -> Dataset:
    """Gaussian-blobs classification dataset with well-separated class means.

    ``seed`` fixes the class means (the distribution); ``sample_seed``
    (default: same as ``seed``) fixes the draw, so a fresh in-distribution
    sample uses the same ``seed`` with a different ``sample_seed``.
    """
    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, 1.0, size=(n_classes, n_features))
    dmin = min(np.linalg.norm(means[i] - means[j])
               for i in range(n_classes) for j in range(i + 1, n_classes))
    means *= separation / max(1e-12, dmin)
    srng = rng if sample_seed is None else np.random.default_rng(sample_seed)
    labels = srng.integers(0, n_classes, size=n)
    X = means[labels] + srng.normal(0.0, 1.0, size=(n, n_features))
    return Dataset(X, labels.astype(np.float64), name="synth-blobs",
                   task="classification")


def synth_regression(n: int, seed: int, n_features: int = 6,
                     noise: float = 0.1) -> Dataset:
    """Smooth nonlinear regression surface with additive Gaussian noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, size=(n, n_features))
    w = rng.normal(0.0, 1.0, size=n_features)
    y = np.sin(X @ w) + 0.5 * (X[:, 0] * X[:, 1 % n_features]) \
        + noise * rng.normal(0.0, 1.0, size=n)
    return Dataset(X, y, name="synth-regression", task="regression")


def corrupt_gaussian(X: np.ndarray, sigma_scale: float, seed: int) -> np.ndarray:
    """Additive feature-scaled Gaussian noise: N(0, (sigma_scale*std_j)^2)."""
    X = np.asarray(X, dtype=np.float64)
    if sigma_scale == 0.0:
        return X.copy()
    rng = np.random.default_rng(seed)
    stds = X.std(axis=0)
    return X + rng.normal(0.0, 1.0, size=X.shape) * (sigma_scale * stds)


def corrupt_permute_features(X: np.ndarray, seed: int) -> np.ndarray:
    """Shuffle feature columns (a cheap tabular domain-shift analogue)."""
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(X.shape[1])
    # ensure an actual shift for >1 feature
    if X.shape[1] > 1 and np.array_equal(perm, np.arange(X.shape[1])):
        perm = np.roll(perm, 1)
    return X[:, perm]


def dataset_manifest(path, dataset: Dataset, target_cols) -> dict:
    """Ingestion record: file checksum, N, Q, and column mapping."""
    digest = hashlib.sha256(open(path, "rb").read()).hexdigest()
    return {
        "file": str(path),
        "sha256": digest,
        "N": dataset.N,
        "Q": dataset.Q,
        "target_cols": target_cols if isinstance(target_cols, list) else [target_cols],
        "task": dataset.task,
    }


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
