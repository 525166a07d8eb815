"""Datasets: CSV ingestion, synthetic generators, standardization, folds."""

from __future__ import annotations

import csv
import itertools
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = [
    "Dataset",
    "StandardizationStats",
    "FoldAssignment",
    "load_csv",
    "save_csv",
    "monk3_rule",
    "gen_monk3",
    "gen_toy2d",
    "gen_highdim",
    "fit_standardizer",
    "apply_standardizer",
    "stratified_kfold",
    "MONK_CARDINALITIES",
    "MONK3_NOISE_FLIPS",
]

MONK_CARDINALITIES = (3, 3, 2, 3, 4, 2)
MONK3_NOISE_FLIPS = 22  # round(0.05 * 432)


@dataclass
class Dataset:
    """Feature matrix with integer class labels in ``{0..class_count-1}``."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    feature_names: list[str] | None = None
    label_names: list[str] | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.labels)
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise DataError(
                f"labels must be a vector of length {X.shape[0]}, got shape {y.shape}"
            )
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("empty dataset")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.mod(y, 1) == 0):
                raise DataError("labels must be integer class indices")
        y = y.astype(np.int64)
        L = int(self.class_count)
        if L < 1:
            raise DataError("class_count must be >= 1")
        if y.min() < 0 or y.max() >= L:
            raise DataError(f"labels must lie in 0..{L - 1}")
        if L > 1:
            missing = np.setdiff1d(np.arange(L), y)
            if missing.size:
                raise DataError(f"classes without samples: {missing.tolist()}")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain NaN or Inf")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length does not match feature count")
        self.features = X
        self.labels = y
        self.class_count = L

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def subset(self, index) -> "Dataset":
        return Dataset(
            self.features[index],
            self.labels[index],
            self.class_count,
            self.feature_names,
            self.label_names,
        )

    def with_features(self, features, feature_names=None) -> "Dataset":
        return Dataset(features, self.labels, self.class_count, feature_names, self.label_names)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def load_csv(path, label_column="label", has_header=True) -> Dataset:
    """Read a comma-separated file into a :class:`Dataset`.

    ``label_column`` is a header name or a 0-based column index. Label values
    are re-indexed to ``0..L-1`` in order of first appearance; the original
    values are kept in ``Dataset.label_names``.
    """
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    header = None
    if has_header:
        if not rows:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no data rows")

    ncol = len(rows[0])
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None:
            raise DataError("label column given by name but the file has no header")
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)
        if label_idx < 0:
            label_idx += ncol
        if not 0 <= label_idx < ncol:
            raise DataError(f"label column index {label_column} out of range")
    if ncol < 2:
        raise DataError("need at least one feature column besides the label")

    feature_cols = [j for j in range(ncol) if j != label_idx]
    X = np.empty((len(rows), len(feature_cols)))
    raw_labels = []
    first_line = 2 if has_header else 1
    for i, row in enumerate(rows):
        line = i + first_line
        if len(row) != ncol:
            raise DataError(f"{path}: row {line} has {len(row)} columns, expected {ncol}")
        raw_labels.append(row[label_idx].strip())
        for k, j in enumerate(feature_cols):
            cell = row[j].strip()
            try:
                X[i, k] = float(cell)
            except ValueError:
                name = header[j] if header else str(j)
                raise DataError(
                    f"{path}: non-numeric value {cell!r} at row {line}, column {name!r}"
                ) from None
            if not np.isfinite(X[i, k]):
                name = header[j] if header else str(j)
                raise DataError(f"{path}: non-finite value at row {line}, column {name!r}")

    label_names: list[str] = []
    lookup: dict[str, int] = {}
    y = np.empty(len(rows), dtype=np.int64)
    for i, lab in enumerate(raw_labels):
        if lab not in lookup:
            lookup[lab] = len(label_names)
            label_names.append(lab)
        y[i] = lookup[lab]

    names = [header[j] for j in feature_cols] if header else None
    return Dataset(X, y, len(label_names), names, label_names)


def save_csv(dataset: Dataset, path, label_column="label") -> None:
    """Write ``dataset`` in the format :func:`load_csv` reads (header row, label last)."""
    names = dataset.feature_names or [f"x{j + 1}" for j in range(dataset.n_features)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + [label_column])
        for x, c in zip(dataset.features, dataset.labels):
            label = dataset.label_names[c] if dataset.label_names else int(c)
            writer.writerow([repr(float(v)) for v in x] + [label])


# --------------------------------------------------------------------------
# Generators
# --------------------------------------------------------------------------


def monk3_rule(X) -> np.ndarray:
    """Noise-free Monk3 label for rows of attributes ``(x1..x6)``."""
    X = np.asarray(X)
    x2, x4, x5 = X[..., 1], X[..., 3], X[..., 4]
    return (((x5 == 3) & (x4 == 1)) | ((x5 != 4) & (x2 != 3))).astype(np.int64)


def gen_monk3(seed: int) -> Dataset:
    """All 432 MONK attribute combinations with the Monk3 target.

    Exactly :data:`MONK3_NOISE_FLIPS` labels, chosen uniformly without
    replacement from ``seed``, are flipped.
    """
    grid = np.array(
        list(itertools.product(*[range(1, k + 1) for k in MONK_CARDINALITIES])),
        dtype=np.float64,
    )
    labels = monk3_rule(grid)
    rng = np.random.default_rng(seed)
    flip = rng.choice(len(grid), size=MONK3_NOISE_FLIPS, replace=False)
    labels[flip] = 1 - labels[flip]
    names = [f"x{j}" for j in range(1, 7)]
    return Dataset(grid, labels, 2, names, ["0", "1"])


def gen_toy2d(n_per_class: int, seed: int) -> Dataset:
    """Two overlapping Gaussian classes separable only along ``(1, -1)``.

    Class means are ``-+1.25 * (1, -1)``; the shared covariance has variance 9
    along ``(1, 1)/sqrt(2)`` and 0.25 along ``(1, -1)/sqrt(2)``.
    """
    if n_per_class < 2:
        raise DataError("n_per_class must be >= 2")
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    R = np.array([[c, -s], [s, c]])
    cov = R @ np.diag([9.0, 0.25]) @ R.T
    chol = np.linalg.cholesky(cov)
    rng = np.random.default_rng(seed)
    direction = np.array([1.0, -1.0])
    X = []
    for shift in (-1.25, 1.25):
        z = rng.standard_normal((n_per_class, 2))
        X.append(shift * direction + z @ chol.T)
    labels = np.repeat([0, 1], n_per_class)
    return Dataset(np.vstack(X), labels, 2, ["x1", "x2"], ["0", "1"])


def gen_highdim(
    n_samples: int = 200,
    n_features: int = 3000,
    n_classes: int = 5,
    seed: int = 0,
    block: int = 32,
    separation: float = 8.0,
) -> Dataset:
    """Many noisy features with class information in ``n_classes`` directions.

    Each class mean is ``separation`` along its own unit direction. The
    directions are supported on disjoint blocks of ``block`` features placed
    at random positions, with random signs; every other feature is pure
    standard-normal noise.
    """
    if n_classes * block > n_features:
        raise DataError("not enough features for the informative blocks")
    rng = np.random.default_rng(seed)
    support = rng.permutation(n_features)[: n_classes * block].reshape(n_classes, block)
    directions = np.zeros((n_classes, n_features))
    for c in range(n_classes):
        directions[c, support[c]] = rng.choice([-1.0, 1.0], size=block) / np.sqrt(block)
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    X = rng.standard_normal((n_samples, n_features)) + separation * directions[labels]
    names = [f"f{j}" for j in range(n_features)]
    return Dataset(X, labels, n_classes, names, [str(c) for c in range(n_classes)])


# --------------------------------------------------------------------------
# Standardization
# --------------------------------------------------------------------------


@dataclass
class StandardizationStats:
    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray = field(default=None)

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.stds = np.asarray(self.stds, dtype=np.float64)
        if self.constant is None:
            self.constant = ~(self.stds > 0)
        self.constant = np.asarray(self.constant, dtype=bool)


def fit_standardizer(train: Dataset) -> StandardizationStats:
    """Per-feature mean and population standard deviation of ``train``."""
    X = train.features if isinstance(train, Dataset) else np.asarray(train, dtype=np.float64)
    if X.size == 0:
        raise DataError("cannot standardize an empty dataset")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    constant = ~(stds > 0)
    if constant.any():
        warnings.warn(
            f"constant features {np.flatnonzero(constant).tolist()} will map to 0",
            RuntimeWarning,
            stacklevel=2,
        )
    return StandardizationStats(means, stds, constant)


def apply_standardizer(stats: StandardizationStats, data):
    """Z-score ``data`` (a Dataset or an array) with previously fitted stats."""
    X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if X.shape[-1] != stats.means.shape[0]:
        raise DataError(
            f"standardizer fitted on {stats.means.shape[0]} features, got {X.shape[-1]}"
        )
    safe = np.where(stats.constant, 1.0, stats.stds)
    Z = (X - stats.means) / safe
    Z[..., stats.constant] = 0.0
    if isinstance(data, Dataset):
        return data.with_features(Z, data.feature_names)
    return Z


# --------------------------------------------------------------------------
# Folds
# --------------------------------------------------------------------------


@dataclass
class FoldAssignment:
    fold_index: np.ndarray
    k: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_index == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_index != fold)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.fold_index, minlength=self.k)


def stratified_kfold(dataset: Dataset, k: int, seed: int) -> FoldAssignment:
    """Assign samples to ``k`` folds, class by class, in a seeded order.

    Each class is dealt round-robin starting where the previous class left
    off, so class counts per fold differ from ``n_c / k`` by at most one and
    fold sizes differ by at most one overall.
    """
    if k < 2:
        raise DataError("need at least 2 folds")
    counts = dataset.class_counts()
    small = np.flatnonzero(counts < k)
    if small.size:
        raise DataError(
            f"classes {small.tolist()} have fewer than {k} samples "
            f"(counts {counts[small].tolist()})"
        )
    rng = np.random.default_rng(seed)
    fold_index = np.empty(dataset.n_samples, dtype=np.int64)
    offset = 0
    for c in range(dataset.class_count):
        members = rng.permutation(np.flatnonzero(dataset.labels == c))
        fold_index[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return FoldAssignment(fold_index, k)
