"""Cross-validated experiment runner, sweeps and report serialization."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .baselines import fisher_score, mrmr_rank, svm_rfe
from .classify import fit_linear_svm
from .data import (
    Dataset,
    apply_standardizer,
    fit_standardizer,
    gen_highdim,
    gen_monk3,
    gen_toy2d,
    load_csv,
    stratified_kfold,
)
from .errors import DataError, MminetError
from .trainer import TrainConfig, train_mminet, transform

METHODS = ("mminet", "fisher", "mrmr", "svmrfe")
GENERATORS = ("monk3", "toy2d", "highdim")


@dataclass
class DataSource:
    """Where an experiment's data comes from: a CSV path or a named generator."""

    path: str | None = None
    label_column: str = "label"
    has_header: bool = True
    generator: str | None = None
    gen_seed: int = 0
    gen_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.path is None) == (self.generator is None):
            raise DataError("give exactly one of a data path or a generator name")
        if self.generator is not None and self.generator not in GENERATORS:
            raise DataError(f"unknown generator {self.generator!r}; choose from {GENERATORS}")

    @property
    def name(self) -> str:
        if self.generator:
            return self.generator
        return str(self.path).replace("\\", "/").rsplit("/", 1)[-1].rsplit(".", 1)[0]

    def load(self) -> Dataset:
        if self.path is not None:
            return load_csv(self.path, self.label_column, self.has_header)
        if self.generator == "monk3":
            return gen_monk3(self.gen_seed)
        if self.generator == "toy2d":
            return gen_toy2d(int(self.gen_params.get("n_per_class", 200)), self.gen_seed)
        return gen_highdim(seed=self.gen_seed, **self.gen_params)


@dataclass
class ExperimentSpec:
    source: DataSource
    method: str
    d_y: int
    folds: int = 5
    seed: int = 0
    arch: str = "paper_default"
    epochs: int = 1
    learning_rate: float = 0.005
    momentum: float = 0.9
    refresh_every: int = 1
    gradient: str = "full"
    mrmr_bins: int = 10
    rfe_chunk_fraction: float = 0.1
    svm_lambda: float = 1e-3
    svm_epochs: int = 20

    def __post_init__(self):
        if isinstance(self.source, dict):
            self.source = DataSource(**self.source)
        if self.method not in METHODS:
            raise DataError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.d_y < 1:
            raise DataError("d_y must be >= 1")
        if self.folds < 2:
            raise DataError("folds must be >= 2")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            d_y=self.d_y,
            arch=self.arch,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            seed=seed,
            refresh_every=self.refresh_every,
            gradient=self.gradient,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class CvReport:
    spec: dict
    dataset: str
    fold_accuracies: list[float]
    mean: float
    std: float
    fold_times: list[float]
    fold_details: list[dict] = field(default_factory=list)
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "CvReport":
        return cls(**json.loads(text))

    def same_outcome(self, other: "CvReport") -> bool:
        """Equality ignoring wall-clock fields."""
        return (self.spec == other.spec and self.fold_accuracies == other.fold_accuracies
                and self.mean == other.mean and self.std == other.std)


def fold_seed(master_seed: int, fold: int) -> int:
    """Per-fold seed derived only from ``(master_seed, fold)``."""
    return int(np.random.SeedSequence([master_seed, fold]).generate_state(1)[0])


def reduce_fold(spec: ExperimentSpec, train: Dataset, test: Dataset, seed: int):
    """Reduce both splits to ``spec.d_y`` columns; returns ``(Z_train, Z_test, details)``."""
    if spec.method == "mminet":
        net, report = train_mminet(train, spec.train_config(seed))
        details = {
            "iterations": report.iterations,
            "skipped": report.skipped,
            "final_loss_mean": float(np.mean(report.loss_trace[-50:])) if report.loss_trace else 0.0,
        }
        return report.final_projections, transform(net, test), details
    if spec.method == "fisher":
        ranking = fisher_score(train)
    elif spec.method == "mrmr":
        ranking = mrmr_rank(train, bins=spec.mrmr_bins, n_select=spec.d_y)
    else:
        ranking = svm_rfe(train, target_k=spec.d_y, chunk_fraction=spec.rfe_chunk_fraction,
                          lam=spec.svm_lambda, epochs=spec.svm_epochs, seed=seed)
    keep = ranking.top(spec.d_y)
    return train.features[:, keep], test.features[:, keep], {"selected": keep.tolist()}


def _run_fold(spec: ExperimentSpec, dataset: Dataset, train_idx, test_idx, fold: int):
    start = time.perf_counter()
    seed = fold_seed(spec.seed, fold)
    try:
        train, test = dataset.subset(train_idx), dataset.subset(test_idx)
        stats = fit_standardizer(train)
        train, test = apply_standardizer(stats, train), apply_standardizer(stats, test)
        Z_train, Z_test, details = reduce_fold(spec, train, test, seed)
        svm = fit_linear_svm(Z_train, train.labels, dataset.class_count,
                             lam=spec.svm_lambda, epochs=spec.svm_epochs, seed=seed)
        acc = svm.accuracy(Z_test, test.labels)
    except MminetError as exc:
        raise type(exc)(f"fold {fold}: {exc}") from exc
    return acc, time.perf_counter() - start, details


def run_experiment(spec: ExperimentSpec, dataset: Dataset | None = None, workers: int = 1) -> CvReport:
    """Stratified k-fold evaluation of one reduction method followed by a linear SVM.

    Folds depend only on ``spec.seed``, so every method run with the same
    seed sees the same splits. ``workers > 1`` runs folds in separate
    processes; results are identical to a serial run.
    """
    if dataset is None:
        dataset = spec.source.load()
    if spec.d_y > dataset.n_features:
        raise DataError(f"d_y={spec.d_y} exceeds the {dataset.n_features} available features")
    folds = stratified_kfold(dataset, spec.folds, spec.seed)
    jobs = [(spec, dataset, folds.train_indices(f), folds.test_indices(f), f) for f in range(spec.folds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_fold, *zip(*jobs)))
    else:
        results = [_run_fold(*job) for job in jobs]
    accs = [float(r[0]) for r in results]
    return CvReport(
        spec=spec.to_dict(),
        dataset=spec.source.name,
        fold_accuracies=accs,
        mean=float(np.mean(accs)),
        std=float(np.std(accs)),
        fold_times=[float(r[1]) for r in results],
        fold_details=[r[2] for r in results],
    )


def run_sweep(spec: ExperimentSpec, dy_list, methods=METHODS, dataset: Dataset | None = None,
              workers: int = 1) -> list[CvReport]:
    """One report per ``(method, d_y)``, all sharing the spec's folds and seed."""
    if dataset is None:
        dataset = spec.source.load()
    bad = [d for d in dy_list if not 1 <= d <= dataset.n_features]
    if bad:
        raise DataError(f"invalid output dimensions {bad} for {dataset.n_features} features")
    reports = []
    for method in methods:
        for d_y in dy_list:
            sub = ExperimentSpec(**{**spec.to_dict(), "method": method, "d_y": int(d_y)})
            reports.append(run_experiment(sub, dataset, workers=workers))
    return reports


TIDY_COLUMNS = ("dataset", "method", "d_y", "fold", "accuracy")


def write_tidy_csv(reports, path) -> int:
    """One row per (report, fold); returns the number of data rows written."""
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIDY_COLUMNS)
        for rep in reports:
            for fold, acc in enumerate(rep.fold_accuracies):
                writer.writerow([rep.dataset, rep.spec["method"], rep.spec["d_y"], fold, repr(acc)])
                rows += 1
    return rows
