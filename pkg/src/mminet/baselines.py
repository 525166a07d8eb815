"""Feature-ranking baselines: Fisher score, mRMR and SVM-RFE."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .classify import fit_linear_svm
from .data import Dataset
from .errors import DataError

METHODS = ("fisher", "mrmr", "svmrfe")


@dataclass
class FeatureRanking:
    order: np.ndarray  # feature indices, best first
    scores: np.ndarray  # aligned with the original feature indices
    method: str

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if np.sort(self.order).tolist() != list(range(len(self.scores))):
            raise ValueError("order is not a permutation of the feature indices")

    def top(self, k: int) -> np.ndarray:
        return self.order[:k]

    def to_json(self, names=None) -> list[dict]:
        out = []
        for j in self.order:
            score = float(self.scores[j])
            out.append({
                "index": int(j),
                "name": names[j] if names else f"x{j + 1}",
                "score": score if math.isfinite(score) else str(score),
            })
        return out


def _descending(scores) -> np.ndarray:
    # stable sort on -score: ties go to the lower index, +inf first
    return np.argsort(-np.asarray(scores), kind="stable")


# --------------------------------------------------------------------------
# Fisher score
# --------------------------------------------------------------------------


def fisher_score(train: Dataset) -> FeatureRanking:
    """Between-class over within-class scatter, feature by feature.

    ``sum_c n_c (mu_cj - mu_j)^2 / sum_c n_c var_cj`` with class variances
    using denominator ``n_c``. A feature with zero within-class scatter but
    some separation scores ``+inf``; one with neither scores 0.
    """
    if train.class_count < 2:
        raise DataError("Fisher score needs at least two classes")
    counts = train.class_counts()
    if np.any(counts < 2):
        raise DataError("Fisher score needs at least two samples per class")
    X = train.features
    mu = X.mean(axis=0)
    between = np.zeros(X.shape[1])
    within = np.zeros(X.shape[1])
    for c, n_c in enumerate(counts):
        Xc = X[train.labels == c]
        mu_c = Xc.mean(axis=0)
        between += n_c * (mu_c - mu) ** 2
        within += n_c * Xc.var(axis=0)
    # relative threshold so float noise in constant columns does not count as scatter
    scale = np.maximum(np.abs(X).max(axis=0), 1.0) ** 2 * X.shape[0] * 1e-24
    between = np.where(between <= scale, 0.0, between)
    within = np.where(within <= scale, 0.0, within)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(within > 0, between / np.where(within > 0, within, 1.0),
                          np.where(between > 0, np.inf, 0.0))
    return FeatureRanking(_descending(scores), scores, "fisher")


# --------------------------------------------------------------------------
# mRMR
# --------------------------------------------------------------------------


def discretize(x, bins: int) -> np.ndarray:
    """Equal-frequency bin codes ``0..B-1`` for one feature.

    Features with fewer distinct values than ``bins`` get one bin per
    distinct value.
    """
    x = np.asarray(x, dtype=np.float64)
    values, inverse = np.unique(x, return_inverse=True)
    if values.size <= bins:
        return inverse.astype(np.int64)
    edges = np.unique(np.quantile(x, np.linspace(0.0, 1.0, bins + 1)[1:-1]))
    codes = np.searchsorted(edges, x, side="right")
    return np.unique(codes, return_inverse=True)[1].astype(np.int64)


def entropy(codes) -> float:
    p = np.bincount(codes) / len(codes)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def mutual_information(a, b) -> float:
    """Plug-in MI (nats) between two discrete code vectors."""
    return float(_mi_against(np.asarray(b)[:, None], np.asarray(a), int(np.max(b)) + 1)[0])


def _mi_against(codes: np.ndarray, target: np.ndarray, n_codes: int) -> np.ndarray:
    """MI between ``target`` and every column of ``codes`` (vectorized)."""
    n, m = codes.shape
    ta = int(target.max()) + 1
    joint_idx = (np.arange(m) * (ta * n_codes))[None, :] + target[:, None] * n_codes + codes
    joint = np.bincount(joint_idx.ravel(), minlength=m * ta * n_codes).reshape(m, ta, n_codes) / n
    pa = joint.sum(axis=2, keepdims=True)
    pb = joint.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log(joint / (pa * pb)), 0.0)
    return terms.sum(axis=(1, 2))


def mrmr_rank(train: Dataset, bins: int = 10, n_select: int | None = None) -> FeatureRanking:
    """Greedy minimum-redundancy maximum-relevance ranking (difference form).

    Picks ``argmax I(x_j; C)`` first, then repeatedly
    ``argmax I(x_j; C) - mean_{s in S} I(x_j; x_s)``. Only the first
    ``n_select`` picks are made greedily (all features by default); the rest
    are ordered by the same criterion against the final selected set.
    Scores hold each feature's criterion value when it was ranked.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    X = train.features
    d = X.shape[1]
    n_select = d if n_select is None else max(1, min(int(n_select), d))
    codes = np.column_stack([discretize(X[:, j], bins) for j in range(d)])
    n_codes = int(codes.max()) + 1
    relevance = _mi_against(codes, train.labels, n_codes)

    scores = np.empty(d)
    selected: list[int] = []
    remaining = np.ones(d, dtype=bool)
    redundancy = np.zeros(d)
    criterion = relevance.copy()
    for _ in range(n_select):
        candidates = np.flatnonzero(remaining)
        pick = int(candidates[np.argmax(criterion[candidates])])
        scores[pick] = criterion[pick]
        selected.append(pick)
        remaining[pick] = False
        if not remaining.any():
            break
        redundancy += _mi_against(codes, codes[:, pick], n_codes)
        criterion = relevance - redundancy / len(selected)
    rest = np.flatnonzero(remaining)
    if rest.size:
        scores[rest] = criterion[rest]
        rest = rest[_descending(criterion[rest])]
    order = np.concatenate([np.array(selected, dtype=np.int64), rest]).astype(np.int64)
    return FeatureRanking(order, scores, "mrmr")


# --------------------------------------------------------------------------
# SVM-RFE
# --------------------------------------------------------------------------


def svm_rfe(train: Dataset, target_k: int = 1, chunk_fraction: float = 0.1,
            lam: float = 1e-3, epochs: int = 20, seed: int = 0) -> FeatureRanking:
    """Recursive feature elimination on squared linear-SVM weights.

    Each round fits the (one-vs-rest) SVM on the surviving features, scores
    each by the sum over class models of ``w^2`` and drops the
    ``ceil(chunk_fraction * surviving)`` lowest (at least one, never going
    below ``target_k``). Survivors rank first by their final criterion,
    followed by eliminated features in reverse elimination order.
    """
    d = train.n_features
    if not 1 <= target_k <= d:
        raise ValueError(f"target_k must lie in 1..{d}")
    if not 0 < chunk_fraction <= 1:
        raise ValueError("chunk_fraction must lie in (0, 1]")
    surviving = np.arange(d)
    eliminated: list[int] = []
    scores = np.zeros(d)
    n_round = 0
    while True:
        round_seed = int(np.random.SeedSequence([seed, n_round]).generate_state(1)[0])
        n_round += 1
        model = fit_linear_svm(train.features[:, surviving], train.labels, train.class_count,
                               lam=lam, epochs=epochs, seed=round_seed)
        criterion = (model.weights ** 2).sum(axis=0)
        if not np.any(criterion > 0):
            warnings.warn("SVM weights are all zero; eliminating by lowest index",
                          RuntimeWarning, stacklevel=2)
        if surviving.size <= target_k:
            break
        n_cut = min(max(1, math.ceil(chunk_fraction * surviving.size)), surviving.size - target_k)
        worst = np.argsort(criterion, kind="stable")[:n_cut]
        scores[surviving[worst]] = criterion[worst]
        eliminated.extend(surviving[worst].tolist())
        surviving = np.delete(surviving, worst)
    scores[surviving] = criterion
    head = surviving[_descending(criterion)]
    order = np.concatenate([head, np.array(eliminated[::-1], dtype=np.int64)]).astype(np.int64)
    return FeatureRanking(order, scores, "svmrfe")
