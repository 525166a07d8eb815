"""Linear SVM trained by primal stochastic subgradient descent (Pegasos-style)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


def hinge_objective(X, y, w, b, lam) -> float:
    """``lam/2 |w|^2 + mean(max(0, 1 - y (Xw + b)))``."""
    margins = y * (X @ w + b)
    return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def svm_train(X, y, lam: float = 1e-3, epochs: int = 20, seed=0):
    """Binary linear SVM on labels in ``{-1, +1}``.

    Minimizes ``hinge_objective`` by ``epochs`` seeded passes of single-sample
    subgradient steps ``1 / (lam * (t + 1/lam))``. The bias is unregularized.
    Returns the average of the iterates from the second half of the run.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if lam <= 0:
        raise ValueError("lam must be positive")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DataError("X must be (n, d) with one label per row")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DataError("svm_train needs both +1 and -1 labels")
    if not np.all(np.abs(y) == 1):
        raise DataError("labels must be -1 or +1")

    n, d = X.shape
    rng = np.random.default_rng(seed)
    total = n * epochs
    average_from = total // 2
    # offset keeps the first steps at O(1); plain 1/(lam t) sends the bias wild
    t0 = 1.0 / lam
    w = np.zeros(d)
    b = 0.0
    w_sum = np.zeros(d)
    b_sum = 0.0
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * (t + t0))
            xi, yi = X[i], y[i]
            violated = yi * (xi @ w + b) < 1.0
            w *= 1.0 - eta * lam
            if violated:
                w += (eta * yi) * xi
                b += eta * yi
            if t > average_from:
                w_sum += w
                b_sum += b
    count = total - average_from
    return w_sum / count, b_sum / count


@dataclass
class LinearSvmModel:
    weights: np.ndarray  # (models, d); one row for binary problems
    biases: np.ndarray  # (models,)
    class_count: int
    lam: float
    epochs: int
    seed: int

    def scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.weights.shape[1]:
            raise DataError(f"model expects {self.weights.shape[1]} features, got {X.shape[-1]}")
        return X @ self.weights.T + self.biases

    def predict(self, X) -> np.ndarray:
        s = np.atleast_2d(self.scores(X))
        if self.class_count == 2:
            return (s[:, 0] > 0).astype(np.int64)
        return np.argmax(s, axis=1)

    def accuracy(self, X, labels) -> float:
        return float(np.mean(self.predict(X) == np.asarray(labels)))

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "class_count": self.class_count,
            "lam": self.lam,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSvmModel":
        return cls(np.array(d["weights"], dtype=np.float64), np.array(d["biases"], dtype=np.float64),
                   d["class_count"], d["lam"], d["epochs"], d["seed"])


def fit_linear_svm(X, labels, class_count: int, lam: float = 1e-3, epochs: int = 20,
                   seed: int = 0) -> LinearSvmModel:
    """One binary model for two classes (class 1 positive), else one-vs-rest."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if class_count < 2:
        raise DataError("need at least two classes")
    if class_count == 2:
        targets = [np.where(labels == 1, 1.0, -1.0)]
    else:
        targets = [np.where(labels == c, 1.0, -1.0) for c in range(class_count)]
    streams = np.random.SeedSequence(seed).spawn(len(targets))
    W = np.empty((len(targets), X.shape[1]))
    B = np.empty(len(targets))
    for k, (yk, ss) in enumerate(zip(targets, streams)):
        W[k], B[k] = svm_train(X, yk, lam, epochs, ss)
    return LinearSvmModel(W, B, class_count, lam, epochs, seed)


def svm_predict(model: LinearSvmModel, X) -> np.ndarray:
    return model.predict(X)


def accuracy(model: LinearSvmModel, X, labels) -> float:
    return model.accuracy(X, labels)
