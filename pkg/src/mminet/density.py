"""Gaussian kernel density estimates in the projected space.

Everything is kept in the log domain; a raw-density API is deliberately
absent. Bandwidth matrices are diagonal and stored as their diagonal
(the per-dimension kernel variances ``h_i**2``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError

LOG_2PI = np.log(2.0 * np.pi)
BANDWIDTH_FLOOR = 1e-6


def logsumexp_weights(a, axis=-1):
    """Return ``(logsumexp(a), softmax(a))`` along ``axis``, computed stably."""
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    e = np.exp(a - m)
    s = e.sum(axis=axis, keepdims=True)
    lse = np.squeeze(m + np.log(s), axis=axis)
    return lse, e / s


def silverman_bandwidth(points) -> np.ndarray:
    """Diagonal Silverman bandwidth for ``m`` points in ``d`` dimensions.

    ``h_i = sigma_i * (4 / ((d + 2) m)) ** (1 / (d + 4))`` with ``sigma_i`` the
    sample standard deviation (ddof=1). A collapsed dimension gets
    ``h_i = 1e-6`` (with a warning). Returns ``h_i**2``.
    """
    Y = np.asarray(points, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    m, d = Y.shape
    if m < 2:
        raise DataError(f"Silverman bandwidth needs at least 2 points, got {m}")
    sigma = Y.std(axis=0, ddof=1)
    h = sigma * (4.0 / ((d + 2) * m)) ** (1.0 / (d + 4))
    if np.any(h < BANDWIDTH_FLOOR):
        warnings.warn("degenerate spread; bandwidth floored at 1e-6", RuntimeWarning, stacklevel=2)
        h = np.maximum(h, BANDWIDTH_FLOOR)
    return h * h


def log_kernel(u, H) -> np.ndarray:
    """Log of the Gaussian kernel ``K_H(u)`` with diagonal ``H``.

    The exponent is ``-u^T H^{-1} u / 2``. Rows of ``u`` are evaluated
    independently.
    """
    u = np.asarray(u, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    d = H.shape[-1]
    quad = np.sum(u * u / H, axis=-1)
    # exponent sign is negative: a positive sign (as sometimes printed) would not decay
    return -0.5 * d * LOG_2PI - 0.5 * np.sum(np.log(H)) - 0.5 * quad


@dataclass(frozen=True)
class KdeContext:
    """Per-class reference points, bandwidths and log priors."""

    refs: tuple[np.ndarray, ...]
    bandwidths: tuple[np.ndarray, ...]
    log_priors: np.ndarray
    # row positions of each class's references in the projection matrix they came from
    ref_index: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if not (len(self.refs) == len(self.bandwidths) == len(self.log_priors)):
            raise DataError("refs, bandwidths and priors disagree on the class count")
        for c, (r, H) in enumerate(zip(self.refs, self.bandwidths)):
            if r.ndim != 2 or r.shape[0] < 2:
                raise DataError(f"class {c} needs at least 2 reference points")
            if H.shape != (r.shape[1],) or not np.all(H > 0):
                raise DataError(f"class {c} has an invalid bandwidth")
        if abs(np.exp(self.log_priors).sum() - 1.0) > 1e-12:
            raise DataError("class priors do not sum to 1")

    @property
    def class_count(self) -> int:
        return len(self.refs)

    @property
    def dim(self) -> int:
        return self.refs[0].shape[1]

    def with_projections(self, Y) -> "KdeContext":
        """Same bandwidths and priors, references re-read from ``Y`` via ``ref_index``."""
        if self.ref_index is None:
            raise DataError("context was not built from a projection matrix")
        Y = np.asarray(Y, dtype=np.float64)
        refs = tuple(Y[rows] for rows in self.ref_index)
        return KdeContext(refs, self.bandwidths, self.log_priors, self.ref_index)

    @classmethod
    def from_projections(cls, Y, labels, class_count: int, exclude: int | None = None,
                         priors=None) -> "KdeContext":
        """Build a context from projected samples.

        ``exclude`` drops one sample from its own class's reference set
        (leave-one-out). Priors default to the class frequencies of all of
        ``labels``; bandwidths come from the reference sets actually used.
        """
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        labels = np.asarray(labels)
        keep = np.ones(len(labels), dtype=bool)
        if exclude is not None:
            keep[exclude] = False
        refs, bws, index = [], [], []
        for c in range(class_count):
            rows = np.flatnonzero((labels == c) & keep)
            r = Y[rows]
            refs.append(r)
            index.append(rows)
            if r.shape[0] < 2:
                raise DataError(f"class {c} has {r.shape[0]} reference points; need >= 2")
            bws.append(silverman_bandwidth(r))
        if priors is None:
            counts = np.bincount(labels, minlength=class_count).astype(np.float64)
            priors = counts / counts.sum()
        priors = np.asarray(priors, dtype=np.float64)
        with np.errstate(divide="ignore"):
            log_priors = np.log(priors)
        return cls(tuple(refs), tuple(bws), log_priors, tuple(index))


def _class_terms(y, context: KdeContext, c: int):
    y = np.asarray(y, dtype=np.float64)
    refs = context.refs[c]
    H = context.bandwidths[c]
    if y.shape != (refs.shape[1],):
        raise DataError(f"query must have shape ({refs.shape[1]},), got {y.shape}")
    lk = log_kernel(y - refs, H)
    lse, w = logsumexp_weights(lk)
    return lse - np.log(refs.shape[0]), w, refs, H


def log_class_density(y, context: KdeContext, c: int) -> float:
    """``log p(y | c)``: mean of Gaussian kernels over class ``c``'s references."""
    return float(_class_terms(y, context, c)[0])


def grad_log_class_density(y, context: KdeContext, c: int) -> np.ndarray:
    """Gradient of :func:`log_class_density` with respect to the query ``y``."""
    return _density_and_grad(y, context, c)[1]


def _density_and_grad(y, context: KdeContext, c: int):
    logp, w, refs, H = _class_terms(y, context, c)
    grad = (w @ (refs - y)) / H
    return float(logp), grad


def class_kernel_weights(y, context: KdeContext, c: int) -> np.ndarray:
    """Softmax weights over class ``c``'s references used in the gradient."""
    return _class_terms(y, context, c)[1]
