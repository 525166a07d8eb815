"""Stochastic single-sample training loop for the projection network."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .density import KdeContext
from .errors import DataError, NumericalError
from .nn import ARCHITECTURES, OptimizerState, ProjectionNetwork, build_network, forward, sgd_momentum_step
from .smig import smig_full_gradients, smig_step_gradients

GRADIENT_MODES = ("full", "frozen")


@dataclass
class TrainConfig:
    d_y: int = 1
    arch: str = "paper_default"
    epochs: int = 1
    learning_rate: float = 0.005
    momentum: float = 0.9
    seed: int = 0
    refresh_every: int = 1
    shuffle: bool = True
    # "full": backpropagate through y_t and the reference projections;
    # "frozen": references are constants and only y_t carries gradient
    gradient: str = "full"

    def __post_init__(self):
        if self.d_y < 1:
            raise ValueError("d_y must be >= 1")
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.refresh_every < 1:
            raise ValueError("refresh_every must be >= 1")
        if self.gradient not in GRADIENT_MODES:
            raise ValueError(f"gradient must be one of {GRADIENT_MODES}")
        if self.gradient == "full" and self.refresh_every != 1:
            raise ValueError("gradient='full' needs current references (refresh_every=1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainReport:
    loss_trace: list[float]
    skipped: int
    parameter_norms: list[float]
    wall_time: float
    config: dict
    final_projections: np.ndarray | None = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.loss_trace)

    def to_dict(self) -> dict:
        """JSON-friendly summary (omits the projection matrix)."""
        return {
            "loss_trace": [float(v) for v in self.loss_trace],
            "skipped": int(self.skipped),
            "parameter_norms": [float(v) for v in self.parameter_norms],
            "wall_time": float(self.wall_time),
            "config": dict(self.config),
        }


def train_mminet(train: Dataset, config: TrainConfig, observer=None):
    """Fit a projection network on (standardized) ``train``.

    Each iteration visits one sample ``t``: all training samples are
    projected with the current network (every ``refresh_every`` iterations),
    class-conditional KDEs are built from those projections with ``t`` left
    out of its own class, and one momentum step is taken on the gradient of
    the instantaneous loss at ``x_t``. Samples whose class would be left
    with fewer than two references are skipped and counted.

    With ``config.gradient == "full"`` the step also flows through the
    reference projections (bandwidths and priors stay constant); with
    ``"frozen"`` only ``y_t`` is differentiated.

    ``observer(t, context)``, if given, is called before each step.

    Returns ``(net, report)``.
    """
    if config.d_y > train.n_features:
        raise DataError(f"d_y={config.d_y} exceeds input dimension {train.n_features}")
    counts = train.class_counts()
    if np.any(counts < 2):
        raise DataError(f"every class needs >= 2 training samples, got counts {counts.tolist()}")

    seeds = np.random.SeedSequence(config.seed).spawn(2)
    net = build_network(train.n_features, config.d_y, config.arch, seed=seeds[0])
    order_rng = np.random.default_rng(seeds[1])
    state = OptimizerState.for_network(net, config.learning_rate, config.momentum)

    X, labels, L = train.features, train.labels, train.class_count
    priors = counts / counts.sum()
    skippable = counts[labels] < 3

    losses: list[float] = []
    skipped = 0
    start = time.perf_counter()
    projections = tape = None
    full = config.gradient == "full"
    since_refresh = config.refresh_every
    for epoch in range(config.epochs):
        order = order_rng.permutation(train.n_samples) if config.shuffle else np.arange(train.n_samples)
        for step, t in enumerate(order):
            if since_refresh >= config.refresh_every:
                projections, tape = forward(net, X)
                since_refresh = 0
                if not np.all(np.isfinite(projections)):
                    raise NumericalError(
                        f"non-finite projections at epoch {epoch}, iteration {step}"
                    )
            since_refresh += 1
            if skippable[t]:
                skipped += 1
                continue
            context = KdeContext.from_projections(projections, labels, L, exclude=t, priors=priors)
            if observer is not None:
                observer(t, context)
            if full:
                loss, grads, _ = smig_full_gradients(net, X, t, context, tape)
            else:
                loss, grads, _ = smig_step_gradients(net, X[t], context)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, iteration {step} (sample {t})"
                )
            try:
                sgd_momentum_step(net, grads, state)
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch}, iteration {step} (sample {t}): {exc}") from exc
            losses.append(loss)

    final, _ = forward(net, X)
    report = TrainReport(
        loss_trace=losses,
        skipped=skipped,
        parameter_norms=[float(np.linalg.norm(p)) for p in net.parameters()],
        wall_time=time.perf_counter() - start,
        config=config.to_dict(),
        final_projections=final,
    )
    return net, report


def transform(net: ProjectionNetwork, data) -> np.ndarray:
    """Project every row of ``data`` (Dataset or array); labels are not used."""
    X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise DataError(f"expected rows of width {net.input_dim}, got shape {X.shape}")
    return forward(net, X)[0]
