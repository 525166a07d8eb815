"""Dense feed-forward projection network with ELU hidden units.

Only what the trainer needs: a forward pass that records a tape, exact
backpropagation of an externally supplied output gradient, and classical
momentum SGD.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericalError

ARCHITECTURES = ("paper_default", "single_linear")
ACTIVATIONS = ("elu", "identity")
MODEL_FORMAT_VERSION = 1


def elu(z):
    # alpha = 1; the minimum() keeps expm1 from overflowing on large positive z
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))


def elu_grad(z):
    return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray | None  # (out,) or None for bias-free layers
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=np.float64)
            if self.bias.shape != (self.weight.shape[0],):
                raise ValueError("bias shape does not match weight rows")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class ProjectionNetwork:
    layers: list[DenseLayer]
    arch: str = "custom"

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        if self.layers[-1].activation != "identity":
            raise ValueError("final layer must be linear")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    def dims(self) -> list[int]:
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order (weight, then bias if present, per layer)."""
        params = []
        for layer in self.layers:
            params.append(layer.weight)
            if layer.bias is not None:
                params.append(layer.bias)
        return params

    def copy(self) -> "ProjectionNetwork":
        return ProjectionNetwork(
            [
                DenseLayer(
                    l.weight.copy(), None if l.bias is None else l.bias.copy(), l.activation
                )
                for l in self.layers
            ],
            self.arch,
        )


def hidden_widths(d_x: int, d_y: int) -> tuple[int, int]:
    return max(d_x // 2, d_y), max(d_x // 4, d_y)


def build_network(d_x: int, d_y: int, arch: str = "paper_default", seed: int = 0) -> ProjectionNetwork:
    """Create a seeded network.

    ``paper_default`` is ``d_x -> d_x/2 -> d_x/4 -> d_y`` with ELU after both
    hidden layers (hidden widths floored at ``d_y``); ``single_linear`` is one
    bias-free linear map. Weights are uniform in ``+-1/sqrt(fan_in)`` and
    biases start at zero.
    """
    if d_y < 1 or d_x < 1:
        raise ValueError("dimensions must be positive")
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}; choose from {ARCHITECTURES}")
    rng = np.random.default_rng(seed)

    def init(out_dim, in_dim):
        bound = 1.0 / np.sqrt(in_dim)
        return rng.uniform(-bound, bound, size=(out_dim, in_dim))

    if arch == "single_linear":
        return ProjectionNetwork([DenseLayer(init(d_y, d_x), None, "identity")], arch)

    if d_x < 4:
        raise ValueError(f"paper_default architecture needs d_x >= 4, got {d_x}")
    h1, h2 = hidden_widths(d_x, d_y)
    layers = [
        DenseLayer(init(h1, d_x), np.zeros(h1), "elu"),
        DenseLayer(init(h2, h1), np.zeros(h2), "elu"),
        DenseLayer(init(d_y, h2), np.zeros(d_y), "identity"),
    ]
    return ProjectionNetwork(layers, arch)


def forward(net: ProjectionNetwork, x):
    """Run ``x`` (one sample or a batch of rows) through the network.

    Returns ``(y, tape)`` where ``tape`` holds each layer's input and
    pre-activation, which is all :func:`backward` needs.
    """
    h = np.asarray(x, dtype=np.float64)
    if h.shape[-1] != net.input_dim:
        raise DataError(f"expected input of width {net.input_dim}, got {h.shape[-1]}")
    tape = []
    for layer in net.layers:
        z = h @ layer.weight.T
        if layer.bias is not None:
            z = z + layer.bias
        tape.append((h, z))
        h = elu(z) if layer.activation == "elu" else z
    return h, tape


def backward(net: ProjectionNetwork, tape, grad_y) -> list[np.ndarray]:
    """Gradients of ``<grad_y, y>`` w.r.t. ``net.parameters()`` (same order).

    For batched tapes ``grad_y`` has one row per sample and the result is the
    sum over samples.
    """
    if len(tape) != len(net.layers):
        raise ValueError("tape does not come from this network")
    g = np.asarray(grad_y, dtype=np.float64)
    if g.shape != tape[-1][1].shape:
        raise ValueError(f"grad_y shape {g.shape} does not match output {tape[-1][1].shape}")
    grads: list[np.ndarray] = []
    for depth, (layer, (h_in, z)) in enumerate(zip(reversed(net.layers), reversed(tape))):
        if layer.activation == "elu":
            g = g * elu_grad(z)
        if g.ndim == 1:
            dW = np.outer(g, h_in)
            db = g.copy()
        else:
            dW = g.T @ h_in
            db = g.sum(axis=0)
        if layer.bias is not None:
            grads.append(db)
        grads.append(dW)
        if depth < len(net.layers) - 1:  # input gradient is never needed
            g = g @ layer.weight
    grads.reverse()
    return grads


@dataclass
class OptimizerState:
    learning_rate: float
    momentum: float
    velocity: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    @classmethod
    def for_network(cls, net: ProjectionNetwork, learning_rate: float, momentum: float):
        return cls(learning_rate, momentum, [np.zeros_like(p) for p in net.parameters()])


def sgd_momentum_step(net: ProjectionNetwork, grads, state: OptimizerState):
    """Classical momentum: ``v <- beta * v + g``; ``theta <- theta - lr * v``.

    Parameters are updated in place. A non-finite gradient aborts the step
    before anything is modified.
    """
    params = net.parameters()
    if len(grads) != len(params) or len(state.velocity) != len(params):
        raise ValueError("gradient / velocity / parameter lists differ in length")
    for p, g, v in zip(params, grads, state.velocity):
        if g.shape != p.shape or v.shape != p.shape:
            raise ValueError(f"shape mismatch: param {p.shape}, grad {g.shape}, velocity {v.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient; update aborted")
    for p, g, v in zip(params, grads, state.velocity):
        v *= state.momentum
        v += g
        p -= state.learning_rate * v
    for p in params:
        if not np.all(np.isfinite(p)):
            raise NumericalError("parameters became non-finite after update")
    return net, state


def save_network(net: ProjectionNetwork, path, **extra) -> None:
    """Write the network to an ``.npz`` archive; extra arrays are stored alongside."""
    payload = {
        "format_version": np.array(MODEL_FORMAT_VERSION),
        "arch": np.array(net.arch),
        "activations": np.array([l.activation for l in net.layers]),
        "has_bias": np.array([l.bias is not None for l in net.layers]),
    }
    for i, layer in enumerate(net.layers):
        payload[f"W{i}"] = layer.weight
        if layer.bias is not None:
            payload[f"b{i}"] = layer.bias
    for key, value in extra.items():
        payload[f"extra_{key}"] = np.asarray(value)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_network(path) -> tuple[ProjectionNetwork, dict]:
    """Inverse of :func:`save_network`; returns ``(net, extras)``."""
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != MODEL_FORMAT_VERSION:
            raise DataError(f"unsupported model format version {version}")
        activations = [str(a) for a in z["activations"]]
        has_bias = z["has_bias"].tolist()
        layers = []
        for i, act in enumerate(activations):
            bias = z[f"b{i}"] if has_bias[i] else None
            layers.append(DenseLayer(z[f"W{i}"], bias, act))
        extras = {k[len("extra_"):]: z[k] for k in z.files if k.startswith("extra_")}
        arch = str(z["arch"])
    return ProjectionNetwork(layers, arch), extras
