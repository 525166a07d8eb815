"""Finite-difference checks of every analytic gradient in the package.

Each check draws seeded random instances, compares the analytic gradient
with central differences (step 1e-5) and passes when
``|analytic - numeric| <= atol + rtol * |numeric|`` for every entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import KdeContext, grad_log_class_density, log_class_density
from .nn import ProjectionNetwork, backward, build_network, forward
from .smig import instantaneous_loss, smig_full_gradients, smig_step_gradients

STEP = 1e-5
RTOL = 1e-4
ATOL = 1e-7


@dataclass
class CheckResult:
    name: str
    instances: int
    max_abs_error: float
    max_violation: float  # max of |a - n| / (atol + rtol |n|); <= 1 passes

    @property
    def passed(self) -> bool:
        return self.max_violation <= 1.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.name}: {self.instances} instances, "
                f"max |err| {self.max_abs_error:.2e}, worst tolerance ratio {self.max_violation:.3f}")


def central_difference(f, x, step=STEP) -> np.ndarray:
    """Numerical gradient of scalar ``f`` at array ``x`` (not modified)."""
    x = np.array(x, dtype=np.float64)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        fp = f(x)
        flat[i] = orig - step
        fm = f(x)
        flat[i] = orig
        g[i] = (fp - fm) / (2.0 * step)
    return grad


def parameter_difference(net: ProjectionNetwork, f, step=STEP) -> list[np.ndarray]:
    """Numerical gradient of ``f(net)`` w.r.t. each parameter, perturbing in place."""
    out = []
    for p in net.parameters():
        grad = np.empty_like(p)
        flat, g = p.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            fp = f(net)
            flat[i] = orig - step
            fm = f(net)
            flat[i] = orig
            g[i] = (fp - fm) / (2.0 * step)
        out.append(grad)
    return out


class _Tally:
    def __init__(self, name, rtol, atol):
        self.name, self.rtol, self.atol = name, rtol, atol
        self.n = 0
        self.err = 0.0
        self.ratio = 0.0

    def add(self, analytic, numeric):
        for a, b in zip(analytic, numeric):
            a = np.asarray(a, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            diff = np.abs(a - b)
            self.err = max(self.err, float(diff.max(initial=0.0)))
            self.ratio = max(self.ratio, float((diff / (self.atol + self.rtol * np.abs(b))).max(initial=0.0)))

    def result(self, n):
        return CheckResult(self.name, n, self.err, self.ratio)


def random_context(rng, d_y: int, L: int, m_range=(4, 12), spread=1.0) -> KdeContext:
    refs = []
    for _ in range(L):
        m = int(rng.integers(*m_range))
        refs.append(rng.normal(rng.normal(0, spread, d_y), 1.0, (m, d_y)))
    Y = np.vstack(refs)
    labels = np.repeat(np.arange(L), [r.shape[0] for r in refs])
    priors = rng.dirichlet(np.ones(L) * 3.0)
    return KdeContext.from_projections(Y, labels, L, priors=priors)


def _random_net(rng, d_x, d_y, arch):
    net = build_network(d_x, d_y, arch, seed=int(rng.integers(2**31)))
    for layer in net.layers:
        if layer.bias is not None:
            layer.bias[:] = rng.normal(0, 0.3, layer.bias.shape)
    return net


def check_backward(seed: int, instances: int = 24, rtol=RTOL, atol=ATOL) -> CheckResult:
    rng = np.random.default_rng(seed)
    tally = _Tally("dense/ELU backward", rtol, atol)
    for k in range(instances):
        arch = "paper_default" if k % 2 == 0 else "single_linear"
        d_x = int(rng.integers(4, 10))
        d_y = int(rng.integers(1, 4))
        net = _random_net(rng, d_x, d_y, arch)
        x = rng.normal(size=d_x)
        gy = rng.normal(size=d_y)
        _, tape = forward(net, x)
        analytic = backward(net, tape, gy)
        numeric = parameter_difference(net, lambda n: float(gy @ forward(n, x)[0]))
        tally.add(analytic, numeric)
    return tally.result(instances)


def check_density_gradient(seed: int, instances: int = 30, rtol=RTOL, atol=ATOL) -> CheckResult:
    rng = np.random.default_rng(seed)
    tally = _Tally("KDE log-density gradient", rtol, atol)
    for _ in range(instances):
        d_y = int(rng.integers(1, 4))
        ctx = random_context(rng, d_y, 1)
        y = rng.normal(0, 1.5, d_y)
        analytic = grad_log_class_density(y, ctx, 0)
        numeric = central_difference(lambda v: log_class_density(v, ctx, 0), y)
        tally.add([analytic], [numeric])
    return tally.result(instances)


def check_loss_gradient(seed: int, instances: int = 60, rtol=RTOL, atol=ATOL) -> CheckResult:
    rng = np.random.default_rng(seed)
    tally = _Tally("instantaneous loss gradient w.r.t. y_t", rtol, atol)
    for k in range(instances):
        d_y = (1, 2, 3)[k % 3]
        L = (2, 3, 5)[(k // 3) % 3]
        ctx = random_context(rng, d_y, L)
        y = rng.normal(0, 1.0, d_y)
        analytic = instantaneous_loss(y, ctx).grad_y
        numeric = central_difference(lambda v: instantaneous_loss(v, ctx).loss, y)
        tally.add([analytic], [numeric])
    return tally.result(instances)


def check_smig_parameters(seed: int, instances: int = 20, rtol=RTOL, atol=ATOL) -> CheckResult:
    """End-to-end parameter gradient with the reference context held fixed."""
    rng = np.random.default_rng(seed)
    tally = _Tally("SMIG parameter gradient (frozen context)", rtol, atol)
    for k in range(instances):
        arch = "paper_default" if k % 2 == 0 else "single_linear"
        d_x = int(rng.integers(4, 9))
        d_y = int(rng.integers(1, 3))
        L = int(rng.integers(2, 4))
        net = _random_net(rng, d_x, d_y, arch)
        X = rng.normal(size=(int(rng.integers(8, 16)) * L, d_x))
        labels = np.arange(X.shape[0]) % L
        ctx = KdeContext.from_projections(forward(net, X)[0], labels, L, exclude=0)
        _, analytic, _ = smig_step_gradients(net, X[0], ctx)
        numeric = parameter_difference(net, lambda n: instantaneous_loss(forward(n, X[0])[0], ctx).loss)
        tally.add(analytic, numeric)
    return tally.result(instances)


def check_smig_full(seed: int, instances: int = 20, rtol=RTOL, atol=ATOL) -> CheckResult:
    """Parameter gradient through y_t and the references (bandwidths, priors fixed)."""
    rng = np.random.default_rng(seed)
    tally = _Tally("SMIG parameter gradient (through references)", rtol, atol)
    for k in range(instances):
        arch = "paper_default" if k % 2 == 0 else "single_linear"
        d_x = int(rng.integers(4, 9))
        d_y = int(rng.integers(1, 3))
        L = int(rng.integers(2, 4))
        net = _random_net(rng, d_x, d_y, arch)
        X = rng.normal(size=(int(rng.integers(6, 12)) * L, d_x))
        labels = np.arange(X.shape[0]) % L
        t = int(rng.integers(X.shape[0]))
        ctx = KdeContext.from_projections(forward(net, X)[0], labels, L, exclude=t)

        def loss(n):
            Y = forward(n, X)[0]
            return instantaneous_loss(Y[t], ctx.with_projections(Y)).loss

        _, analytic, _ = smig_full_gradients(net, X, t, ctx)
        tally.add(analytic, parameter_difference(net, loss))
    return tally.result(instances)


def run_gradcheck(seed: int = 0) -> list[CheckResult]:
    """Run every check; all must pass for a correct build."""
    seeds = np.random.SeedSequence(seed).generate_state(5)
    return [
        check_backward(int(seeds[0])),
        check_density_gradient(int(seeds[1])),
        check_loss_gradient(int(seeds[2])),
        check_smig_parameters(int(seeds[3])),
        check_smig_full(int(seeds[4])),
    ]
