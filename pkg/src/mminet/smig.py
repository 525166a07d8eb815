"""Instantaneous mutual-information loss and its gradient.

For a projected sample ``y`` and class-conditional KDEs ``l_c = log p(y|c)``
with priors ``P(c)``, define ``a_c = log P(c) + l_c`` and posteriors
``w = softmax(a)``. The per-sample loss is the negated instantaneous MI
estimate

    loss = logsumexp(a) - sum_c w_c * l_c

Reference points, bandwidths and priors are held constant; only ``y`` is
differentiated (including inside ``w``). With ``g_c = grad l_c`` and
``lbar = sum_c w_c l_c`` the gradient simplifies to

    grad_y loss = -sum_c w_c (l_c - lbar) g_c

Backpropagating it through the network gives the stochastic MI gradient.

The references are themselves network outputs. :func:`reference_gradients`
gives the loss gradient with respect to each reference point (bandwidths and
priors still constant): with ``beta_c = -w_c (l_c - lbar)`` and kernel
softmax weights ``v_j`` within class ``c``,

    d loss / d y_j = beta_c * v_j * H_c^{-1} (y_t - y_j)

:func:`smig_full_gradients` backpropagates both parts through one batched
pass over the training set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .density import KdeContext, _class_terms, _density_and_grad, logsumexp_weights
from .nn import ProjectionNetwork, backward, forward


@dataclass
class SmigEvaluation:
    loss: float
    grad_y: np.ndarray
    log_joint: np.ndarray  # a_c = log P(c) + log p(y|c)
    posteriors: np.ndarray  # P(c|y)
    log_densities: np.ndarray  # log p(y|c)


def instantaneous_loss(y_t, context: KdeContext) -> SmigEvaluation:
    y_t = np.asarray(y_t, dtype=np.float64).reshape(-1)
    L = context.class_count
    logp = np.empty(L)
    grads = np.empty((L, y_t.shape[0]))
    for c in range(L):
        logp[c], grads[c] = _density_and_grad(y_t, context, c)
    a = context.log_priors + logp
    lse, w = logsumexp_weights(a)
    lbar = w @ logp
    loss = float(lse - lbar)
    grad_y = -((w * (logp - lbar)) @ grads)
    return SmigEvaluation(loss, grad_y, a, w, logp)


def loss_weights(evaluation: SmigEvaluation) -> np.ndarray:
    """``d loss / d log p(y|c)`` for every class."""
    w, logp = evaluation.posteriors, evaluation.log_densities
    return -w * (logp - w @ logp)


def reference_gradients(y_t, context: KdeContext, evaluation: SmigEvaluation | None = None):
    """Loss gradient with respect to every reference point, one array per class."""
    y_t = np.asarray(y_t, dtype=np.float64).reshape(-1)
    if evaluation is None:
        evaluation = instantaneous_loss(y_t, context)
    beta = loss_weights(evaluation)
    out = []
    for c in range(context.class_count):
        _, v, refs, H = _class_terms(y_t, context, c)
        out.append(beta[c] * v[:, None] * (y_t - refs) / H)
    return out


def smig_step_gradients(net: ProjectionNetwork, x_t, context: KdeContext):
    """Loss at ``x_t`` and its gradient w.r.t. every network parameter.

    Returns ``(loss, grads, evaluation)`` with ``grads`` aligned to
    ``net.parameters()``.
    """
    y_t, tape = forward(net, x_t)
    evaluation = instantaneous_loss(y_t, context)
    grads = backward(net, tape, evaluation.grad_y)
    return evaluation.loss, grads, evaluation


def smig_full_gradients(net: ProjectionNetwork, X, t: int, context: KdeContext, tape=None):
    """Parameter gradient through both ``y_t`` and every reference projection.

    ``context`` must have been built from ``forward(net, X)`` (it carries the
    row index of each reference); ``tape`` is that forward pass and is
    recomputed when omitted. Returns ``(loss, grads, evaluation)``.
    """
    if context.ref_index is None:
        raise ValueError("context has no reference index; build it with from_projections")
    if tape is None:
        Y, tape = forward(net, X)
    else:
        Y = tape[-1][1]
    evaluation = instantaneous_loss(Y[t], context)
    G = np.zeros_like(Y)
    G[t] = evaluation.grad_y
    for rows, g in zip(context.ref_index, reference_gradients(Y[t], context, evaluation)):
        G[rows] += g
    grads = backward(net, tape, G)
    return evaluation.loss, grads, evaluation
