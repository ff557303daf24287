"""Mini-batch optimization of the negative ELBO (or L1 loss) with Adam.

The training set is split into ``iters_per_epoch`` contiguous shuffled
partitions, reshuffled every epoch from the run seed. Each step minimizes

    KL / iters_per_epoch  +  sum over batch of pointwise NLL

so the KL weights of one epoch add up to exactly one. In l1 mode the KL is
replaced by the L1 penalty with the same 1/iters_per_epoch weighting, which
makes one epoch's objective equal to the full-data NLL plus the penalty.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .layers import LayerGrads, dense_backward, layer_kl_backward, lrt_backward
from .network import (
    Network,
    forward_deterministic,
    forward_sample,
    l1_penalty_value,
    log_likelihood_from_logits,
    nll_grad_logits,
    total_kl,
)
from .rng import Rng


class NumericError(RuntimeError):
    """Raised when training produces a non-finite loss or parameter."""


@dataclass(frozen=True)
class TrainConfig:
    lr: float
    epochs: int
    iters_per_epoch: int
    seed: int = 0
    n_mc_samples: int = 1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("lr must be nonnegative")
        if self.epochs < 1 or self.iters_per_epoch < 1:
            raise ValueError("epochs and iters_per_epoch must be >= 1")
        if self.n_mc_samples < 1:
            raise ValueError("n_mc_samples must be >= 1")


@dataclass
class TrainLog:
    """Per-epoch objective decomposition and training metric.

    The metric (accuracy or RMSE) is measured on the sampled batch
    predictions the optimizer saw during the epoch, before each update, so
    it costs no extra forward passes.
    """

    loss: list[float] = field(default_factory=list)
    nll: list[float] = field(default_factory=list)
    kl: list[float] = field(default_factory=list)
    metric: list[float] = field(default_factory=list)
    metric_name: str = "acc"
    seconds: float = 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "loss", "nll", "kl", self.metric_name])
            for i in range(len(self.loss)):
                writer.writerow([i, self.loss[i], self.nll[i], self.kl[i], self.metric[i]])


class AdamState:
    def __init__(self, params: list[np.ndarray], beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray], lr: float):
    """In-place Adam update with bias correction."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return state


def _zero_grads_like(params: list[np.ndarray]) -> list[np.ndarray]:
    return [np.zeros_like(p) for p in params]


def _accumulate_network_grads(net: Network, fc, grad_logits, out: list[np.ndarray], scale=1.0):
    """Backpropagate d(loss)/d(logits) through every layer, adding scaled
    parameter gradients into ``out`` (ordered as net.parameters())."""
    grad = grad_logits
    per_layer: list[LayerGrads] = [None] * net.n_layers
    for j in range(net.n_layers - 1, -1, -1):
        lg = lrt_backward(net.layers[j], fc.layer_caches[j], grad)
        per_layer[j] = lg
        if j > 0:
            hidden_grad = lg.a_prev[:, : net.layers[j].n_prev]
            grad = hidden_grad * net.activation_grad(fc.pre_acts[j - 1])
    idx = 0
    for lg in per_layer:
        for g in lg.parameters():
            out[idx] += scale * g
            idx += 1


def _metric_name(spec) -> str:
    return "rmse" if spec.likelihood == "gaussian" else "acc"


def _batch_metric_terms(spec, logits, yb) -> float:
    """Per-batch numerator of the epoch training metric, measured on the
    sampled predictions the optimizer actually saw (before the update)."""
    if spec.likelihood == "bernoulli":
        return float(np.sum((logits[:, 0] > 0.0) == (yb > 0.5)))
    if spec.likelihood == "categorical":
        return float(np.sum(np.argmax(logits, axis=1) == yb.astype(np.int64)))
    return float(np.sum((logits[:, 0] - yb) ** 2))


def train(net: Network, dataset, config: TrainConfig) -> tuple[Network, TrainLog]:
    """Optimize the network in place; returns it with the per-epoch log.

    Raises NumericError with an epoch/batch diagnostic if the loss or any
    parameter goes non-finite.
    """
    X = np.asarray(dataset.X, dtype=np.float64)
    y = np.asarray(dataset.y)
    n = X.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")
    if X.shape[1] != net.spec.n_covariates:
        raise ValueError(f"dataset has {X.shape[1]} covariates, network expects {net.spec.n_covariates}")

    params = net.parameters()
    state = AdamState(params, config.adam_beta1, config.adam_beta2, config.adam_eps)
    rng = Rng(config.seed)
    shuffle_stream = rng.stream("batching")
    log = TrainLog()
    started = time.perf_counter()
    variational = net.spec.mode == "variational"
    ipe = config.iters_per_epoch

    for epoch in range(config.epochs):
        order = shuffle_stream.permutation(n)
        batches = np.array_split(order, ipe)
        epoch_nll = 0.0
        epoch_reg = 0.0
        metric_sum = 0.0
        for b, batch_idx in enumerate(batches):
            xb = X[batch_idx]
            yb = y[batch_idx]
            grads = _zero_grads_like(params)
            nll_value = 0.0

            if variational:
                for _ in range(config.n_mc_samples):
                    _, fc = forward_sample(net, xb, rng)
                    nll_value += -float(
                        np.sum(log_likelihood_from_logits(net.spec, fc.logits, yb))
                    )
                    grad_logits = nll_grad_logits(net.spec, fc.logits, yb)
                    _accumulate_network_grads(
                        net, fc, grad_logits, grads, scale=1.0 / config.n_mc_samples
                    )
                nll_value /= config.n_mc_samples
                metric_sum += _batch_metric_terms(net.spec, fc.logits, yb)
                reg_value = total_kl(net)
                idx = 0
                for layer in net.layers:
                    klg = layer_kl_backward(layer, net.spec.prior)
                    for g in klg.parameters():
                        grads[idx] += g / ipe
                        idx += 1
            else:
                _, logits, pre_acts = forward_deterministic(net, xb)
                nll_value = -float(np.sum(log_likelihood_from_logits(net.spec, logits, yb)))
                metric_sum += _batch_metric_terms(net.spec, logits, yb)
                grad = nll_grad_logits(net.spec, logits, yb)
                per_layer = [None] * net.n_layers
                caches = _dense_caches(net, xb, pre_acts)
                for j in range(net.n_layers - 1, -1, -1):
                    dg = dense_backward(net.layers[j], caches[j], grad)
                    per_layer[j] = dg
                    if j > 0:
                        hidden_grad = dg.a_prev[:, : net.layers[j].n_prev]
                        grad = hidden_grad * net.activation_grad(pre_acts[j - 1])
                idx = 0
                lam = net.spec.l1_penalty
                for j, dg in enumerate(per_layer):
                    grads[idx] += dg.w + (lam / ipe) * np.sign(net.layers[j].w)
                    grads[idx + 1] += dg.bias
                    idx += 2
                reg_value = net.spec.l1_penalty * l1_penalty_value(net)

            batch_loss = nll_value + reg_value / ipe
            if not np.isfinite(batch_loss):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {b}: nll={nll_value}, reg={reg_value}"
                )
            adam_step(state, params, grads, config.lr)
            epoch_nll += nll_value
            epoch_reg = reg_value

        for k, p in enumerate(params):
            if not np.all(np.isfinite(p)):
                raise NumericError(f"non-finite parameter array {k} after epoch {epoch}")

        log.metric_name = _metric_name(net.spec)
        metric = metric_sum / n
        if net.spec.likelihood == "gaussian":
            metric = float(np.sqrt(metric))
        log.loss.append(epoch_nll + epoch_reg)
        log.nll.append(epoch_nll)
        log.kl.append(epoch_reg)
        log.metric.append(metric)

    log.seconds = time.perf_counter() - started
    return net, log


def _dense_caches(net: Network, xb: np.ndarray, pre_acts: list[np.ndarray]):
    """Rebuild per-layer input caches for the deterministic backward pass."""
    from .layers import DenseCache

    caches = []
    a_hidden = None
    for j in range(net.n_layers):
        inp = net._stack_input(a_hidden, xb)
        caches.append(DenseCache(a_prev=inp))
        if j < net.n_layers - 1:
            a_hidden = net._activation(pre_acts[j])
    return caches
