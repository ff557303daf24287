"""Local and global explanations of sparse piecewise-linear networks.

With ReLU (or any piecewise-linear) activations, the pre-head output for a
fixed input is an affine function of that input: freezing the on/off
pattern of the hidden nodes turns every layer into a linear map, and a
composition of linear maps is linear. The slope of that affine function per
covariate is the local explanation; it can be obtained either by
propagating each covariate separately through the frozen pattern
(``local_explain_empirical``) or as the input gradient
(``local_explain_gradient``). Both agree identically.

Explanations condition on the median probability model structure and draw
the surviving weights from their posterior Gaussians, giving credible
intervals per coefficient out of the box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .network import Network, NetworkSpec, head_transform
from .rng import Rng
from .structure import (
    ActivePathGraph,
    StructureMask,
    active_paths,
    covariate_inclusion,
    structure_of,
)

PIECEWISE_LINEAR = ("relu",)


def _require_piecewise_linear(spec: NetworkSpec) -> None:
    if spec.activation not in PIECEWISE_LINEAR:
        raise ValueError(
            "local explanations require a piecewise-linear activation (relu); "
            f"this network uses {spec.activation!r}"
        )


@dataclass
class WeightSample:
    """Concrete weights and biases for every layer (one posterior draw)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


def mean_weights(net: Network) -> WeightSample:
    if net.spec.mode == "variational":
        return WeightSample([l.mu.copy() for l in net.layers], [l.bias_mu.copy() for l in net.layers])
    return WeightSample([l.w.copy() for l in net.layers], [l.bias.copy() for l in net.layers])


def sample_weights(net: Network, rng: Rng) -> WeightSample:
    """Draw w ~ N(mu, sigma^2) for every edge and bias."""
    if net.spec.mode != "variational":
        return mean_weights(net)
    ws, bs = [], []
    for j, layer in enumerate(net.layers):
        stream = rng.stream("explain", j)
        ws.append(layer.mu + layer.sigma * stream.standard_normal(layer.mu.shape))
        bs.append(layer.bias_mu + layer.bias_sigma * stream.standard_normal(layer.bias_mu.shape))
    return WeightSample(ws, bs)


def _masked_forward(
    spec: NetworkSpec, sample: WeightSample, masks: list[np.ndarray], x: np.ndarray
):
    """Deterministic masked forward pass recording hidden pre-activations."""
    a_hidden = None
    gates: list[np.ndarray] = []
    pre: list[np.ndarray] = []
    for j, (w, b, m) in enumerate(zip(sample.weights, sample.biases, masks)):
        inp = x if a_hidden is None else np.concatenate([a_hidden, x])
        z = (m * w) @ inp + b
        pre.append(z)
        if j < len(sample.weights) - 1:
            gates.append((z > 0.0).astype(np.float64))
            a_hidden = np.maximum(z, 0.0)
    return pre[-1], gates, pre[:-1]


def local_explain_empirical(
    net: Network, mask: StructureMask, sample: WeightSample, x
) -> tuple[np.ndarray, np.ndarray]:
    """Slopes by propagating each covariate through the frozen linear pattern.

    The one-hot inputs flow only along active-path edges with biases zeroed;
    the intercept comes from a bias-only sweep through every retained edge,
    because bias signal also travels along chains that never touch a
    covariate. Returns (beta0 of shape (n_outputs,), beta of shape
    (n_outputs, n_covariates)); slopes for covariates with x_i == 0 are
    reported as zero.
    """
    _require_piecewise_linear(net.spec)
    x = np.asarray(x, dtype=np.float64)
    _, gates, _ = _masked_forward(net.spec, sample, mask.masks, x)
    graph = active_paths(mask)
    v = net.spec.n_covariates
    c = net.spec.n_outputs

    # Covariate sweep: rows i of V carry e_i * x_i through AP-gated edges.
    contrib = np.zeros((v, c))
    V = np.diag(x)  # (v, v)
    carry = None  # (v, width of previous hidden layer)
    for j in range(mask.n_layers):
        w_eff = (graph.kept[j] * sample.weights[j]).T  # (n_in, n_out)
        n_prev = mask.n_prev(j)
        block = V if n_prev == 0 else np.concatenate([carry, V], axis=1)
        z = block @ w_eff
        if j < mask.n_layers - 1:
            carry = z * gates[j][None, :]
        else:
            contrib = z
    beta = np.where(x[:, None] != 0.0, contrib / np.where(x[:, None] != 0.0, x[:, None], 1.0), 0.0).T

    # Bias sweep: zero input, biases on, all retained edges, same gates.
    a = None
    for j in range(mask.n_layers):
        w_eff = mask.masks[j] * sample.weights[j]
        inp = np.zeros(w_eff.shape[1]) if a is None else np.concatenate([a, np.zeros(v)])
        z = w_eff @ inp + sample.biases[j]
        if j < mask.n_layers - 1:
            a = z * gates[j]
    beta0 = z
    return beta0, beta


def local_explain_gradient(
    net: Network, mask: StructureMask, sample: WeightSample, x
) -> tuple[np.ndarray, np.ndarray]:
    """Slopes as the gradient of the pre-head output w.r.t. the input, with
    the activation pattern frozen at x. Identical to the empirical route.

    beta0 is recovered from the affine identity: output minus beta @ x.
    """
    _require_piecewise_linear(net.spec)
    x = np.asarray(x, dtype=np.float64)
    zeta, gates, _ = _masked_forward(net.spec, sample, mask.masks, x)
    v = net.spec.n_covariates

    beta_raw = np.zeros((net.spec.n_outputs, v))
    carry = None  # d zeta / d (hidden activations of layer j)
    for j in range(mask.n_layers - 1, -1, -1):
        w_eff = mask.masks[j] * sample.weights[j]
        local = w_eff if carry is None else (carry * gates[j][None, :]) @ w_eff
        n_prev = mask.n_prev(j)
        beta_raw += local[:, n_prev:]
        if j > 0:
            carry = local[:, :n_prev]
    beta0 = zeta - beta_raw @ x
    beta = np.where(x[None, :] != 0.0, beta_raw, 0.0)
    return beta0, beta


@dataclass
class ExplanationReport:
    """Posterior distribution of the local affine explanation at one input."""

    x: np.ndarray
    output_index: int
    beta_samples: np.ndarray  # (n_samples, n_covariates)
    beta0_samples: np.ndarray  # (n_samples,)
    linpred_samples: np.ndarray  # (n_samples,) pre-head outputs
    prediction_samples: np.ndarray  # (n_samples,) head-transformed
    zeroed: np.ndarray  # bool per covariate: x_i == 0

    @property
    def n_samples(self) -> int:
        return self.beta_samples.shape[0]

    def _summary(self, arr):
        return {
            "mean": np.mean(arr, axis=0),
            "lower": np.quantile(arr, 0.025, axis=0),
            "upper": np.quantile(arr, 0.975, axis=0),
        }

    def to_dict(self) -> dict:
        beta = self._summary(self.beta_samples)
        beta0 = self._summary(self.beta0_samples)
        pred = self._summary(self.prediction_samples)
        return {
            "x": self.x.tolist(),
            "output_index": self.output_index,
            "n_samples": self.n_samples,
            "coefficients": [
                {
                    "covariate": f"x{i + 1}",
                    "mean": float(beta["mean"][i]),
                    "lower": float(beta["lower"][i]),
                    "upper": float(beta["upper"][i]),
                    "zeroed": bool(self.zeroed[i]),
                }
                for i in range(self.x.size)
            ],
            "intercept": {k: float(v) for k, v in beta0.items()},
            "prediction": {k: float(v) for k, v in pred.items()},
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


def explain_with_uncertainty(
    net: Network, x, n_samples: int, rng: Rng, output_index: int = 0
) -> ExplanationReport:
    """Gradient explanations under ``n_samples`` weight draws conditioned on
    the median probability model, with [0.025, 0.975] credible intervals."""
    _require_piecewise_linear(net.spec)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not 0 <= output_index < net.spec.n_outputs:
        raise ValueError("output_index out of range")
    x = np.asarray(x, dtype=np.float64)
    mask = structure_of(net)
    betas, beta0s, zetas, preds = [], [], [], []
    for _ in range(n_samples):
        sample = sample_weights(net, rng)
        beta0, beta = local_explain_gradient(net, mask, sample, x)
        zeta, _, _ = _masked_forward(net.spec, sample, mask.masks, x)
        betas.append(beta[output_index])
        beta0s.append(beta0[output_index])
        zetas.append(zeta[output_index])
        head = head_transform(net.spec, zeta[None, :])
        preds.append(head[0] if np.ndim(head) == 1 else head[0, output_index])
    return ExplanationReport(
        x=x,
        output_index=output_index,
        beta_samples=np.asarray(betas),
        beta0_samples=np.asarray(beta0s),
        linpred_samples=np.asarray(zetas),
        prediction_samples=np.asarray(preds),
        zeroed=x == 0.0,
    )


@dataclass
class GlobalExplanation:
    """Active-path graph of the sparse model plus per-output covariate maps.

    ``entry_maps[c][j][i]`` flags covariate i entering at layer j on a path
    that reaches output c; ``class_maps[c]`` is the union over entry layers.
    """

    graph: ActivePathGraph
    entry_maps: list[list[np.ndarray]]
    class_maps: list[np.ndarray]

    def maps_to_csv(self, path) -> None:
        import csv

        v = len(self.class_maps[0])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["output", "entry_layer"] + [f"x{i + 1}" for i in range(v)])
            for c, per_layer in enumerate(self.entry_maps):
                for j, row in enumerate(per_layer):
                    writer.writerow([c, j] + row.astype(int).tolist())
                writer.writerow([c, "any"] + self.class_maps[c].astype(int).tolist())


def global_explain(net: Network) -> GlobalExplanation:
    """Structure-level view of the sparse model: which covariates can reach
    each output, and at which entry layers."""
    mask = structure_of(net)
    graph = active_paths(mask)
    entry_maps, class_maps = [], []
    for c in range(net.spec.n_outputs):
        sub = active_paths(mask, outputs=[c])
        per_layer = []
        for j in range(mask.n_layers):
            cov_block = sub.kept[j][:, mask.cov_columns(j)]
            per_layer.append(cov_block.any(axis=0))
        entry_maps.append(per_layer)
        class_maps.append(covariate_inclusion(sub))
    return GlobalExplanation(graph, entry_maps, class_maps)


def lime_oracle(
    net: Network,
    sample: WeightSample,
    mask: StructureMask,
    x,
    eps: float,
    n: int,
    rng: Rng,
) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares local surrogate (test oracle only).

    Fits pre-head outputs on ``n`` points drawn uniformly from the eps-ball
    around x; inside a ball that preserves the activation pattern this
    recovers the affine explanation exactly. Returns (beta0, beta) with
    beta of shape (n_outputs, n_covariates).
    """
    _require_piecewise_linear(net.spec)
    x = np.asarray(x, dtype=np.float64)
    v = x.size
    if n < v + 1:
        raise ValueError(f"need at least {v + 1} samples to fit {v} slopes plus intercept")
    stream = rng.stream("lime")
    raw = stream.standard_normal((n, v))
    dirs = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    radii = eps * stream.random(n) ** (1.0 / v)
    points = x + dirs * radii[:, None]
    targets = np.stack([_masked_forward(net.spec, sample, mask.masks, p)[0] for p in points])
    design = np.concatenate([np.ones((n, 1)), points], axis=1)
    coef, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    if rank < v + 1:
        raise ValueError("degenerate design matrix in local surrogate fit")
    return coef[0], coef[1:].T


def pattern_stable_radius(
    net: Network, sample: WeightSample, mask: StructureMask, x, default: float = 1.0
) -> float:
    """Half the distance from x to the nearest activation boundary.

    For each hidden node, |pre-activation| / ||input gradient of the
    pre-activation|| bounds how far x can move before that node flips;
    perturbations inside half the minimum keep the pattern fixed. Nodes
    whose pre-activation does not depend on x cannot flip and are skipped.
    """
    _require_piecewise_linear(net.spec)
    x = np.asarray(x, dtype=np.float64)
    _, gates, pre = _masked_forward(net.spec, sample, mask.masks, x)
    v = x.size
    best = np.inf
    jac = None  # d z_j / d x, shape (width_j, v)
    for j in range(mask.n_layers - 1):
        w_eff = mask.masks[j] * sample.weights[j]
        n_prev = mask.n_prev(j)
        jz = w_eff[:, n_prev:].copy()
        if n_prev:
            jz += w_eff[:, :n_prev] @ jac
        norms = np.linalg.norm(jz, axis=1)
        sensitive = norms > 0
        if np.any(sensitive):
            best = min(best, float(np.min(np.abs(pre[j][sensitive]) / norms[sensitive])))
        jac = jz * gates[j][:, None]
    return default if not np.isfinite(best) else 0.5 * best
