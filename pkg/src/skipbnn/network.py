"""Full input-skip networks: assembly, forward passes, prediction, model files.

A network is a stack of input-skip layers followed by a likelihood head.
Setting ``hidden_widths = []`` collapses the variational network to a
Bayesian linear (logistic) regression; ``mode = "l1"`` swaps the
variational layers for deterministic ones trained with an L1 penalty and
pruned at a fixed magnitude threshold.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .layers import (
    DenseLayer,
    LayerPrior,
    VariationalLayer,
    dense_forward,
    layer_kl,
    lrt_forward,
    mpm_forward,
)
from .mathops import relu, relu_grad, sigmoid, softmax
from .rng import Rng

ACTIVATIONS = ("sigmoid", "relu")
LIKELIHOODS = ("bernoulli", "categorical", "gaussian")
MODES = ("variational", "l1")


class ModelFormatError(ValueError):
    """Raised when a model file is malformed, truncated, or version-mismatched."""


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture and inference-mode description of a network."""

    n_covariates: int
    hidden_widths: tuple[int, ...] = ()
    n_outputs: int = 1
    activation: str = "sigmoid"
    likelihood: str = "bernoulli"
    gaussian_phi: float = 1.0
    mode: str = "variational"
    prior: LayerPrior = field(default_factory=lambda: LayerPrior(2.5, 0.001))
    lambda_init_hidden: tuple[float, float] = (-10.0, -7.0)
    lambda_init_covariate: tuple[float, float] = (5.0, 5.0)
    l1_penalty: float = 0.0
    prune_threshold: float = 0.005

    def __post_init__(self):
        if self.n_covariates < 1:
            raise ValueError("n_covariates must be >= 1")
        if self.n_outputs < 1:
            raise ValueError("n_outputs must be >= 1")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.likelihood not in LIKELIHOODS:
            raise ValueError(f"unknown likelihood {self.likelihood!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.likelihood == "bernoulli" and self.n_outputs != 1:
            raise ValueError("bernoulli likelihood uses a single output logit")
        if self.likelihood == "gaussian" and self.gaussian_phi <= 0:
            raise ValueError("gaussian_phi must be positive")
        if self.mode == "l1" and not self.prune_threshold > 0:
            raise ValueError("l1 mode requires a positive prune threshold")
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))

    @property
    def n_layers(self) -> int:
        return len(self.hidden_widths) + 1

    def layer_dims(self) -> list[tuple[int, int, int]]:
        """Per layer: (n_out, n_in, n_prev). Covariates are concatenated to
        every layer's input past the first."""
        dims = []
        prev = 0
        for width in self.hidden_widths:
            dims.append((width, prev + self.n_covariates if prev else self.n_covariates, prev))
            prev = width
        n_in = prev + self.n_covariates if prev else self.n_covariates
        dims.append((self.n_outputs, n_in, prev))
        return dims

    def weight_count(self) -> int:
        """Number of non-bias weights in the full network."""
        return sum(n_out * n_in for n_out, n_in, _ in self.layer_dims())

    def to_dict(self) -> dict:
        return {
            "n_covariates": self.n_covariates,
            "hidden_widths": list(self.hidden_widths),
            "n_outputs": self.n_outputs,
            "activation": self.activation,
            "likelihood": self.likelihood,
            "gaussian_phi": self.gaussian_phi,
            "mode": self.mode,
            "prior_std": self.prior.std,
            "prior_inclusion_prob": self.prior.inclusion_prob,
            "lambda_init_hidden": list(self.lambda_init_hidden),
            "lambda_init_covariate": list(self.lambda_init_covariate),
            "l1_penalty": self.l1_penalty,
            "prune_threshold": self.prune_threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            n_covariates=d["n_covariates"],
            hidden_widths=tuple(d["hidden_widths"]),
            n_outputs=d["n_outputs"],
            activation=d["activation"],
            likelihood=d["likelihood"],
            gaussian_phi=d["gaussian_phi"],
            mode=d["mode"],
            prior=LayerPrior(d["prior_std"], d["prior_inclusion_prob"]),
            lambda_init_hidden=tuple(d["lambda_init_hidden"]),
            lambda_init_covariate=tuple(d["lambda_init_covariate"]),
            l1_penalty=d["l1_penalty"],
            prune_threshold=d["prune_threshold"],
        )


class Network:
    """Live parameter state for a NetworkSpec."""

    def __init__(self, spec: NetworkSpec, layers, seed: int):
        self.spec = spec
        self.layers = layers
        self.seed = int(seed)

    @classmethod
    def build(cls, spec: NetworkSpec, seed: int) -> "Network":
        rng = Rng(seed)
        layers = []
        for j, (n_out, n_in, n_prev) in enumerate(spec.layer_dims()):
            stream = rng.stream("init", j)
            if spec.mode == "variational":
                layers.append(
                    VariationalLayer.initialize(
                        n_out,
                        n_in,
                        n_prev,
                        spec.lambda_init_hidden,
                        spec.lambda_init_covariate,
                        stream,
                    )
                )
            else:
                layers.append(DenseLayer.initialize(n_out, n_in, n_prev, stream))
        return cls(spec, layers, seed)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for layer in self.layers:
            params.extend(layer.parameters())
        return params

    def _activation(self, z):
        return sigmoid(z) if self.spec.activation == "sigmoid" else relu(z)

    def activation_grad(self, z):
        if self.spec.activation == "sigmoid":
            s = sigmoid(z)
            return s * (1.0 - s)
        return relu_grad(z)

    def _stack_input(self, a_hidden: np.ndarray | None, x: np.ndarray) -> np.ndarray:
        if a_hidden is None:
            return x
        return np.concatenate([a_hidden, x], axis=-1)


def _check_x(spec: NetworkSpec, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.n_covariates:
        raise ValueError(f"expected {spec.n_covariates} covariates, got shape {x.shape}")
    return x, single


@dataclass
class ForwardCaches:
    """Per-layer caches, pre-activations, and post-activations of one pass."""

    layer_caches: list
    pre_acts: list[np.ndarray]
    activations: list[np.ndarray]
    logits: np.ndarray


def forward_sample(net: Network, x, rng: Rng) -> tuple[np.ndarray, ForwardCaches]:
    """One posterior draw of the head parameters via the reparameterized pass.

    Returns (head parameters, caches). Hidden layers apply the configured
    activation; the head transform is sigmoid for a single-logit Bernoulli,
    softmax for categorical, identity for a Gaussian mean.
    """
    if net.spec.mode != "variational":
        raise ValueError("forward_sample requires a variational network")
    X, single = _check_x(net.spec, x)
    caches, pre_acts, activations = [], [], []
    a_hidden = None
    for j, layer in enumerate(net.layers):
        inp = net._stack_input(a_hidden, X)
        z, cache = lrt_forward(layer, inp, rng.stream("layer", j))
        caches.append(cache)
        pre_acts.append(z)
        if j < net.n_layers - 1:
            a_hidden = net._activation(z)
            activations.append(a_hidden)
    logits = pre_acts[-1]
    params = head_transform(net.spec, logits)
    fc = ForwardCaches(caches, pre_acts, activations, logits)
    return (params[0] if single else params), fc


def forward_deterministic(
    net: Network,
    x,
    masks: list[np.ndarray] | None = None,
    sample_weights: bool = False,
    rng: Rng | None = None,
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Forward pass through a fixed structure (mask) with mean or sampled weights.

    With ``masks=None`` every weight is kept. Returns (head parameters,
    pre-head logits, per-layer hidden pre-activations).
    """
    X, single = _check_x(net.spec, x)
    pre_acts = []
    a_hidden = None
    for j, layer in enumerate(net.layers):
        inp = net._stack_input(a_hidden, X)
        mask = masks[j] if masks is not None else np.ones_like(_layer_weights(layer))
        if net.spec.mode == "variational":
            stream = rng.stream("layer", j) if sample_weights else None
            z = mpm_forward(layer, inp, mask, sample_weights, stream)
        else:
            z, _ = dense_forward(layer, inp, mask)
        pre_acts.append(z)
        if j < net.n_layers - 1:
            a_hidden = net._activation(z)
    logits = pre_acts[-1]
    params = head_transform(net.spec, logits)
    if single:
        return params[0], logits[0], [p[0] for p in pre_acts[:-1]]
    return params, logits, pre_acts[:-1]


def _layer_weights(layer) -> np.ndarray:
    return layer.mu if isinstance(layer, VariationalLayer) else layer.w


def head_transform(spec: NetworkSpec, logits: np.ndarray) -> np.ndarray:
    """Map pre-head logits to likelihood parameters.

    Bernoulli: success probability (last axis dropped). Categorical: class
    probabilities. Gaussian: the mean(s), identity.
    """
    if spec.likelihood == "bernoulli":
        return sigmoid(logits[..., 0])
    if spec.likelihood == "categorical":
        return softmax(logits, axis=-1)
    return logits[..., 0] if spec.n_outputs == 1 else logits


def log_likelihood(spec: NetworkSpec, params, y) -> np.ndarray:
    """Pointwise log-likelihood of targets under head parameters.

    Probabilities are clamped at 1e-12 before the logarithm. Class labels
    outside [0, n_outputs) are rejected.
    """
    params = np.asarray(params, dtype=np.float64)
    y = np.asarray(y)
    if spec.likelihood == "bernoulli":
        p = np.clip(params, 1e-12, 1.0 - 1e-12)
        yf = y.astype(np.float64)
        return yf * np.log(p) + (1.0 - yf) * np.log1p(-p)
    if spec.likelihood == "categorical":
        labels = y.astype(np.int64)
        if np.any((labels < 0) | (labels >= spec.n_outputs)):
            raise ValueError("class label outside [0, n_outputs)")
        p = np.clip(params, 1e-12, 1.0)
        rows = np.atleast_2d(p)
        out = np.log(rows[np.arange(rows.shape[0]), np.atleast_1d(labels)])
        return out if params.ndim > 1 else out[0]
    phi = spec.gaussian_phi
    return -0.5 * np.log(2.0 * np.pi * phi) - (y.astype(np.float64) - params) ** 2 / (2.0 * phi)


def log_likelihood_from_logits(spec: NetworkSpec, logits: np.ndarray, y) -> np.ndarray:
    """Numerically stable pointwise log-likelihood straight from logits."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(y)
    if spec.likelihood == "bernoulli":
        z = logits[:, 0]
        yf = y.astype(np.float64)
        # log sigmoid(z) = -softplus(-z); log(1 - sigmoid(z)) = -softplus(z)
        return -(1.0 - yf) * np.logaddexp(0.0, z) - yf * np.logaddexp(0.0, -z)
    if spec.likelihood == "categorical":
        labels = y.astype(np.int64)
        lse = np.log(np.sum(np.exp(logits - logits.max(axis=1, keepdims=True)), axis=1))
        lse += logits.max(axis=1)
        return logits[np.arange(logits.shape[0]), labels] - lse
    phi = spec.gaussian_phi
    m = logits[:, 0]
    return -0.5 * np.log(2.0 * np.pi * phi) - (y.astype(np.float64) - m) ** 2 / (2.0 * phi)


def nll_grad_logits(spec: NetworkSpec, logits: np.ndarray, y) -> np.ndarray:
    """Gradient of the summed negative log-likelihood with respect to logits."""
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_1d(y)
    if spec.likelihood == "bernoulli":
        p = sigmoid(logits[:, 0])
        return (p - y.astype(np.float64))[:, None]
    if spec.likelihood == "categorical":
        p = softmax(logits, axis=1)
        grad = p.copy()
        grad[np.arange(logits.shape[0]), y.astype(np.int64)] -= 1.0
        return grad
    return (logits[:, 0] - y.astype(np.float64))[:, None] / spec.gaussian_phi


def total_kl(net: Network) -> float:
    """Sum of per-layer KL divergences (layers are independent)."""
    if net.spec.mode != "variational":
        raise ValueError("total_kl requires a variational network")
    return sum(layer_kl(layer, net.spec.prior) for layer in net.layers)


@dataclass
class Prediction:
    """Monte-Carlo predictive summary: mean head parameters and the empirical
    [0.025, 0.975] quantiles of the per-draw parameters."""

    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_samples: int
    samples: np.ndarray | None = None


def predict(
    net: Network,
    x,
    n_samples: int,
    rng: Rng,
    masks: list[np.ndarray] | None = None,
    sample_weights: bool = True,
    keep_samples: bool = False,
) -> Prediction:
    """Average ``n_samples`` posterior draws of the head parameters.

    With ``masks`` given, draws condition on that structure (weights sampled
    from their Gaussians unless ``sample_weights`` is off). Deterministic
    (l1-mode) networks ignore the sampling arguments.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    X, single = _check_x(net.spec, x)
    draws = []
    for _ in range(n_samples):
        if net.spec.mode == "l1":
            params, _, _ = forward_deterministic(net, X, masks)
        elif masks is None:
            params, _ = forward_sample(net, X, rng)
        else:
            params, _, _ = forward_deterministic(
                net, X, masks, sample_weights=sample_weights, rng=rng
            )
        draws.append(params)
    stack = np.stack(draws, axis=0)
    mean = stack.mean(axis=0)
    lower = np.quantile(stack, 0.025, axis=0)
    upper = np.quantile(stack, 0.975, axis=0)
    if single:
        mean, lower, upper = mean[0], lower[0], upper[0]
    return Prediction(mean, lower, upper, n_samples, stack if keep_samples else None)


def l1_penalty_value(net: Network) -> float:
    """L1 norm of all non-bias weights."""
    return float(sum(np.abs(layer.w).sum() for layer in net.layers))


def l1_loss(net: Network, x, y) -> float:
    """Negative log-likelihood of a batch plus the weighted L1 penalty.

    Biases are exempt from the penalty, mirroring their exemption from
    inclusion variables in the variational mode.
    """
    if net.spec.mode != "l1":
        raise ValueError("l1_loss requires an l1-mode network")
    X, _ = _check_x(net.spec, x)
    _, logits, _ = forward_deterministic(net, X)
    nll = -float(np.sum(log_likelihood_from_logits(net.spec, logits, y)))
    return nll + net.spec.l1_penalty * l1_penalty_value(net)


def l1_prune_masks(net: Network) -> list[np.ndarray]:
    """Binary masks keeping weights with magnitude above the prune threshold."""
    thr = net.spec.prune_threshold
    return [(np.abs(layer.w) > thr).astype(np.uint8) for layer in net.layers]


# --- model files -----------------------------------------------------------
#
# Layout: magic, version, u64 header length, JSON header (spec, seed, array
# manifest), then raw little-endian float64 blocks in manifest order.

_MAGIC = b"SBNN"
_VERSION = 1


def _array_manifest(net: Network) -> list[tuple[str, np.ndarray]]:
    named = []
    for j, layer in enumerate(net.layers):
        if isinstance(layer, VariationalLayer):
            fields = ("mu", "rho", "lam", "bias_mu", "bias_rho")
        else:
            fields = ("w", "bias")
        for name in fields:
            named.append((f"layer{j}.{name}", getattr(layer, name)))
    return named


def to_bytes(net: Network) -> bytes:
    named = _array_manifest(net)
    header = {
        "spec": net.spec.to_dict(),
        "seed": net.seed,
        "arrays": [[name, list(arr.shape)] for name, arr in named],
    }
    hj = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(_VERSION.to_bytes(4, "little"))
    buf.write(len(hj).to_bytes(8, "little"))
    buf.write(hj)
    for _, arr in named:
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def from_bytes(data: bytes) -> Network:
    buf = io.BytesIO(data)
    magic = buf.read(4)
    if magic != _MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    version = int.from_bytes(buf.read(4), "little")
    if version != _VERSION:
        raise ModelFormatError(f"unsupported model file version {version}")
    hlen_bytes = buf.read(8)
    if len(hlen_bytes) != 8:
        raise ModelFormatError("truncated model file header")
    hlen = int.from_bytes(hlen_bytes, "little")
    hj = buf.read(hlen)
    if len(hj) != hlen:
        raise ModelFormatError("truncated model file header")
    try:
        header = json.loads(hj.decode("utf-8"))
        spec = NetworkSpec.from_dict(header["spec"])
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"invalid model header: {exc}") from exc

    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        raw = buf.read(8 * count)
        if len(raw) != 8 * count:
            raise ModelFormatError(f"truncated model file at array {name}")
        arrays[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)

    layers = []
    for j, (n_out, n_in, n_prev) in enumerate(spec.layer_dims()):
        if spec.mode == "variational":
            layers.append(
                VariationalLayer(
                    arrays[f"layer{j}.mu"],
                    arrays[f"layer{j}.rho"],
                    arrays[f"layer{j}.lam"],
                    arrays[f"layer{j}.bias_mu"],
                    arrays[f"layer{j}.bias_rho"],
                    n_prev,
                )
            )
        else:
            layers.append(DenseLayer(arrays[f"layer{j}.w"], arrays[f"layer{j}.bias"], n_prev))
        if layers[-1].n_out != n_out or layers[-1].n_in != n_in:
            raise ModelFormatError(f"array shapes do not match spec at layer {j}")
    return Network(spec, layers, header["seed"])


def save(net: Network, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(net))


def load(path) -> Network:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
