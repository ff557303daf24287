"""One input-skip layer with Bernoulli-Gaussian (spike-and-slab) weight posteriors.

Each edge carries a variational triplet: a Gaussian mean ``mu``, an
unconstrained scale ``rho`` with ``sigma = softplus(rho)``, and an
unconstrained inclusion logit ``lam`` with ``alpha = sigmoid(lam)``. Biases
are plain Gaussians and carry no inclusion variable. The forward pass uses
the local reparameterization trick: the pre-activation of node p given
inputs a is Gaussian with

    mean  m_p = bias_mu_p + sum_k alpha_kp * mu_kp * a_k
    var s_p^2 = bias_sigma_p^2
                + sum_k (alpha_kp (sigma_kp^2 + mu_kp^2) - alpha_kp^2 mu_kp^2) a_k^2,

the exact first and second moments of the gated weight sum. Gradients are
hand-derived through m and s (pathwise, with the standard-normal draw held
fixed), so no autodiff framework is involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mathops import check_finite, sigmoid, softplus, softplus_inv

# Inclusion probabilities are clamped away from {0, 1} inside KL logarithms
# only; the forward moments use raw alpha so degenerate layers stay exact.
ALPHA_EPS = 1e-8

INIT_SIGMA = 0.05


@dataclass(frozen=True)
class LayerPrior:
    """Spike-and-slab prior: N(0, std^2) slab gated by Bernoulli(inclusion_prob)."""

    std: float
    inclusion_prob: float

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("prior std must be positive")
        if not 0.0 < self.inclusion_prob < 1.0:
            raise ValueError("prior inclusion probability must lie in (0, 1)")


@dataclass
class VariationalLayer:
    """Variational parameters of one layer, all stored unconstrained.

    ``mu``, ``rho`` and ``lam`` have shape (n_out, n_in). The leading
    ``n_prev`` input columns receive the previous hidden layer's activations;
    the trailing columns receive the raw covariates (input-skip). The first
    layer has ``n_prev == 0``.
    """

    mu: np.ndarray
    rho: np.ndarray
    lam: np.ndarray
    bias_mu: np.ndarray
    bias_rho: np.ndarray
    n_prev: int

    @property
    def n_out(self) -> int:
        return self.mu.shape[0]

    @property
    def n_in(self) -> int:
        return self.mu.shape[1]

    @property
    def sigma(self) -> np.ndarray:
        return softplus(self.rho)

    @property
    def alpha(self) -> np.ndarray:
        return sigmoid(self.lam)

    @property
    def bias_sigma(self) -> np.ndarray:
        return softplus(self.bias_rho)

    def parameters(self) -> list[np.ndarray]:
        return [self.mu, self.rho, self.lam, self.bias_mu, self.bias_rho]

    @classmethod
    def initialize(
        cls,
        n_out: int,
        n_in: int,
        n_prev: int,
        lam_hidden_range: tuple[float, float],
        lam_cov_range: tuple[float, float],
        stream: np.random.Generator,
    ) -> "VariationalLayer":
        """Fresh layer: fan-in uniform mu, sigma near INIT_SIGMA, and inclusion
        logits drawn uniformly from separate ranges for hidden-origin and
        covariate-origin columns."""
        if not 0 <= n_prev <= n_in:
            raise ValueError("n_prev must lie in [0, n_in]")
        bound = 1.0 / np.sqrt(n_in)
        mu = stream.uniform(-bound, bound, size=(n_out, n_in))
        rho = np.full((n_out, n_in), softplus_inv(INIT_SIGMA))
        lam = np.empty((n_out, n_in))
        lam[:, :n_prev] = stream.uniform(*lam_hidden_range, size=(n_out, n_prev))
        lam[:, n_prev:] = stream.uniform(*lam_cov_range, size=(n_out, n_in - n_prev))
        bias_mu = np.zeros(n_out)
        bias_rho = np.full(n_out, softplus_inv(INIT_SIGMA))
        return cls(mu, rho, lam, bias_mu, bias_rho, n_prev)


@dataclass
class LrtCache:
    """Forward-pass state retained for the backward pass."""

    a_prev: np.ndarray  # (batch, n_in)
    eps: np.ndarray  # (batch, n_out) standard-normal draws
    m: np.ndarray  # (batch, n_out)
    s: np.ndarray  # (batch, n_out)


@dataclass
class LayerGrads:
    mu: np.ndarray
    rho: np.ndarray
    lam: np.ndarray
    bias_mu: np.ndarray
    bias_rho: np.ndarray
    a_prev: np.ndarray | None = None

    def parameters(self) -> list[np.ndarray]:
        return [self.mu, self.rho, self.lam, self.bias_mu, self.bias_rho]


def _weight_moments(layer: VariationalLayer):
    alpha = layer.alpha
    mu = layer.mu
    sigma = layer.sigma
    w_mean = alpha * mu
    w_var = alpha * (sigma**2 + mu**2) - alpha**2 * mu**2
    return w_mean, w_var


def _as_batch(a_prev: np.ndarray, n_in: int) -> tuple[np.ndarray, bool]:
    a = np.asarray(a_prev, dtype=np.float64)
    single = a.ndim == 1
    if single:
        a = a[None, :]
    if a.ndim != 2 or a.shape[1] != n_in:
        raise ValueError(f"expected input width {n_in}, got shape {a.shape}")
    return a, single


def lrt_forward(
    layer: VariationalLayer, a_prev: np.ndarray, stream: np.random.Generator
) -> tuple[np.ndarray, LrtCache]:
    """Sample pre-activations from the Gaussian induced by the weight posterior.

    Accepts a single input vector or a (batch, n_in) matrix and returns
    pre-activations of matching shape plus the cache for ``lrt_backward``.
    """
    a, single = _as_batch(a_prev, layer.n_in)
    check_finite("layer parameters", layer.mu, layer.rho, layer.lam, layer.bias_mu, layer.bias_rho)
    w_mean, w_var = _weight_moments(layer)
    m = a @ w_mean.T + layer.bias_mu
    s2 = (a * a) @ w_var.T + layer.bias_sigma**2
    s = np.sqrt(s2)
    eps = stream.standard_normal(m.shape)
    z = m + s * eps
    cache = LrtCache(a_prev=a, eps=eps, m=m, s=s)
    return (z[0] if single else z), cache


def lrt_backward(
    layer: VariationalLayer, cache: LrtCache, grad_pre_act: np.ndarray
) -> LayerGrads:
    """Chain a loss gradient through z = m + s * eps to every parameter.

    ``grad_pre_act`` must match the cached batch shape; gradients are summed
    over the batch. Where s is exactly zero the variance pathway carries no
    gradient.
    """
    g = np.asarray(grad_pre_act, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    a = cache.a_prev
    alpha = layer.alpha
    mu = layer.mu
    sigma = layer.sigma
    w_mean, w_var = _weight_moments(layer)

    gs2 = np.where(cache.s > 0, g * cache.eps / (2.0 * np.where(cache.s > 0, cache.s, 1.0)), 0.0)

    g_wmean = g.T @ a  # dL/d(alpha*mu), shape (n_out, n_in)
    g_wvar = gs2.T @ (a * a)  # dL/d(per-edge variance)

    grad_mu = g_wmean * alpha + g_wvar * (2.0 * mu * alpha * (1.0 - alpha))
    grad_sigma = g_wvar * (2.0 * sigma * alpha)
    grad_rho = grad_sigma * sigmoid(layer.rho)
    dvar_dalpha = sigma**2 + mu**2 - 2.0 * alpha * mu**2
    grad_lam = (g_wmean * mu + g_wvar * dvar_dalpha) * (alpha * (1.0 - alpha))

    bias_sigma = layer.bias_sigma
    grad_bias_mu = g.sum(axis=0)
    grad_bias_rho = 2.0 * bias_sigma * gs2.sum(axis=0) * sigmoid(layer.bias_rho)

    grad_a = g @ w_mean + 2.0 * a * (gs2 @ w_var)
    return LayerGrads(grad_mu, grad_rho, grad_lam, grad_bias_mu, grad_bias_rho, grad_a)


def mpm_forward(
    layer: VariationalLayer,
    a_prev: np.ndarray,
    mask: np.ndarray,
    sample_weights: bool = False,
    stream: np.random.Generator | None = None,
) -> np.ndarray:
    """Pre-activations of the structural model defined by a binary edge mask.

    Included weights are the posterior means, or draws from N(mu, sigma^2)
    when ``sample_weights`` is set. Biases are always kept (they carry no
    inclusion variable) and are sampled under the same flag.
    """
    a, single = _as_batch(a_prev, layer.n_in)
    mask = np.asarray(mask)
    if mask.shape != layer.mu.shape:
        raise ValueError(f"mask shape {mask.shape} does not match layer {layer.mu.shape}")
    if sample_weights:
        if stream is None:
            raise ValueError("sample_weights requires a random stream")
        w = layer.mu + layer.sigma * stream.standard_normal(layer.mu.shape)
        b = layer.bias_mu + layer.bias_sigma * stream.standard_normal(layer.bias_mu.shape)
    else:
        w = layer.mu
        b = layer.bias_mu
    z = a @ (mask * w).T + b
    return z[0] if single else z


def _clamped_alpha(layer: VariationalLayer) -> np.ndarray:
    return np.clip(layer.alpha, ALPHA_EPS, 1.0 - ALPHA_EPS)


def layer_kl(layer: VariationalLayer, prior: LayerPrior) -> float:
    """KL divergence from the layer's variational posterior to its prior.

    Per edge: the Bernoulli term alpha log(alpha/psi) + (1-alpha) log((1-alpha)/(1-psi))
    plus alpha times the Gaussian slab term log(tau/sigma) + (sigma^2+mu^2)/(2 tau^2) - 1/2.
    The matching point-mass components of posterior and prior cancel and
    contribute zero. Biases add the plain Gaussian-to-Gaussian KL.
    """
    tau = prior.std
    psi = prior.inclusion_prob
    alpha = layer.alpha
    a_cl = _clamped_alpha(layer)
    sigma = layer.sigma

    kl_bern = a_cl * (np.log(a_cl) - np.log(psi)) + (1.0 - a_cl) * (
        np.log1p(-a_cl) - np.log1p(-psi)
    )
    slab = np.log(tau / sigma) + (sigma**2 + layer.mu**2) / (2.0 * tau**2) - 0.5
    kl_edges = np.sum(kl_bern + alpha * slab)

    b_sigma = layer.bias_sigma
    kl_bias = np.sum(
        np.log(tau / b_sigma) + (b_sigma**2 + layer.bias_mu**2) / (2.0 * tau**2) - 0.5
    )
    return float(kl_edges + kl_bias)


def layer_kl_backward(layer: VariationalLayer, prior: LayerPrior) -> LayerGrads:
    """Hand-derived gradients of ``layer_kl`` with respect to all parameters."""
    tau = prior.std
    psi = prior.inclusion_prob
    alpha = layer.alpha
    a_cl = _clamped_alpha(layer)
    sigma = layer.sigma
    mu = layer.mu

    slab = np.log(tau / sigma) + (sigma**2 + mu**2) / (2.0 * tau**2) - 0.5
    dkl_dalpha = (np.log(a_cl) - np.log1p(-a_cl)) - (np.log(psi) - np.log1p(-psi)) + slab
    grad_lam = dkl_dalpha * alpha * (1.0 - alpha)
    grad_mu = alpha * mu / tau**2
    grad_sigma = alpha * (sigma / tau**2 - 1.0 / sigma)
    grad_rho = grad_sigma * sigmoid(layer.rho)

    b_sigma = layer.bias_sigma
    grad_bias_mu = layer.bias_mu / tau**2
    grad_bias_rho = (b_sigma / tau**2 - 1.0 / b_sigma) * sigmoid(layer.bias_rho)
    return LayerGrads(grad_mu, grad_rho, grad_lam, grad_bias_mu, grad_bias_rho)


@dataclass
class DenseLayer:
    """Deterministic input-skip layer for the L1-regularized baseline."""

    w: np.ndarray
    bias: np.ndarray
    n_prev: int

    @property
    def n_out(self) -> int:
        return self.w.shape[0]

    @property
    def n_in(self) -> int:
        return self.w.shape[1]

    def parameters(self) -> list[np.ndarray]:
        return [self.w, self.bias]

    @classmethod
    def initialize(
        cls, n_out: int, n_in: int, n_prev: int, stream: np.random.Generator
    ) -> "DenseLayer":
        bound = 1.0 / np.sqrt(n_in)
        w = stream.uniform(-bound, bound, size=(n_out, n_in))
        return cls(w, np.zeros(n_out), n_prev)


@dataclass
class DenseCache:
    a_prev: np.ndarray


@dataclass
class DenseGrads:
    w: np.ndarray
    bias: np.ndarray
    a_prev: np.ndarray | None = None

    def parameters(self) -> list[np.ndarray]:
        return [self.w, self.bias]


def dense_forward(
    layer: DenseLayer, a_prev: np.ndarray, mask: np.ndarray | None = None
) -> tuple[np.ndarray, DenseCache]:
    a, single = _as_batch(a_prev, layer.n_in)
    w = layer.w if mask is None else layer.w * mask
    z = a @ w.T + layer.bias
    return (z[0] if single else z), DenseCache(a_prev=a)


def dense_backward(layer: DenseLayer, cache: DenseCache, grad_pre_act: np.ndarray) -> DenseGrads:
    g = np.asarray(grad_pre_act, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    grad_w = g.T @ cache.a_prev
    grad_bias = g.sum(axis=0)
    grad_a = g @ layer.w
    return DenseGrads(grad_w, grad_bias, grad_a)
