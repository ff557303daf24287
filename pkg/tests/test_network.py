"""Network assembly, heads, prediction, the L1 baseline, and model files."""

import numpy as np
import pytest

from skipbnn.layers import LayerPrior, layer_kl
from skipbnn.mathops import sigmoid, softplus_inv
from skipbnn.network import (
    ModelFormatError,
    Network,
    NetworkSpec,
    forward_deterministic,
    forward_sample,
    from_bytes,
    head_transform,
    l1_loss,
    l1_prune_masks,
    log_likelihood,
    log_likelihood_from_logits,
    nll_grad_logits,
    predict,
    to_bytes,
    total_kl,
)
from skipbnn.rng import Rng


def small_spec(**kw):
    base = dict(
        n_covariates=3,
        hidden_widths=(5, 4),
        n_outputs=1,
        activation="relu",
        likelihood="bernoulli",
        prior=LayerPrior(1.0, 0.2),
        lambda_init_hidden=(-1.0, 1.0),
        lambda_init_covariate=(-1.0, 1.0),
    )
    base.update(kw)
    return NetworkSpec(**base)


def make_deterministic(net):
    """Force alpha to 1 and all sigmas to 0 so sampled passes are exact."""
    for layer in net.layers:
        layer.lam[:] = 1e6
        layer.rho[:] = -745.0
        layer.bias_rho[:] = -745.0
    return net


class TestSpec:
    def test_dims_with_input_skip(self):
        spec = small_spec()
        assert spec.layer_dims() == [(5, 3, 0), (4, 8, 5), (1, 7, 4)]

    def test_published_arch_weight_count(self):
        spec = NetworkSpec(n_covariates=4, hidden_widths=(20,) * 4, n_outputs=1)
        assert spec.weight_count() == 1544

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            small_spec(likelihood="poisson")
        with pytest.raises(ValueError):
            small_spec(activation="tanh")
        with pytest.raises(ValueError):
            small_spec(n_covariates=0)
        with pytest.raises(ValueError):
            NetworkSpec(n_covariates=2, likelihood="bernoulli", n_outputs=3)
        with pytest.raises(ValueError):
            small_spec(mode="l1", prune_threshold=0.0)


class TestForward:
    def test_blr_reduces_to_glm(self):
        spec = small_spec(hidden_widths=())
        net = make_deterministic(Network.build(spec, seed=0))
        x = np.array([0.5, -1.0, 2.0])
        p, _ = forward_sample(net, x, Rng(0))
        w, b = net.layers[0].mu, net.layers[0].bias_mu
        assert p == pytest.approx(float(sigmoid(w @ x + b)[0]), abs=1e-12)

    def test_all_excluded_output_ignores_input(self):
        spec = small_spec()
        net = Network.build(spec, seed=0)
        for layer in net.layers:
            layer.lam[:] = -1e6
            layer.rho[:] = -745.0
            layer.bias_rho[:] = -745.0
        p1, _ = forward_sample(net, np.array([1.0, 2.0, 3.0]), Rng(0))
        p2, _ = forward_sample(net, np.array([-5.0, 0.0, 9.0]), Rng(0))
        assert p1 == p2

    def test_one_hidden_layer_moments_match_weight_space(self):
        # full-network distribution check against explicit weight sampling
        spec = small_spec(hidden_widths=(4,))
        net = Network.build(spec, seed=3)
        x = np.array([0.8, -0.4, 1.2])
        n = 100_000

        # pre-activation draws are row-independent, so a replicated batch
        # yields n independent logit draws in one pass
        _, fc = forward_sample(net, np.tile(x, (n, 1)), Rng(9))
        logit_draws = fc.logits[:, 0]

        stream = Rng(10).stream("oracle")
        l1, l2 = net.layers
        a1, s1 = sigmoid(l1.lam), np.log1p(np.exp(l1.rho))
        a2, s2 = sigmoid(l2.lam), np.log1p(np.exp(l2.rho))
        g1 = stream.random((n,) + l1.mu.shape) < a1
        w1 = l1.mu + s1 * stream.standard_normal((n,) + l1.mu.shape)
        b1 = l1.bias_mu + np.log1p(np.exp(l1.bias_rho)) * stream.standard_normal((n, l1.n_out))
        h = np.maximum((g1 * w1) @ x + b1, 0.0)
        g2 = stream.random((n,) + l2.mu.shape) < a2
        w2 = l2.mu + s2 * stream.standard_normal((n,) + l2.mu.shape)
        b2 = l2.bias_mu + np.log1p(np.exp(l2.bias_rho)) * stream.standard_normal((n, l2.n_out))
        stacked = np.concatenate([h, np.broadcast_to(x, (n, x.size))], axis=1)
        oracle = np.einsum("nij,nj->ni", g2 * w2, stacked)[:, 0] + b2[:, 0]

        se = oracle.std() / np.sqrt(n)
        assert abs(logit_draws.mean() - oracle.mean()) < 4 * 2 * se
        assert abs(logit_draws.var() - oracle.var()) / oracle.var() < 0.05

    def test_dim_mismatch_rejected(self):
        net = Network.build(small_spec(), seed=0)
        with pytest.raises(ValueError):
            forward_sample(net, np.ones(4), Rng(0))

    def test_affine_in_x_when_hidden_origin_edges_disabled(self):
        # with all hidden-origin output edges off, the logit is affine in x:
        # checked exactly on three collinear inputs
        spec = small_spec(hidden_widths=(4,), activation="sigmoid")
        net = make_deterministic(Network.build(spec, seed=5))
        out_layer = net.layers[-1]
        out_layer.lam[:, : out_layer.n_prev] = -1e6
        x0 = np.array([0.2, -1.0, 0.5])
        x2 = np.array([1.0, 2.0, -0.7])
        x1 = 0.5 * (x0 + x2)
        logits = []
        for x in (x0, x1, x2):
            _, fc = forward_sample(net, x, Rng(0))
            logits.append(fc.logits[0, 0])
        assert logits[1] == pytest.approx(0.5 * (logits[0] + logits[2]), abs=1e-10)


class TestHeads:
    def test_bernoulli_half(self):
        spec = small_spec()
        assert log_likelihood(spec, 0.5, 1) == pytest.approx(np.log(0.5))
        assert log_likelihood(spec, 0.5, 0) == pytest.approx(np.log(0.5))

    def test_categorical_uniform(self):
        spec = small_spec(likelihood="categorical", n_outputs=10)
        p = np.full((1, 10), 0.1)
        assert log_likelihood(spec, p, np.array([7])) == pytest.approx(np.log(0.1))

    def test_gaussian_at_mean(self):
        spec = small_spec(likelihood="gaussian", gaussian_phi=1.0)
        assert log_likelihood(spec, 2.0, 2.0) == pytest.approx(-0.9189385332046727)

    def test_invalid_class_rejected(self):
        spec = small_spec(likelihood="categorical", n_outputs=3)
        with pytest.raises(ValueError):
            log_likelihood(spec, np.full((1, 3), 1 / 3), np.array([3]))

    def test_logit_form_matches_param_form(self):
        spec = small_spec(likelihood="categorical", n_outputs=4)
        logits = Rng(0).stream().standard_normal((6, 4))
        y = np.array([0, 1, 2, 3, 0, 2])
        from_params = log_likelihood(spec, head_transform(spec, logits), y)
        from_logits = log_likelihood_from_logits(spec, logits, y)
        np.testing.assert_allclose(from_params, from_logits, atol=1e-9)

    def test_nll_grad_matches_finite_differences(self):
        for spec in (
            small_spec(),
            small_spec(likelihood="categorical", n_outputs=3),
            small_spec(likelihood="gaussian", gaussian_phi=2.0),
        ):
            c = spec.n_outputs
            logits = Rng(1).stream().standard_normal((4, c))
            y = np.array([1, 0, 1, 0]) if spec.likelihood != "gaussian" else np.array([0.3, -1.0, 2.0, 0.0])
            if spec.likelihood == "categorical":
                y = np.array([0, 2, 1, 2])
            g = nll_grad_logits(spec, logits, y)
            h = 1e-6
            numeric = np.zeros_like(logits)
            for i in range(logits.shape[0]):
                for j in range(c):
                    for sign in (1, -1):
                        pert = logits.copy()
                        pert[i, j] += sign * h
                        numeric[i, j] += sign * -np.sum(
                            log_likelihood_from_logits(spec, pert, y)
                        )
                    numeric[i, j] /= 2 * h
            np.testing.assert_allclose(g, numeric, atol=1e-5)


class TestTotalKl:
    def test_zero_at_prior(self):
        prior = LayerPrior(1.0, 0.25)
        spec = small_spec(prior=prior)
        net = Network.build(spec, seed=0)
        for layer in net.layers:
            layer.mu[:] = 0.0
            layer.rho[:] = softplus_inv(1.0)
            layer.lam[:] = np.log(0.25 / 0.75)
            layer.bias_mu[:] = 0.0
            layer.bias_rho[:] = softplus_inv(1.0)
        assert total_kl(net) == pytest.approx(0.0, abs=1e-10)

    def test_single_layer_equals_layer_kl(self):
        spec = small_spec(hidden_widths=())
        net = Network.build(spec, seed=1)
        assert total_kl(net) == pytest.approx(layer_kl(net.layers[0], spec.prior))

    def test_matches_monte_carlo_on_two_layer_net(self):
        # oracle as in the layer tests, applied to every layer of a network
        from skipbnn.mathops import softplus

        spec = small_spec(hidden_widths=(3,), prior=LayerPrior(1.4, 0.2))
        net = Network.build(spec, seed=21)
        closed = total_kl(net)
        stream = Rng(22).stream("netklmc")
        n = 200_000
        totals = np.zeros(n)
        for layer in net.layers:
            alpha = sigmoid(layer.lam).ravel()
            mu = layer.mu.ravel()
            sig = softplus(layer.rho).ravel()
            gamma = stream.random((n, alpha.size)) < alpha
            w = mu + sig * stream.standard_normal((n, alpha.size))
            lq = -np.log(sig) - (w - mu) ** 2 / (2 * sig**2)
            lp = -np.log(spec.prior.std) - w**2 / (2 * spec.prior.std**2)
            per_edge = np.where(
                gamma,
                np.log(alpha / spec.prior.inclusion_prob) + lq - lp,
                np.log((1 - alpha) / (1 - spec.prior.inclusion_prob)),
            )
            bmu, bsig = layer.bias_mu, softplus(layer.bias_rho)
            wb = bmu + bsig * stream.standard_normal((n, bmu.size))
            per_bias = (-np.log(bsig) - (wb - bmu) ** 2 / (2 * bsig**2)) - (
                -np.log(spec.prior.std) - wb**2 / (2 * spec.prior.std**2)
            )
            totals += per_edge.sum(axis=1) + per_bias.sum(axis=1)
        se = totals.std() / np.sqrt(n)
        assert abs(totals.mean() - closed) < 3 * se

    def test_decreases_as_alpha_moves_toward_prior(self):
        prior = LayerPrior(1.0, 0.25)
        spec = small_spec(hidden_widths=(), prior=prior)
        net = Network.build(spec, seed=1)
        layer = net.layers[0]
        layer.mu[:] = 0.0
        layer.rho[:] = softplus_inv(1.0)
        layer.lam[:] = np.log(0.25 / 0.75)
        layer.bias_mu[:] = 0.0
        layer.bias_rho[:] = softplus_inv(1.0)
        target = np.log(0.25 / 0.75)
        values = []
        for lam0 in (3.0, 2.0, 1.0, target):
            layer.lam[0, 0] = lam0
            values.append(total_kl(net))
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(0.0, abs=1e-10)


class TestPredict:
    def test_deterministic_net_constant_over_samples(self):
        net = make_deterministic(Network.build(small_spec(), seed=2))
        x = np.array([0.1, 0.2, 0.3])
        p1 = predict(net, x, 1, Rng(0))
        p100 = predict(net, x, 100, Rng(1))
        assert p1.mean == pytest.approx(p100.mean, abs=0)
        assert p100.lower == pytest.approx(p100.upper, abs=0)

    def test_quantile_ordering(self):
        net = Network.build(small_spec(), seed=3)
        X = Rng(4).stream().uniform(-2, 2, size=(50, 3))
        pred = predict(net, X, 25, Rng(5))
        assert np.all(pred.lower <= pred.mean + 1e-12)
        assert np.all(pred.mean <= pred.upper + 1e-12)

    def test_replay_oracle(self):
        # averaged probability equals an independent replay of per-sample
        # forward passes under the same seed
        net = Network.build(small_spec(), seed=6)
        x = np.array([1.0, -1.0, 0.5])
        n = 33
        pred = predict(net, x, n, Rng(77))
        rng = Rng(77)
        replay = np.mean([forward_sample(net, x, rng)[0] for _ in range(n)])
        assert pred.mean == pytest.approx(replay, abs=0)

    def test_rejects_zero_samples(self):
        net = Network.build(small_spec(), seed=0)
        with pytest.raises(ValueError):
            predict(net, np.ones(3), 0, Rng(0))


class TestL1Mode:
    def l1_net(self, penalty=0.5):
        spec = small_spec(mode="l1", l1_penalty=penalty, likelihood="bernoulli")
        return Network.build(spec, seed=4)

    def test_zero_penalty_reduces_to_nll(self):
        net = self.l1_net(penalty=0.0)
        X = Rng(1).stream().uniform(-1, 1, size=(10, 3))
        y = (Rng(2).stream().random(10) > 0.5).astype(int)
        _, logits, _ = forward_deterministic(net, X)
        nll = -float(np.sum(log_likelihood_from_logits(net.spec, logits, y)))
        assert l1_loss(net, X, y) == pytest.approx(nll)

    def test_all_small_weights_prune_to_constant(self):
        net = self.l1_net()
        for layer in net.layers:
            layer.w[:] = 0.004
        masks = l1_prune_masks(net)
        assert all(m.sum() == 0 for m in masks)
        p1, _, _ = forward_deterministic(net, np.array([1.0, 2.0, 3.0]), masks)
        p2, _, _ = forward_deterministic(net, np.array([-9.0, 0.0, 4.0]), masks)
        assert p1 == p2

    def test_threshold_is_strict(self):
        net = self.l1_net()
        net.layers[0].w[:] = 0.005
        assert l1_prune_masks(net)[0].sum() == 0
        net.layers[0].w[0, 0] = 0.0051
        assert l1_prune_masks(net)[0].sum() == 1

    def test_subgradient_matches_finite_differences_away_from_zero(self):
        net = self.l1_net(penalty=0.3)
        X = Rng(3).stream().uniform(-1, 1, size=(8, 3))
        y = (Rng(4).stream().random(8) > 0.5).astype(int)

        from skipbnn.layers import dense_backward
        from skipbnn.training import _dense_caches

        _, logits, pre_acts = forward_deterministic(net, X)
        grad = nll_grad_logits(net.spec, logits, y)
        caches = _dense_caches(net, X, pre_acts)
        per_layer = [None] * net.n_layers
        for j in range(net.n_layers - 1, -1, -1):
            dg = dense_backward(net.layers[j], caches[j], grad)
            per_layer[j] = dg
            if j > 0:
                grad = dg.a_prev[:, : net.layers[j].n_prev] * net.activation_grad(pre_acts[j - 1])

        h = 1e-6
        for j, layer in enumerate(net.layers):
            analytic = per_layer[j].w + net.spec.l1_penalty * np.sign(layer.w)
            numeric = np.zeros_like(layer.w)
            it = np.nditer(layer.w, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = layer.w[idx]
                layer.w[idx] = orig + h
                up = l1_loss(net, X, y)
                layer.w[idx] = orig - h
                down = l1_loss(net, X, y)
                layer.w[idx] = orig
                numeric[idx] = (up - down) / (2 * h)
                it.iternext()
            rel = np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-3)
            assert rel.max() < 1e-5


class TestModelFiles:
    def test_roundtrip_bit_exact(self):
        net = Network.build(small_spec(), seed=11)
        data = to_bytes(net)
        back = from_bytes(data)
        assert back.spec == net.spec
        assert back.seed == net.seed
        for a, b in zip(net.parameters(), back.parameters()):
            assert np.array_equal(a, b)

    def test_l1_roundtrip(self):
        net = Network.build(small_spec(mode="l1", l1_penalty=0.1), seed=12)
        back = from_bytes(to_bytes(net))
        for a, b in zip(net.parameters(), back.parameters()):
            assert np.array_equal(a, b)

    def test_bad_magic_rejected(self):
        net = Network.build(small_spec(), seed=0)
        data = bytearray(to_bytes(net))
        data[:4] = b"XXXX"
        with pytest.raises(ModelFormatError):
            from_bytes(bytes(data))

    def test_bad_version_rejected(self):
        net = Network.build(small_spec(), seed=0)
        data = bytearray(to_bytes(net))
        data[4:8] = (99).to_bytes(4, "little")
        with pytest.raises(ModelFormatError):
            from_bytes(bytes(data))

    def test_truncation_rejected(self):
        net = Network.build(small_spec(), seed=0)
        data = to_bytes(net)
        with pytest.raises(ModelFormatError):
            from_bytes(data[: len(data) - 16])
