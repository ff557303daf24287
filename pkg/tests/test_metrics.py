"""Metric formulas, frozen against hand computations."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skipbnn.metrics import (
    accuracy,
    ece,
    nll,
    pearson_corr,
    pinball,
    quantiles_from_samples,
    rmse,
)


class TestAccuracy:
    def test_perfect_and_inverted(self):
        probs = np.array([0.9, 0.1, 0.8, 0.2])
        labels = np.array([1, 0, 1, 0])
        assert accuracy(probs, labels) == 1.0
        assert accuracy(probs, 1 - labels) == 0.0

    def test_hand_built_ten_rows(self):
        # predictions by the 0.5 rule: [1,1,1,1,1,0,0,0,1,0]; labels below
        # agree at positions 0-3 and 5-7, seven of ten
        probs = np.array([0.9, 0.8, 0.7, 0.6, 0.9, 0.4, 0.3, 0.2, 0.6, 0.4])
        labels = np.array([1, 1, 1, 1, 0, 0, 0, 0, 0, 1])
        assert accuracy(probs, labels) == pytest.approx(0.7)

    def test_multiclass_argmax(self):
        probs = np.array([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
        assert accuracy(probs, np.array([0, 2])) == 1.0
        assert accuracy(probs, np.array([1, 2])) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            accuracy(np.array([0.5]), np.array([1, 0]))


class TestEce:
    def test_confident_and_correct_is_zero(self):
        probs = np.array([1.0, 1.0, 1.0])
        labels = np.array([1, 1, 1])
        assert ece(probs, labels) == 0.0

    def test_maximally_uncertain_binary_is_zero(self):
        # every confidence 0.5, accuracy exactly 50%
        probs = np.full(10, 0.5)
        labels = np.array([0, 1] * 5)  # prediction is class 0 at p = 0.5
        assert ece(probs, labels) == pytest.approx(0.0)

    def test_two_bin_hand_case(self):
        # bin [0.6, 0.7): confidences .65/.65, acc 1/2 -> gap |0.5 - 0.65|
        # bin [0.9, 1.0]: confidences .95/.95, acc 2/2 -> gap |1.0 - 0.95|
        probs = np.array([0.65, 0.65, 0.95, 0.95])
        labels = np.array([1, 0, 1, 1])
        expected = 0.5 * abs(0.5 - 0.65) + 0.5 * abs(1.0 - 0.95)
        assert ece(probs, labels, n_bins=10) == pytest.approx(expected, abs=1e-12)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            ece(np.array([]), np.array([]))

    @given(
        st.lists(st.floats(0.0, 1.0), min_size=2, max_size=64),
        st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=100, deadline=None)
    def test_bounds_and_permutation_invariance(self, probs, seed):
        probs = np.array(probs)
        labels = (np.arange(probs.size) % 2).astype(int)
        value = ece(probs, labels)
        assert 0.0 <= value <= 1.0
        perm = np.random.default_rng(seed).permutation(probs.size)
        assert ece(probs[perm], labels[perm]) == pytest.approx(value, abs=1e-12)


class TestNll:
    def test_uniform_ten_class(self):
        probs = np.full((4, 10), 0.1)
        labels = np.array([0, 3, 7, 9])
        assert nll(probs, labels, "categorical") == pytest.approx(np.log(10.0))

    def test_perfect_probabilities(self):
        probs = np.array([1.0, 0.0, 1.0])
        labels = np.array([1, 0, 1])
        assert nll(probs, labels, "bernoulli") == pytest.approx(0.0, abs=1e-11)

    def test_hand_sum_on_five_rows(self):
        probs = np.array([0.9, 0.2, 0.7, 0.6, 0.5])
        labels = np.array([1, 0, 1, 0, 1])
        expected = -np.mean(
            [np.log(0.9), np.log(0.8), np.log(0.7), np.log(0.4), np.log(0.5)]
        )
        assert nll(probs, labels, "bernoulli") == pytest.approx(expected, rel=1e-12)

    def test_zero_probability_clamped(self):
        value = nll(np.array([0.0]), np.array([1]), "bernoulli")
        assert np.isfinite(value)
        assert value == pytest.approx(-np.log(1e-12))

    def test_degrading_probabilities_increase_nll(self):
        labels = np.array([1, 1, 1, 1])
        values = [
            nll(np.full(4, p), labels, "bernoulli") for p in (0.99, 0.9, 0.7, 0.5)
        ]
        assert all(a < b for a, b in zip(values, values[1:]))


class TestRegressionMetrics:
    def test_identical_predictions(self):
        y = np.array([1.0, 2.0, 3.0, 4.0])
        assert rmse(y, y) == 0.0
        assert pearson_corr(y, y) == pytest.approx(1.0)

    def test_anti_correlated(self):
        y = np.array([1.0, 2.0, 3.0])
        assert pearson_corr(-y, y) == pytest.approx(-1.0)

    def test_hand_computed_four_points(self):
        preds = np.array([1.0, 2.0, 3.0, 4.0])
        targets = np.array([2.0, 2.0, 2.0, 6.0])
        assert rmse(preds, targets) == pytest.approx(np.sqrt((1 + 0 + 1 + 4) / 4))
        # deviations (-1.5,-0.5,0.5,1.5) vs (-1,-1,-1,3): covariance 1.5,
        # stds sqrt(1.25) and sqrt(3)
        expected_corr = 1.5 / (np.sqrt(1.25) * np.sqrt(3.0))
        assert pearson_corr(preds, targets) == pytest.approx(expected_corr, rel=1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError):
            pearson_corr(np.array([1.0, 1.0]), np.array([1.0, 2.0]))


class TestPinball:
    def test_median_at_target_is_zero(self):
        assert pinball(np.array([[3.0]]), np.array([3.0]), [0.5]) == 0.0

    def test_median_absolute_gap(self):
        assert pinball(np.array([[1.0]]), np.array([3.0]), [0.5]) == pytest.approx(1.0)

    def test_tau_09_one_sided(self):
        # target one above the quantile: loss tau * 1
        assert pinball(np.array([[2.0]]), np.array([3.0]), [0.9]) == pytest.approx(0.9)

    def test_bad_tau_rejected(self):
        with pytest.raises(ValueError):
            pinball(np.array([[1.0]]), np.array([1.0]), [1.0])

    def test_half_mae_identity_at_median(self):
        rng = np.random.default_rng(4)
        q = rng.normal(size=(200, 1))
        y = rng.normal(size=200)
        lhs = pinball(q, y, [0.5])
        mae = np.mean(np.abs(y - q[:, 0]))
        assert lhs == pytest.approx(mae / 2.0, abs=1e-12)

    def test_quantiles_from_samples_shape_and_order(self):
        draws = np.random.default_rng(5).normal(size=(500, 7))
        q = quantiles_from_samples(draws, [0.1, 0.5, 0.9])
        assert q.shape == (7, 3)
        assert np.all(q[:, 0] <= q[:, 1]) and np.all(q[:, 1] <= q[:, 2])
