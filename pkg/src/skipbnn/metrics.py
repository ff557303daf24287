"""Evaluation metrics: accuracy, ECE, NLL, RMSE, Pearson correlation, pinball."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12


def _confidence_and_pred(pred_probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred_probs, dtype=np.float64)
    if p.ndim == 1:  # single success probability per row
        pred = (p > 0.5).astype(np.int64)
        return np.maximum(p, 1.0 - p), pred
    return p.max(axis=1), p.argmax(axis=1)


def accuracy(pred_probs, labels) -> float:
    """Fraction of rows whose most probable class matches the label."""
    labels = np.asarray(labels)
    conf_pred = _confidence_and_pred(pred_probs)[1]
    if conf_pred.shape[0] != labels.shape[0]:
        raise ValueError("predictions and labels differ in length")
    return float(np.mean(conf_pred == labels.astype(np.int64)))


def ece(pred_probs, labels, n_bins: int = 10) -> float:
    """Expected calibration error over equal-width confidence bins.

    Confidence is the top-class probability; each nonempty bin contributes
    its point share times |bin accuracy - bin confidence|.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("ece of empty input is undefined")
    conf, pred = _confidence_and_pred(pred_probs)
    correct = (pred == labels.astype(np.int64)).astype(np.float64)
    bins = np.minimum((conf * n_bins).astype(np.int64), n_bins - 1)
    total = 0.0
    n = conf.size
    for b in range(n_bins):
        sel = bins == b
        count = int(sel.sum())
        if count == 0:
            continue
        gap = abs(float(correct[sel].mean()) - float(conf[sel].mean()))
        total += (count / n) * gap
    return total


def nll(pred_params, labels, likelihood: str, phi: float = 1.0) -> float:
    """Mean negative log-likelihood under MC-averaged predictive parameters.

    Probabilities are floored at 1e-12 before the log.
    """
    params = np.asarray(pred_params, dtype=np.float64)
    y = np.asarray(labels)
    if likelihood == "bernoulli":
        p = np.clip(params, PROB_FLOOR, 1.0 - PROB_FLOOR)
        yf = y.astype(np.float64)
        ll = yf * np.log(p) + (1.0 - yf) * np.log1p(-p)
    elif likelihood == "categorical":
        p = np.clip(params, PROB_FLOOR, 1.0)
        ll = np.log(p[np.arange(p.shape[0]), y.astype(np.int64)])
    elif likelihood == "gaussian":
        ll = -0.5 * np.log(2.0 * np.pi * phi) - (y.astype(np.float64) - params) ** 2 / (2.0 * phi)
    else:
        raise ValueError(f"unknown likelihood {likelihood!r}")
    return float(-np.mean(ll))


def rmse(preds, targets) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ValueError("predictions and targets differ in shape")
    return float(np.sqrt(np.mean((preds - targets) ** 2)))


def pearson_corr(preds, targets) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.size < 2:
        raise ValueError("correlation needs at least two points")
    sp = preds.std()
    st = targets.std()
    if sp == 0.0 or st == 0.0:
        raise ValueError("correlation undefined for zero-variance input")
    return float(np.mean((preds - preds.mean()) * (targets - targets.mean())) / (sp * st))


def pinball(pred_quantiles, targets, taus) -> float:
    """Mean pinball loss over all (point, tau) pairs.

    ``pred_quantiles`` has one column per tau level. At tau = 0.5 this is
    half the mean absolute error.
    """
    q = np.atleast_2d(np.asarray(pred_quantiles, dtype=np.float64))
    y = np.asarray(targets, dtype=np.float64)[:, None]
    taus = np.asarray(taus, dtype=np.float64)[None, :]
    if np.any((taus <= 0) | (taus >= 1)):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    if q.shape != (y.shape[0], taus.shape[1]):
        raise ValueError("quantile matrix shape must be (n_points, n_taus)")
    diff = y - q
    return float(np.mean(taus * np.maximum(diff, 0.0) + (1.0 - taus) * np.maximum(-diff, 0.0)))


def quantiles_from_samples(samples, taus) -> np.ndarray:
    """Per-point empirical quantiles of predictive draws (n_draws, n_points)."""
    samples = np.asarray(samples, dtype=np.float64)
    return np.quantile(samples, np.asarray(taus), axis=0).T


DEFAULT_PINBALL_TAUS = tuple(np.round(np.arange(0.05, 1.0, 0.10), 2))


@dataclass
class EvalResult:
    dataset: str
    model: str
    variant: str  # "full" | "sparse"
    metric: str
    value: float | str
    seed: int | str
    n_mc_samples: int

    def row(self) -> list:
        return [
            self.dataset,
            self.model,
            self.variant,
            self.metric,
            self.value,
            self.seed,
            self.n_mc_samples,
        ]


def eval_results_to_csv(results: list[EvalResult], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "model", "variant", "metric", "value", "seed", "n_mc_samples"])
        for res in results:
            writer.writerow(res.row())
