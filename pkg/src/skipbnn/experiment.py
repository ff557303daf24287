"""Experiment driver: JSON configs, multi-seed training, evaluation tables.

A single JSON document describes the dataset (generator or CSV), the model,
the optimizer budget, and the evaluation protocol. Each seed trains an
independent model saved as ``{tag}_seed{k}.model``; evaluation emits one
CSV with per-seed rows for the full and sparse variants plus
"median (min, max)" aggregate rows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from .data import Dataset
from .layers import LayerPrior
from .metrics import (
    DEFAULT_PINBALL_TAUS,
    EvalResult,
    accuracy,
    ece,
    eval_results_to_csv,
    nll,
    pearson_corr,
    pinball,
    quantiles_from_samples,
    rmse,
)
from .network import Network, NetworkSpec, load, predict, save
from .rng import Rng
from .structure import active_paths, covariate_inclusion, depth_metrics, structure_of
from .training import TrainConfig, train

EVAL_SEED_OFFSET = 100_000


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass(frozen=True)
class DatasetConfig:
    generator: str | None = None
    n: int = 0
    rho: float = 0.0
    seed: int = 0
    n_train: int = 0
    csv: str | None = None
    csv_test: str | None = None
    target_column: str = "y"
    task: str = "binary"
    n_classes: int | None = None
    minmax_scale: bool = False
    standardize_targets: bool = False
    x_divisor: float = 1.0  # flat covariate rescale, e.g. 255 for pixel data


@dataclass(frozen=True)
class EvalConfig:
    n_samples: int = 100
    pinball_taus: tuple[float, ...] = DEFAULT_PINBALL_TAUS


@dataclass(frozen=True)
class ExperimentConfig:
    tag: str
    dataset: DatasetConfig
    spec: NetworkSpec
    train: TrainConfig
    eval: EvalConfig
    n_seeds: int
    base_seed: int

    def model_label(self) -> str:
        if self.spec.mode == "l1":
            return "l1-skip-net"
        return "var-skip-net" if self.spec.hidden_widths else "var-linear"

    def dataset_label(self) -> str:
        if self.dataset.generator:
            return f"{self.dataset.generator}-rho{self.dataset.rho}"
        return Path(self.dataset.csv).stem if self.dataset.csv else "dataset"


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}.{key}: missing required field")
    return d[key]


def _opt(d: dict, key: str, default):
    return d.get(key, default)


def _check_enum(value, allowed, where):
    if value not in allowed:
        raise ConfigError(f"{where}: unknown value {value!r}, expected one of {sorted(allowed)}")
    return value


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: top-level document must be a JSON object")
    for section in ("dataset", "model", "train"):
        if section not in doc or not isinstance(doc[section], dict):
            raise ConfigError(f"{section}: missing or not an object")

    d = doc["dataset"]
    has_gen = "generator" in d
    has_csv = "csv" in d
    if has_gen == has_csv:
        raise ConfigError("dataset: exactly one of 'generator' or 'csv' is required")
    if has_gen:
        _check_enum(d["generator"], ("linear", "nonlinear"), "dataset.generator")
        n = int(_need(d, "n", "dataset"))
        n_train = int(_need(d, "n_train", "dataset"))
        if not 0 < n_train < n:
            raise ConfigError("dataset.n_train: must lie strictly between 0 and dataset.n")
        ds_cfg = DatasetConfig(
            generator=d["generator"],
            n=n,
            rho=float(_opt(d, "rho", 0.0)),
            seed=int(_opt(d, "seed", 0)),
            n_train=n_train,
        )
    else:
        task = _check_enum(_opt(d, "task", "binary"), data_mod.TASKS, "dataset.task")
        ds_cfg = DatasetConfig(
            csv=str(d["csv"]),
            csv_test=_opt(d, "csv_test", None),
            target_column=str(_opt(d, "target_column", "y")),
            task=task,
            n_classes=_opt(d, "n_classes", None),
            n_train=int(_opt(d, "n_train", 0)),
            minmax_scale=bool(_opt(d, "minmax_scale", False)),
            standardize_targets=bool(_opt(d, "standardize_targets", False)),
            x_divisor=float(_opt(d, "x_divisor", 1.0)),
        )
        if ds_cfg.csv_test is None and ds_cfg.n_train <= 0:
            raise ConfigError("dataset: csv input needs 'csv_test' or a positive 'n_train'")
        if ds_cfg.x_divisor == 0:
            raise ConfigError("dataset.x_divisor: must be nonzero")

    m = doc["model"]
    mode = _check_enum(_opt(m, "mode", "variational"), ("variational", "l1"), "model.mode")
    likelihood = _check_enum(
        _opt(m, "likelihood", "bernoulli"),
        ("bernoulli", "categorical", "gaussian"),
        "model.likelihood",
    )
    activation = _check_enum(_opt(m, "activation", "sigmoid"), ("sigmoid", "relu"), "model.activation")
    try:
        spec = NetworkSpec(
            n_covariates=int(_need(m, "n_covariates", "model")),
            hidden_widths=tuple(int(w) for w in _opt(m, "hidden_widths", [])),
            n_outputs=int(_opt(m, "n_outputs", 1)),
            activation=activation,
            likelihood=likelihood,
            gaussian_phi=float(_opt(m, "gaussian_phi", 1.0)),
            mode=mode,
            prior=LayerPrior(
                float(_opt(m, "prior_std", 2.5)), float(_opt(m, "prior_inclusion_prob", 0.001))
            ),
            lambda_init_hidden=tuple(_opt(m, "lambda_init_hidden", (-10.0, -7.0))),
            lambda_init_covariate=tuple(_opt(m, "lambda_init_covariate", (5.0, 5.0))),
            l1_penalty=float(_opt(m, "l1_penalty", 0.0)),
            prune_threshold=float(_opt(m, "prune_threshold", 0.005)),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc

    t = doc["train"]
    try:
        train_cfg = TrainConfig(
            lr=float(_need(t, "lr", "train")),
            epochs=int(_need(t, "epochs", "train")),
            iters_per_epoch=int(_need(t, "iters_per_epoch", "train")),
            n_mc_samples=int(_opt(t, "n_mc_samples", 1)),
        )
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc

    e = doc.get("eval", {})
    eval_cfg = EvalConfig(
        n_samples=int(_opt(e, "n_samples", 100)),
        pinball_taus=tuple(_opt(e, "pinball_taus", DEFAULT_PINBALL_TAUS)),
    )
    if eval_cfg.n_samples < 1:
        raise ConfigError("eval.n_samples: must be >= 1")

    n_seeds = int(_opt(doc, "n_seeds", 1))
    if n_seeds < 1:
        raise ConfigError("n_seeds: must be >= 1")
    return ExperimentConfig(
        tag=str(_opt(doc, "tag", "run")),
        dataset=ds_cfg,
        spec=spec,
        train=train_cfg,
        eval=eval_cfg,
        n_seeds=n_seeds,
        base_seed=int(_opt(doc, "base_seed", 0)),
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config: file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(doc)


def make_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    d = cfg.dataset
    if d.generator:
        gen = data_mod.gen_linear if d.generator == "linear" else data_mod.gen_nonlinear
        full = gen(d.n, d.rho, d.seed)
        return data_mod.split(full, d.n_train, d.seed)
    train_ds = data_mod.load_csv(d.csv, d.target_column, d.task, d.n_classes)
    if d.csv_test:
        test_ds = data_mod.load_csv(d.csv_test, d.target_column, d.task, d.n_classes)
    else:
        train_ds, test_ds = data_mod.split(train_ds, d.n_train, d.seed)
    if d.x_divisor != 1.0:
        train_ds.X = train_ds.X / d.x_divisor
        test_ds.X = test_ds.X / d.x_divisor
    if d.minmax_scale:
        train_ds, record = data_mod.minmax_scale(train_ds)
        test_scaled = (test_ds.X[:, record.kept_columns] - record.mins) / (
            record.maxs - record.mins
        )
        test_ds = Dataset(
            test_scaled,
            test_ds.y,
            task=test_ds.task,
            n_classes=test_ds.n_classes,
            column_names=list(train_ds.column_names),
            scaling=record,
        )
    if d.standardize_targets:
        train_ds, tscale = data_mod.standardize_targets(train_ds)
        test_ds = Dataset(
            test_ds.X,
            (test_ds.y - tscale.mean) / tscale.std,
            task="regression",
            column_names=list(test_ds.column_names),
            scaling=test_ds.scaling,
            target_scaling=tscale,
        )
    return train_ds, test_ds


def model_path(out_dir, tag: str, seed_index: int) -> Path:
    return Path(out_dir) / f"{tag}_seed{seed_index}.model"


def run_train(cfg: ExperimentConfig, out_dir, seeds=None) -> list[Path]:
    """Train one model per seed; writes model files and train-log CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_ds, _ = make_datasets(cfg)
    paths = []
    for k in seeds if seeds is not None else range(cfg.n_seeds):
        seed = cfg.base_seed + k
        net = Network.build(cfg.spec, seed)
        tc = TrainConfig(
            lr=cfg.train.lr,
            epochs=cfg.train.epochs,
            iters_per_epoch=cfg.train.iters_per_epoch,
            seed=seed,
            n_mc_samples=cfg.train.n_mc_samples,
        )
        net, log = train(net, train_ds, tc)
        path = model_path(out, cfg.tag, k)
        save(net, path)
        log.to_csv(out / f"{cfg.tag}_seed{k}_trainlog.csv")
        paths.append(path)
    return paths


def _format_value(value: float) -> str:
    value = float(value)
    if value == int(value):
        return str(int(value))
    return f"{value:.6g}"


def aggregate_rows(results: list[EvalResult]) -> list[EvalResult]:
    """One "median (min, max)" row per (variant, metric) across seeds."""
    groups: dict[tuple[str, str], list[EvalResult]] = {}
    order: list[tuple[str, str]] = []
    for r in results:
        key = (r.variant, r.metric)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    rows = []
    for variant, metric in order:
        vals = np.array([float(r.value) for r in groups[(variant, metric)]])
        text = (
            f"{_format_value(np.median(vals))} "
            f"({_format_value(vals.min())}, {_format_value(vals.max())})"
        )
        first = groups[(variant, metric)][0]
        rows.append(
            EvalResult(first.dataset, first.model, variant, metric, text, "aggregate", first.n_mc_samples)
        )
    return rows


def evaluate_network(
    cfg: ExperimentConfig, net: Network, test_ds: Dataset, seed_index: int
) -> list[EvalResult]:
    """Full and sparse metrics plus structure summaries for one trained model."""
    n_mc = cfg.eval.n_samples
    dataset_label = cfg.dataset_label()
    model_label = cfg.model_label()
    rows: list[EvalResult] = []

    def add(variant, metric, value):
        rows.append(
            EvalResult(dataset_label, model_label, variant, metric, float(value), seed_index, n_mc)
        )

    mask = structure_of(net)
    eval_seed = cfg.base_seed + EVAL_SEED_OFFSET + seed_index
    needs_draws = test_ds.task == "regression"
    full_pred = predict(
        net, test_ds.X, n_mc, Rng(eval_seed), keep_samples=needs_draws
    )
    sparse_pred = predict(
        net, test_ds.X, n_mc, Rng(eval_seed + 1), masks=mask.masks, keep_samples=needs_draws
    )

    for variant, pred in (("full", full_pred), ("sparse", sparse_pred)):
        if test_ds.task in ("binary", "multiclass"):
            add(variant, "acc", accuracy(pred.mean, test_ds.y))
            add(variant, "ece", ece(pred.mean, test_ds.y))
            lik = "bernoulli" if test_ds.task == "binary" else "categorical"
            add(variant, "nll", nll(pred.mean, test_ds.y, lik))
        else:
            mean = pred.mean
            y = test_ds.y
            draws = pred.samples
            if net.spec.likelihood == "gaussian":
                noise = Rng(eval_seed + 2).stream("pinball").standard_normal(draws.shape)
                draws = draws + np.sqrt(net.spec.gaussian_phi) * noise
            if test_ds.target_scaling is not None:
                mean = test_ds.target_scaling.inverse(mean)
                y = test_ds.target_scaling.inverse(y)
                draws = test_ds.target_scaling.inverse(draws)
            add(variant, "rmse", rmse(mean, y))
            add(variant, "corr", pearson_corr(mean, y))
            q = quantiles_from_samples(draws, cfg.eval.pinball_taus)
            add(variant, "pinball", pinball(q, y, cfg.eval.pinball_taus))

    graph = active_paths(mask)
    max_depth, avg_depth, _ = depth_metrics(graph)
    add("sparse", "used_weights", graph.used_weights)
    add("sparse", "density", graph.density)
    add("sparse", "max_depth", max_depth)
    add("sparse", "avg_depth", avg_depth)
    for i, included in enumerate(covariate_inclusion(graph)):
        add("sparse", f"inclusion_x{i + 1}", float(included))
    return rows


def run_eval(cfg: ExperimentConfig, out_dir, model_files=None) -> Path:
    """Evaluate every seed's model file and write results.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if model_files is None:
        model_files = [model_path(out, cfg.tag, k) for k in range(cfg.n_seeds)]
    _, test_ds = make_datasets(cfg)
    all_rows: list[EvalResult] = []
    for k, mf in enumerate(model_files):
        net = load(mf)
        if net.spec != cfg.spec:
            raise ConfigError(f"model file {mf} was trained under a different model spec")
        all_rows.extend(evaluate_network(cfg, net, test_ds, k))
    all_rows.extend(aggregate_rows(all_rows))
    results_path = out / f"{cfg.tag}_results.csv"
    eval_results_to_csv(all_rows, results_path)
    return results_path
