#!/usr/bin/env python3
"""The experiment driver end to end: configs, seeds, and summary tables.

Builds a JSON experiment config on the fly, trains a few seeds of the
variational skip-network and of the frequentist L1 baseline on the same
data, and prints the per-metric "median (min, max)" aggregate rows the
evaluator writes to results.csv. The same flow is available from the shell:

    skipbnn gen-data --config cfg.json --out data/
    skipbnn train    --config cfg.json --out runs/
    skipbnn eval     --config cfg.json --out runs/
    skipbnn paths    runs/lin_seed0.model --out runs/
    skipbnn explain  runs/lin_seed0.model --input "1.0,2.0,0.0,0.5"
"""

import csv
import tempfile

from skipbnn.experiment import parse_config, run_eval, run_train

base = {
    "n_seeds": 3,
    "base_seed": 42,
    "dataset": {"generator": "linear", "n": 9000, "rho": 0.0, "seed": 7, "n_train": 6000},
    "train": {"lr": 0.1, "epochs": 60, "iters_per_epoch": 50},
    "eval": {"n_samples": 100},
}

variational = dict(base, tag="lin-var", model={
    "n_covariates": 4,
    "hidden_widths": [20, 20, 20, 20],
    "activation": "sigmoid",
    "likelihood": "bernoulli",
    "prior_std": 2.5,
    "prior_inclusion_prob": 0.001,
    "lambda_init_hidden": [-10, -7],
    "lambda_init_covariate": [5, 5],
})
l1 = dict(base, tag="lin-l1", model={
    "n_covariates": 4,
    "hidden_widths": [20, 20, 20, 20],
    "activation": "sigmoid",
    "likelihood": "bernoulli",
    "mode": "l1",
    "l1_penalty": 20.0,
    "prune_threshold": 0.005,
})
l1["train"] = {"lr": 0.01, "epochs": 150, "iters_per_epoch": 50}

with tempfile.TemporaryDirectory() as tmp:
    for doc in (variational, l1):
        cfg = parse_config(doc)
        run_train(cfg, tmp)
        results = run_eval(cfg, tmp)
        print(f"\n=== {cfg.tag}: aggregate rows ({results.name}) ===")
        with open(results) as fh:
            for row in csv.DictReader(fh):
                if row["seed"] == "aggregate":
                    print(f"  {row['variant']:>6} {row['metric']:<14} {row['value']}")
