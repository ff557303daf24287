"""Command-line driver: train, eval, paths, explain, gen-data.

Exit codes: 0 success, 1 configuration error, 2 runtime or numeric error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from .experiment import ConfigError, load_config, run_eval, run_train
from .explain import explain_with_uncertainty
from .network import load
from .rng import Rng
from .structure import active_paths, structure_of, write_graph_exports
from .training import NumericError


def _cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = _override_base_seed(cfg, args.seed)
    paths = run_train(cfg, args.out)
    for p in paths:
        print(p)
    return 0


def _cmd_eval(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = _override_base_seed(cfg, args.seed)
    if args.samples is not None:
        from dataclasses import replace

        cfg = replace(cfg, eval=replace(cfg.eval, n_samples=args.samples))
    model_files = args.models if args.models else None
    print(run_eval(cfg, args.out, model_files))
    return 0


def _override_base_seed(cfg, seed: int):
    from dataclasses import replace

    return replace(cfg, base_seed=seed)


def _cmd_paths(args) -> int:
    net = load(args.model)
    graph = active_paths(structure_of(net))
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    stem = out / Path(args.model).stem
    dot_path, json_path = write_graph_exports(graph, net, stem)
    print(dot_path)
    print(json_path)
    return 0


def _cmd_explain(args) -> int:
    net = load(args.model)
    x = np.array([float(tok) for tok in args.input.split(",")])
    report = explain_with_uncertainty(
        net, x, args.samples, Rng(args.seed or 0), output_index=args.target
    )
    out = Path(args.out) if args.out else Path(f"{Path(args.model).stem}_explanation.json")
    if out.is_dir():
        out = out / f"{Path(args.model).stem}_explanation.json"
    report.to_json(out)
    print(out)
    return 0


def _cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    d = cfg.dataset
    if not d.generator:
        raise ConfigError("dataset.generator: gen-data requires a generator dataset")
    gen = data_mod.gen_linear if d.generator == "linear" else data_mod.gen_nonlinear
    full = gen(d.n, d.rho, args.seed if args.seed is not None else d.seed)
    train_ds, test_ds = data_mod.split(full, d.n_train, d.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, ds in (("train", train_ds), ("test", test_ds)):
        path = out / f"{cfg.tag}_{name}.csv"
        data_mod.to_csv(ds, path)
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skipbnn",
        description="Train, evaluate, and explain sparse input-skip Bayesian neural networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model per seed from a JSON config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed", type=int, default=None, help="override base_seed")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate trained models and write results.csv")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.add_argument("--samples", type=int, default=None, help="override eval MC samples")
    p_eval.add_argument("models", nargs="*", help="model files (default: {tag}_seed{k}.model in --out)")
    p_eval.set_defaults(func=_cmd_eval)

    p_paths = sub.add_parser("paths", help="export the sparse model's active-path graph")
    p_paths.add_argument("model")
    p_paths.add_argument("--out", default=None)
    p_paths.set_defaults(func=_cmd_paths)

    p_explain = sub.add_parser("explain", help="local explanation of one input row")
    p_explain.add_argument("model")
    p_explain.add_argument("--input", required=True, help="comma-separated covariate values")
    p_explain.add_argument("--samples", type=int, default=100)
    p_explain.add_argument("--target", type=int, default=0, help="output node to explain")
    p_explain.add_argument("--seed", type=int, default=0)
    p_explain.add_argument("--out", default=None)
    p_explain.set_defaults(func=_cmd_explain)

    p_gen = sub.add_parser("gen-data", help="write the config's synthetic dataset as CSV")
    p_gen.add_argument("--config", required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--seed", type=int, default=None)
    p_gen.set_defaults(func=_cmd_gen_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
