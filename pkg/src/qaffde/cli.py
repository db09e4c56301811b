"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric/training failure.
Every command writes its fully resolved configuration to ``<out>.config.json``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .aff_trainer import train_aff
from .benchmark import METHODS, SUITES, BenchSettings, grid_points, run_benchmark
from .conditional import classify_batch, fit_conditional
from .data import LabeledDataset
from .density_matrix import predict_batch, resolve_rank
from .errors import (
    ConfigurationError,
    InvalidArgumentError,
    NumericDegenerateError,
    TrainingDivergedError,
    UndefinedCorrelationError,
)
from .formats import (
    load_model,
    read_dataset_csv,
    save_model,
    write_dataset_csv,
    write_json,
    write_rows_csv,
)
from .kernelspace import KernelSpec
from .metrics import REPORT_FIELDS
from .optim import OptimizerConfig
from .pipeline import FitConfig, auto_gamma, fit_model
from .synthgen import DATASETS, generate, generate_random_gmm

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _on_off(s: str) -> bool:
    if s not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return s == "on"


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _add_model_flags(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--gamma", type=float, help="kernel bandwidth of exp(-gamma ||x-y||^2)")
    g.add_argument("--auto-gamma", action="store_true", help="gamma = 1/(2 sigma^2), sigma = mean pairwise distance")
    p.add_argument("--features", type=int, default=1000, help="number of Fourier features D")
    r = p.add_mutually_exclusive_group()
    r.add_argument("--rank", type=int, help="number of retained eigencomponents")
    r.add_argument("--rank-frac", type=float, help="retained eigencomponents as a fraction of D")
    p.add_argument("--mode", choices=("estimate", "sgd"), default="estimate")
    p.add_argument("--normalize", type=_on_off, default=True, metavar="on|off")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=1000, help="SGD steps for the density matrix")
    p.add_argument("--lr-init", type=float, default=1e-3)
    p.add_argument("--lr-final", type=float, default=1e-5)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--aff-steps", type=int, default=1000, help="adaptive Fourier feature training steps")
    p.add_argument("--aff-lr-init", type=float, default=1e-2)
    p.add_argument("--pairs", type=int, default=10000, help="training pairs for feature learning")
    p.add_argument("--sgd-init", choices=("qaffde", "random"), default="qaffde")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qaffde", description="Density estimation with adaptive Fourier features and density matrices.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    p.add_argument("name", help=f"one of {', '.join(DATASETS)}, or random_gmm (with --dim)")
    p.add_argument("n", type=int)
    p.add_argument("seed", type=int)
    p.add_argument("out")
    p.add_argument("--dim", type=int, default=2, help="dimension for random_gmm")
    p.add_argument("--config")

    p = sub.add_parser("fit", help="fit a density model and write a model file")
    p.add_argument("data")
    _add_model_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("estimate", help="evaluate a model on query points")
    p.add_argument("model")
    p.add_argument("queries")
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("benchmark", help="run the synthetic benchmark suite")
    p.add_argument("--suite", choices=(*SUITES, "all"), default="synthetic")
    p.add_argument("--datasets", help="comma-separated dataset names (overrides --suite)")
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--n-train", type=int, default=40000)
    p.add_argument("--n-test", type=int, default=5000)
    p.add_argument("--aff-steps", type=int, default=1000)
    p.add_argument("--steps", type=int, default=500, help="QAFFDE-SGD steps")
    p.add_argument("--grid", type=int, default=0, help="dump an N x N density grid per 2-D dataset and method")
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("classify", help="class-conditional density classification")
    p.add_argument("train")
    p.add_argument("test")
    _add_model_flags(p)
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--uniform-prior", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    return parser


def _write_config(out: str, config: dict) -> None:
    write_json(out + ".config.json", config)


def _resolve_gamma(args, X, seed):
    if args.gamma is not None:
        return args.gamma
    if args.auto_gamma:
        return auto_gamma(X, seed=seed)
    raise UsageError("one of --gamma or --auto-gamma is required")


def cmd_gen(args) -> int:
    if args.name == "random_gmm":
        _, data, _ = generate_random_gmm(args.dim, args.seed, n_train=args.n, n_test=1)
        dim = args.dim
    else:
        data = generate(args.name, args.n, args.seed)
        dim = 2
    write_dataset_csv(args.out, data.points, data.true_density)
    _write_config(args.out, {"command": "gen", "name": args.name, "n": args.n, "seed": args.seed, "dim": dim})
    return EXIT_OK


def _fit_config(args, X) -> FitConfig:
    return FitConfig(
        gamma=_resolve_gamma(args, X, args.seed),
        num_features=args.features,
        rank=args.rank,
        rank_frac=args.rank_frac,
        mode=args.mode,
        normalize=args.normalize,
        seed=args.seed,
        aff_steps=args.aff_steps,
        aff_lr_init=args.aff_lr_init,
        aff_lr_final=min(args.lr_final, args.aff_lr_init),
        num_pairs=args.pairs,
        steps=args.steps,
        lr_init=args.lr_init,
        lr_final=args.lr_final,
        batch_size=args.batch_size,
        sgd_init=args.sgd_init,
    )


def cmd_fit(args) -> int:
    X, _, _ = read_dataset_csv(args.data)
    result = fit_model(X, _fit_config(args, X))
    save_model(args.out, result.model)
    rows = [{"phase": "aff", "step": h["step"], "lr": h["lr"], "loss": h["loss"], "val_nll": ""} for h in result.aff_history]
    rows += [
        {"phase": "sgd", "step": h["step"], "lr": h["lr"], "loss": h["train_nll"], "val_nll": h["val_nll"]}
        for h in result.sgd_history
    ]
    write_rows_csv(args.out + ".report.csv", ["phase", "step", "lr", "loss", "val_nll"], rows)
    _write_config(args.out, {"command": "fit", "data": args.data, **result.config.to_dict()})
    return EXIT_OK


def cmd_estimate(args) -> int:
    model = load_model(args.model)
    X, _, _ = read_dataset_csv(args.queries)
    dens = predict_batch(model, X)
    write_rows_csv(
        args.out,
        [f"x{i + 1}" for i in range(X.shape[1])] + ["density"],
        (list(x) + [f] for x, f in zip(X, dens)),
    )
    _write_config(args.out, {"command": "estimate", "model": args.model, "queries": args.queries})
    return EXIT_OK


def cmd_benchmark(args) -> int:
    if args.datasets:
        datasets = [d for d in args.datasets.split(",") if d]
    elif args.suite == "all":
        datasets = [*SUITES["synthetic"], *SUITES["gmm"]]
    else:
        datasets = list(SUITES[args.suite])
    methods = tuple(m for m in args.methods.split(",") if m)
    settings = BenchSettings(
        n_train=args.n_train, n_test=args.n_test, methods=methods,
        aff_steps=args.aff_steps, sgd_steps=args.steps, grid_size=args.grid,
    )

    def progress(name, seed, res):
        for r in res.reports:
            print(f"{name:14s} seed={seed} {r.method:11s} spearman={r.spearman:.4f} mae={r.mae:.4f}", file=sys.stderr)

    results = run_benchmark(datasets, args.seeds, settings, progress=progress)
    rows = [r.to_row() for _, _, res in results for r in res.reports]
    write_rows_csv(args.out, REPORT_FIELDS, rows)
    if args.grid > 0:
        grid_dir = os.path.splitext(args.out)[0] + "_grids"
        os.makedirs(grid_dir, exist_ok=True)
        for name, seed, res in results:
            if not res.grids:
                continue
            _, _, G = grid_points(name, args.grid)
            for method, dens in res.grids.items():
                path = os.path.join(grid_dir, f"{name}_{method}_seed{seed}.csv")
                write_rows_csv(path, ["x1", "x2", "density"], (list(g) + [f] for g, f in zip(G, dens)))
    config = {"command": "benchmark", "datasets": datasets, "seeds": args.seeds, **settings.__dict__}
    config["methods"] = list(methods)
    _write_config(args.out, config)
    return EXIT_OK


def _labeled(path) -> LabeledDataset:
    X, _, labels = read_dataset_csv(path)
    if labels is None:
        raise InvalidArgumentError(f"{path}: no label column")
    return LabeledDataset(X, np.asarray(labels, dtype=object))


def cmd_classify(args) -> int:
    train = _labeled(args.train)
    test = _labeled(args.test)
    if test.dim != train.dim:
        raise InvalidArgumentError("train and test dimensions differ")
    rows, accs, gammas = [], [], []
    for seed in args.seeds:
        gamma = _resolve_gamma(args, train.points, seed)
        spec = KernelSpec(gamma, train.dim)
        aff_cfg = OptimizerConfig(
            initial_lr=args.aff_lr_init, final_lr=min(args.lr_final, args.aff_lr_init),
            steps=args.aff_steps, batch_size=args.batch_size, seed=seed,
        )
        fmap = train_aff(train.points, spec, args.features, aff_cfg, num_pairs=args.pairs, normalize=args.normalize)
        r = resolve_rank(args.features, args.rank, args.rank_frac)
        sgd_cfg = OptimizerConfig(
            initial_lr=args.lr_init, final_lr=args.lr_final, steps=args.steps,
            batch_size=args.batch_size, seed=seed,
        )
        t0 = time.perf_counter()
        model = fit_conditional(train, fmap, r, args.mode, sgd_cfg, gamma=gamma, uniform_prior=args.uniform_prior)
        pred, _, _ = classify_batch(model, test.points)
        acc = float(np.mean([p == t for p, t in zip(pred, test.labels)]))
        rows.append({"seed": seed, "accuracy": acc, "n_test": len(test), "wall_time_ms": 1000 * (time.perf_counter() - t0)})
        accs.append(acc)
        gammas.append(gamma)
    rows.append({"seed": "mean", "accuracy": float(np.mean(accs)), "n_test": len(test), "wall_time_ms": ""})
    write_rows_csv(args.out, ["seed", "accuracy", "n_test", "wall_time_ms"], rows)
    print(f"mean accuracy {np.mean(accs):.4f} over {len(accs)} seed(s)", file=sys.stderr)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    config["gamma_resolved"] = gammas
    _write_config(args.out, config)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "fit": cmd_fit,
    "estimate": cmd_estimate,
    "benchmark": cmd_benchmark,
    "classify": cmd_classify,
}


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a command is required")
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config file must hold a JSON object")
        # config values act as defaults; explicit flags still win
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = _parse(parser, argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qaffde: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDivergedError, NumericDegenerateError, UndefinedCorrelationError) as exc:
        print(f"qaffde: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidArgumentError, ConfigurationError, OSError) as exc:
        print(f"qaffde: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
