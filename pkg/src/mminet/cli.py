"""Command-line entry point: ``mminet {gen,eval,sweep,gradcheck,train,transform}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .data import Dataset, StandardizationStats, apply_standardizer, fit_standardizer, load_csv, save_csv
from .errors import DataError, NumericalError
from .harness import GENERATORS, METHODS, DataSource, ExperimentSpec, run_experiment, run_sweep, write_tidy_csv
from .nn import load_network, save_network
from .trainer import GRADIENT_MODES, TrainConfig, train_mminet, transform

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _methods(text: str) -> list[str]:
    if text == "all":
        return list(METHODS)
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METHODS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {METHODS} or 'all'")
    return names


def _add_source(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", help="CSV file with a header row")
    src.add_argument("--gen", choices=GENERATORS, help="use a built-in generator instead of a file")
    p.add_argument("--gen-seed", type=int, default=None, help="generator seed (defaults to --seed)")
    p.add_argument("--n-per-class", type=int, default=200, help="toy2d samples per class")
    p.add_argument("--label-col", default="label", help="label column name or 0-based index")
    p.add_argument("--no-header", action="store_true", help="CSV has no header row")


def _add_training(p):
    p.add_argument("--arch", choices=("paper_default", "single_linear"), default="paper_default")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--gradient", choices=GRADIENT_MODES, default="full")
    p.add_argument("--refresh-every", type=int, default=1)


def _add_experiment(p):
    _add_source(p)
    _add_training(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--bins", type=int, default=10, help="mRMR discretization bins")
    p.add_argument("--chunk-fraction", type=float, default=0.1, help="SVM-RFE elimination fraction")
    p.add_argument("--svm-lambda", type=float, default=1e-3)
    p.add_argument("--svm-epochs", type=int, default=20)
    p.add_argument("--workers", type=int, default=1, help="parallel fold processes")
    p.add_argument("--report", help="write the JSON report(s) here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mminet", description="Mutual-information projection networks and baselines.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthetic dataset to CSV")
    p.add_argument("name", choices=GENERATORS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=200)

    p = sub.add_parser("eval", help="k-fold evaluation of one method")
    _add_experiment(p)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--dy", type=int, required=True)

    p = sub.add_parser("sweep", help="evaluate several methods over several output dimensions")
    _add_experiment(p)
    p.add_argument("--dy-list", type=_int_list, required=True)
    p.add_argument("--methods", type=_methods, default=list(METHODS))
    p.add_argument("--csv", help="tidy per-fold results CSV")

    p = sub.add_parser("gradcheck", help="finite-difference check of all analytic gradients")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="fit a projection network on a whole dataset and save it")
    _add_source(p)
    _add_training(p)
    p.add_argument("--dy", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", required=True, help="output .npz path")

    p = sub.add_parser("transform", help="project a CSV with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--label-col", default="label")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--out", required=True)
    for name, p in sub.choices.items():
        p.set_defaults(usage=p.format_usage())
    return parser


def _source(args) -> DataSource:
    if args.data is None and args.gen is None:
        raise UsageError("one of --data or --gen is required")
    if args.data is not None:
        return DataSource(path=args.data, label_column=args.label_col, has_header=not args.no_header)
    seed = args.seed if args.gen_seed is None else args.gen_seed
    params = {"n_per_class": args.n_per_class} if args.gen == "toy2d" else {}
    return DataSource(generator=args.gen, gen_seed=seed, gen_params=params)


def _spec(args, method: str, d_y: int) -> ExperimentSpec:
    try:
        spec = ExperimentSpec(
            source=_source(args), method=method, d_y=d_y, folds=args.folds, seed=args.seed,
            arch=args.arch, epochs=args.epochs, learning_rate=args.lr, momentum=args.momentum,
            refresh_every=args.refresh_every, gradient=args.gradient, mrmr_bins=args.bins,
            rfe_chunk_fraction=args.chunk_fraction, svm_lambda=args.svm_lambda,
            svm_epochs=args.svm_epochs,
        )
        spec.train_config(0)  # validates the training flags up front
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return spec


def _summary(rep) -> str:
    accs = " ".join(f"{a:.4f}" for a in rep.fold_accuracies)
    return (f"{rep.dataset} {rep.spec['method']} d_y={rep.spec['d_y']}: "
            f"mean {rep.mean:.4f} std {rep.std:.4f} [{accs}]")


def cmd_gen(args) -> int:
    source = DataSource(generator=args.name, gen_seed=args.seed,
                        gen_params={"n_per_class": args.n_per_class} if args.name == "toy2d" else {})
    dataset = source.load()
    save_csv(dataset, args.out)
    print(f"wrote {dataset.n_samples} rows x {dataset.n_features} features to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    spec = _spec(args, args.method, args.dy)
    rep = run_experiment(spec, workers=args.workers)
    print(_summary(rep))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(rep.to_json())
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = _spec(args, args.methods[0], args.dy_list[0])
    reports = run_sweep(spec, args.dy_list, args.methods, workers=args.workers)
    for rep in reports:
        print(_summary(rep))
    if args.csv:
        rows = write_tidy_csv(reports, args.csv)
        print(f"wrote {rows} rows to {args.csv}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump([json.loads(r.to_json()) for r in reports], fh, indent=2)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_gradcheck

    results = run_gradcheck(args.seed)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    print("gradcheck: all passed" if ok else "gradcheck: FAILED")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_train(args) -> int:
    args.folds = 2  # unused; keeps _source/_spec helpers uniform
    dataset = _source(args).load()
    try:
        config = TrainConfig(d_y=args.dy, arch=args.arch, epochs=args.epochs, learning_rate=args.lr,
                             momentum=args.momentum, seed=args.seed, refresh_every=args.refresh_every,
                             gradient=args.gradient)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    stats = fit_standardizer(dataset)
    net, report = train_mminet(apply_standardizer(stats, dataset), config)
    save_network(net, args.model, means=stats.means, stds=stats.stds, constant=stats.constant,
                 config=json.dumps(config.to_dict()))
    tail = report.loss_trace[-50:]
    print(f"trained {report.iterations} steps ({report.skipped} skipped), "
          f"final mean loss {np.mean(tail) if tail else float('nan'):.4f}; saved {args.model}")
    return EXIT_OK


def cmd_transform(args) -> int:
    try:
        net, extras = load_network(args.model)
    except (OSError, KeyError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"cannot read model {args.model}: {exc}") from None
    dataset = load_csv(args.data, args.label_col, not args.no_header)
    if dataset.n_features != net.input_dim:
        raise DataError(f"model expects {net.input_dim} features, {args.data} has {dataset.n_features}")
    if "means" in extras:
        stats = StandardizationStats(extras["means"], extras["stds"], extras["constant"].astype(bool))
        dataset = apply_standardizer(stats, dataset)
    Y = transform(net, dataset)
    out = Dataset(Y, dataset.labels, dataset.class_count,
                  [f"y{j + 1}" for j in range(Y.shape[1])], dataset.label_names)
    save_csv(out, args.out, label_column=args.label_col)
    print(f"wrote {Y.shape[0]} x {Y.shape[1]} projections to {args.out}")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen, "eval": cmd_eval, "sweep": cmd_sweep, "gradcheck": cmd_gradcheck,
    "train": cmd_train, "transform": cmd_transform,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return COMMANDS[args.command](args)
    except UsageError as exc:
        if args is not None and getattr(args, "usage", None):
            print(args.usage, end="", file=sys.stderr)
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
