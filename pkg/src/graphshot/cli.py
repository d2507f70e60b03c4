"""Command-line front end: synthetic data, evaluation, sweeps, imbalance, embedding.

Exit codes: 0 on success, 1 on validation/usage errors, 2 on I/O errors.
Reports are JSON by default (CSV via --report-format csv) and embed the
complete effective configuration, flags plus defaults, so any run can be
reproduced exactly. All randomness is governed by --seed. Passing --plot
renders a matplotlib figure next to the report.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import plots
from .classify import TrainConfig
from .episodes import EpisodeSpec, sample_episode
from .errors import EvaluationError, FeatureFileError, ValidationError
from .evaluate import (
    EvalReport,
    HyperParams,
    evaluate,
    evaluate_imbalance,
    reports_to_csv,
    reports_to_json,
    sweep,
)
from .features import (
    SyntheticConfig,
    generate_synthetic,
    infer_format,
    load_feature_set,
    save_feature_set,
)
from .graph import PropagationParams, build_episode_graph, laplacian_embedding


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage to 1
        raise _UsageError(message)


def _positive_int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {exc}")
    if not values:
        raise argparse.ArgumentTypeError("list must be nonempty")
    return values


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {exc}")
    if not values:
        raise argparse.ArgumentTypeError("list must be nonempty")
    return values


def _pool(text: str) -> int | str:
    if text == "all":
        return "all"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f'pool must be a positive integer or "all", got {text!r}')


def _add_episode_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--features", required=True, help="feature file (FSET1 binary or CSV)")
    parser.add_argument(
        "--features-format",
        choices=("auto", "binary", "csv"),
        default="auto",
        help="feature file format; auto maps .csv to CSV, anything else to binary",
    )
    parser.add_argument("--ways", type=int, default=5, help="classes per episode, >= 2")
    parser.add_argument("--shots", type=int, default=1, help="labeled rows per class, >= 1")
    parser.add_argument("--queries", type=int, default=75, help="total unlabeled rows, >= 1")
    parser.add_argument(
        "--sampling",
        choices=("balanced", "uniform"),
        default="uniform",
        help="balanced: exactly queries/ways per class; uniform: draw from equal per-class pools",
    )
    parser.add_argument(
        "--pool",
        type=_pool,
        default="all",
        help='per-class pool size for uniform sampling: positive integer or "all"',
    )


def _add_hyper_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--k",
        type=int,
        default=None,
        help="neighbors kept per vertex; valid range 1 <= k < ways*shots + queries "
        "(clamped to the episode size); default 10, or 15 for --shots >= 5",
    )
    parser.add_argument(
        "--kappa",
        type=int,
        default=None,
        help="diffusion power, a positive integer (0 admitted: no propagation); "
        "default 3, or 1 for --shots >= 5",
    )
    parser.add_argument(
        "--alpha",
        type=float,
        default=None,
        help="self-representation strength, 0 <= alpha <= 1; default 0.5, "
        "or 0.75 for --shots >= 5",
    )
    parser.add_argument("--epochs", type=int, default=1000, help="training epochs, >= 1")
    parser.add_argument("--learning-rate", type=float, default=1e-3, help="optimizer step size, > 0")
    parser.add_argument("--weight-decay", type=float, default=5e-6, help="L2 penalty, >= 0")


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--runs", type=int, default=500, help="episodes to average over")
    parser.add_argument("--seed", type=int, default=42, help="seed for every random draw")
    parser.add_argument("--workers", type=int, default=1, help="parallel episode workers; results are identical for any value")
    parser.add_argument("--out", default=None, help="report file; stdout when omitted")
    parser.add_argument(
        "--report-format", choices=("json", "csv"), default="json", help="report encoding"
    )
    parser.add_argument(
        "--plot",
        nargs="?",
        const="auto",
        default=None,
        metavar="PNG",
        help="render a figure next to the report (default path derives from --out)",
    )


def _hyperparams(args: argparse.Namespace) -> HyperParams:
    base = HyperParams.defaults(args.shots)
    prop = PropagationParams(
        k=args.k if args.k is not None else base.propagation.k,
        kappa=args.kappa if args.kappa is not None else base.propagation.kappa,
        alpha=args.alpha if args.alpha is not None else base.propagation.alpha,
    )
    train = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
    )
    return HyperParams(propagation=prop, train=train)


def _load_features(args: argparse.Namespace):
    fmt = args.features_format
    if fmt == "auto":
        fmt = infer_format(args.features)
    return load_feature_set(args.features, fmt)


def _write_text(payload: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(payload)
        return
    try:
        Path(out).write_text(payload)
    except OSError as exc:
        raise FeatureFileError(f"cannot write {out}: {exc}") from exc


def _figure_path(args: argparse.Namespace, suffix: str) -> Path:
    if args.plot != "auto":
        return Path(args.plot)
    if args.out:
        return Path(args.out).with_suffix(".png")
    return Path(f"graphshot-{suffix}.png")


def cmd_synth(args: argparse.Namespace) -> int:
    config = SyntheticConfig(
        class_count=args.classes,
        per_class=args.per_class,
        dim=args.dim,
        center_scale=args.center_scale,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
    )
    fset = generate_synthetic(config)
    fmt = args.format if args.format != "auto" else infer_format(args.out)
    save_feature_set(fset, args.out, fmt)
    print(f"wrote {fset.sample_count} x {fset.dim} features ({fmt}) to {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    fset = _load_features(args)
    spec = EpisodeSpec(
        ways=args.ways,
        shots=args.shots,
        queries_total=args.queries,
        sampling=args.sampling,
        pool_per_class=args.pool,
    )
    hp = _hyperparams(args)
    report = evaluate(fset, spec, hp, args.runs, args.seed, args.workers)
    payload = _render_reports([report], args, command="eval")
    _write_text(payload, args.out)
    if args.plot:
        figure = plots.plot_accuracy_histogram(report, _figure_path(args, "eval"))
        print(f"figure: {figure}", file=sys.stderr)
    print(
        f"accuracy {report.mean_accuracy:.4f} ± {report.ci95:.4f} "
        f"over {report.runs} runs",
        file=sys.stderr,
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    fset = _load_features(args)
    spec = EpisodeSpec(
        ways=args.ways,
        shots=args.shots,
        queries_total=args.queries,
        sampling=args.sampling,
        pool_per_class=args.pool,
    )
    train = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        weight_decay=args.weight_decay,
    )
    result = sweep(
        fset,
        spec,
        args.k_grid,
        args.kappa_grid,
        args.alpha_grid,
        train,
        args.runs,
        args.seed,
        args.workers,
    )
    payload = _render_reports(result.reports(), args, command="sweep")
    _write_text(payload, args.out)
    if args.plot:
        figure = plots.plot_sweep(result, _figure_path(args, "sweep"))
        print(f"figure: {figure}", file=sys.stderr)
    return 0


def cmd_imbalance(args: argparse.Namespace) -> int:
    fset = _load_features(args)
    hp = _hyperparams(args)
    results = evaluate_imbalance(
        fset,
        args.q1_list,
        args.total,
        args.shots,
        hp,
        args.runs,
        args.seed,
        args.workers,
    )
    payload = _render_reports([r for _, r in results], args, command="imbalance")
    _write_text(payload, args.out)
    if args.plot:
        figure = plots.plot_imbalance(results, _figure_path(args, "imbalance"))
        print(f"figure: {figure}", file=sys.stderr)
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    fset = _load_features(args)
    spec = EpisodeSpec(
        ways=args.ways,
        shots=args.shots,
        queries_total=args.queries,
        sampling=args.sampling,
        pool_per_class=args.pool,
    )
    episode = sample_episode(fset, spec, args.seed, 0)
    stacked = np.vstack([episode.support_features, episode.query_features])
    labels = np.concatenate([episode.support_labels, episode.query_truth])
    params = PropagationParams(k=args.k if args.k is not None else 10, kappa=1, alpha=0.5)
    _, adjacency = build_episode_graph(stacked, params)
    embedding = laplacian_embedding(adjacency, args.dims)

    lines = ["vertex,label," + ",".join(f"x{i}" for i in range(args.dims))]
    for vertex, (label, row) in enumerate(zip(labels, embedding.coordinates)):
        lines.append(f"{vertex},{label}," + ",".join(str(float(v)) for v in row))
    _write_text("\n".join(lines) + "\n", args.out)
    if args.plot:
        figure = plots.plot_embedding(
            embedding.coordinates, labels, _figure_path(args, "embed")
        )
        print(f"figure: {figure}", file=sys.stderr)
    return 0


def _render_reports(reports: list[EvalReport], args: argparse.Namespace, command: str) -> str:
    include_acc = getattr(args, "include_accuracies", False)
    if args.report_format == "csv":
        return reports_to_csv(reports)
    dicts = []
    for report in reports:
        entry = {"command": command, "features": str(args.features)}
        entry.update(report.to_dict(include_accuracies=include_acc))
        dicts.append(entry)
    if command == "eval":
        return json.dumps(dicts[0], indent=2) + "\n"
    return json.dumps(dicts, indent=2) + "\n"


def build_parser() -> _Parser:
    parser = _Parser(
        prog="graphshot",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    synth = commands.add_parser("synth", help="generate a synthetic feature set")
    synth.add_argument("--classes", type=int, default=20, help="number of classes, >= 2")
    synth.add_argument("--per-class", type=int, default=600, help="rows per class, >= 2")
    synth.add_argument("--dim", type=int, default=64, help="feature dimension, >= 2")
    synth.add_argument("--center-scale", type=float, default=1.0, help="class center magnitude, > 0")
    synth.add_argument("--noise-sigma", type=float, default=0.3, help="within-class spread, > 0")
    synth.add_argument("--seed", type=int, default=42, help="generator seed")
    synth.add_argument("--out", required=True, help="output path (.csv selects CSV)")
    synth.add_argument("--format", choices=("auto", "binary", "csv"), default="auto")
    synth.set_defaults(handler=cmd_synth)

    ev = commands.add_parser("eval", help="evaluate episodes and report accuracy")
    _add_episode_flags(ev)
    _add_hyper_flags(ev)
    _add_run_flags(ev)
    ev.add_argument(
        "--include-accuracies",
        action="store_true",
        help="retain per-run accuracies in the JSON report",
    )
    ev.set_defaults(handler=cmd_eval)

    sw = commands.add_parser("sweep", help="evaluate a hyperparameter grid with paired episodes")
    _add_episode_flags(sw)
    sw.add_argument("--k-grid", type=_positive_int_list, default=[5, 10, 15, 20],
                    help="comma-separated k values (each 1 <= k < ways*shots + queries)")
    sw.add_argument("--kappa-grid", type=_positive_int_list, default=[1, 2, 3, 4, 5],
                    help="comma-separated kappa values (positive integers; 0 disables propagation)")
    sw.add_argument("--alpha-grid", type=_float_list, default=[0.0, 0.25, 0.5, 0.75, 1.0],
                    help="comma-separated alpha values in [0, 1]")
    sw.add_argument("--epochs", type=int, default=1000, help="training epochs, >= 1")
    sw.add_argument("--learning-rate", type=float, default=1e-3, help="optimizer step size, > 0")
    sw.add_argument("--weight-decay", type=float, default=5e-6, help="L2 penalty, >= 0")
    _add_run_flags(sw)
    sw.set_defaults(handler=cmd_sweep)

    imb = commands.add_parser("imbalance", help="2-way accuracy under uneven query counts")
    imb.add_argument("--features", required=True, help="feature file (FSET1 binary or CSV)")
    imb.add_argument("--features-format", choices=("auto", "binary", "csv"), default="auto")
    imb.add_argument("--q1-list", type=_positive_int_list, default=[1, 10, 25, 50],
                     help="comma-separated q1 values, each in [1, total-1]")
    imb.add_argument("--total", type=int, default=100, help="fixed total query count")
    imb.add_argument("--shots", type=int, default=1, help="labeled rows per class, >= 1")
    _add_hyper_flags(imb)
    _add_run_flags(imb)
    imb.set_defaults(handler=cmd_imbalance)

    emb = commands.add_parser("embed", help="export a Laplacian embedding of one episode graph")
    _add_episode_flags(emb)
    emb.add_argument("--k", type=int, default=None,
                     help="neighbors kept per vertex; 1 <= k < ways*shots + queries (clamped)")
    emb.add_argument("--dims", type=int, default=2, help="embedding dimensions, >= 1")
    emb.add_argument("--seed", type=int, default=42, help="episode seed")
    emb.add_argument("--out", default=None, help="CSV path; stdout when omitted")
    emb.add_argument("--plot", nargs="?", const="auto", default=None, metavar="PNG",
                     help="scatter plot of the first two coordinates")
    emb.set_defaults(handler=cmd_embed)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "command", None) is None:
        parser.print_help()
        return 1
    try:
        return args.handler(args)
    except (ValidationError, EvaluationError, _UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FeatureFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
