"""End-to-end episode execution, accuracy aggregation, sweeps, and the imbalance study.

An episode runs as: stack support and query features, build the similarity
graph over all vertices, diffuse features, train the softmax head on the
diffused support rows only, predict the diffused query rows, and score
against the held-out truth. Aggregation over runs reports the mean accuracy
with a 95% confidence interval (1.96 * sample stddev / sqrt(runs)).

Episodes are the unit of parallelism. Workers map run indices to results
and the fold happens in run-index order, so reports are byte-identical for
any worker count.
"""
from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .classify import TrainConfig, predict, train_logistic
from .episodes import Episode, EpisodeSpec, sample_episode, sample_imbalanced_two_way
from .errors import EvaluationError, GraphshotError, ValidationError
from .features import FeatureSet
from .graph import PropagationParams, build_episode_graph, propagate


@dataclass(frozen=True)
class HyperParams:
    """Graph hyperparameters plus classifier training settings."""

    propagation: PropagationParams
    train: TrainConfig

    @staticmethod
    def defaults(shots: int) -> "HyperParams":
        """Best-performing settings per shot count: (alpha, k, kappa) =
        (0.5, 10, 3) below 5 shots, (0.75, 15, 1) at 5 shots and above."""
        if shots >= 5:
            prop = PropagationParams(k=15, kappa=1, alpha=0.75)
        else:
            prop = PropagationParams(k=10, kappa=3, alpha=0.5)
        return HyperParams(propagation=prop, train=TrainConfig())


@dataclass(frozen=True)
class EpisodeResult:
    """Score of a single episode plus per-stage wall-clock timings."""

    accuracy: float
    epochs_run: int
    timings: dict[str, float]


@dataclass(frozen=True)
class EvalReport:
    """Aggregated accuracy over runs with the full configuration echoed back."""

    mean_accuracy: float
    ci95: float
    runs: int
    seed: int
    ways: int
    shots: int
    queries: int
    sampling: str
    pool_per_class: int | str
    k: int
    kappa: int
    alpha: float
    epochs: int
    learning_rate: float
    weight_decay: float
    mean_epochs_run: float
    episodes_fingerprint: str
    accuracies: np.ndarray
    q1: int | None = None

    def to_dict(self, include_accuracies: bool = False) -> dict:
        out = {
            "mean_accuracy": self.mean_accuracy,
            "ci95": self.ci95,
            "runs": self.runs,
            "seed": self.seed,
            "ways": self.ways,
            "shots": self.shots,
            "queries": self.queries,
            "sampling": self.sampling,
            "pool_per_class": self.pool_per_class,
            "k": self.k,
            "kappa": self.kappa,
            "alpha": self.alpha,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "mean_epochs_run": self.mean_epochs_run,
            "episodes_fingerprint": self.episodes_fingerprint,
        }
        if self.q1 is not None:
            out["q1"] = self.q1
        if include_accuracies:
            out["accuracies"] = [float(a) for a in self.accuracies]
        return out

    def to_json(self, include_accuracies: bool = False) -> str:
        return json.dumps(self.to_dict(include_accuracies), indent=2) + "\n"


@dataclass(frozen=True)
class SweepReport:
    """One EvalReport per grid point, emitted in grid order."""

    rows: list[tuple[HyperParams, EvalReport]]

    def reports(self) -> list[EvalReport]:
        return [report for _, report in self.rows]


def confidence_interval95(accuracies: Sequence[float]) -> tuple[float, float]:
    """Mean and 95% CI half-width: 1.96 * sample stddev / sqrt(n).

    A single run has no spread, so its CI is 0 by convention.
    """
    values = np.asarray(accuracies, dtype=np.float64)
    mean = float(values.mean())
    if values.shape[0] < 2:
        return mean, 0.0
    half = 1.96 * float(np.std(values, ddof=1)) / math.sqrt(values.shape[0])
    return mean, half


def run_episode(episode: Episode, hp: HyperParams) -> EpisodeResult:
    """Graph -> diffuse -> train on supports -> predict queries -> score."""
    timings: dict[str, float] = {}
    stacked = np.vstack([episode.support_features, episode.query_features])
    n_support = episode.support_features.shape[0]

    t0 = time.perf_counter()
    _, adjacency = build_episode_graph(stacked, hp.propagation)
    t1 = time.perf_counter()
    diffused = propagate(stacked, adjacency, hp.propagation)
    t2 = time.perf_counter()
    weights = train_logistic(
        diffused[:n_support], episode.support_labels, episode.ways, hp.train
    )
    t3 = time.perf_counter()
    predictions = predict(diffused[n_support:], weights)
    t4 = time.perf_counter()

    timings["graph"] = t1 - t0
    timings["propagate"] = t2 - t1
    timings["train"] = t3 - t2
    timings["predict"] = t4 - t3
    correct = int(np.sum(predictions.labels == episode.query_truth))
    return EpisodeResult(
        accuracy=correct / episode.query_count,
        epochs_run=weights.epochs_run,
        timings=timings,
    )


# Worker-pool state inherited by forked children; run indices are the only
# payload crossing the process boundary.
_FORK_STATE: dict | None = None


def _run_indexed(index: int) -> tuple[float, int, str]:
    state = _FORK_STATE
    try:
        episode = state["sampler"](index)
        result = run_episode(episode, state["hp"])
    except GraphshotError as exc:
        raise EvaluationError(f"run {index}: {exc}") from exc
    return result.accuracy, result.epochs_run, episode.fingerprint()


def _map_runs(
    sampler: Callable[[int], Episode],
    hp: HyperParams,
    runs: int,
    workers: int,
) -> list[tuple[float, int, str]]:
    global _FORK_STATE
    _FORK_STATE = {"sampler": sampler, "hp": hp}
    try:
        if workers <= 1:
            return [_run_indexed(i) for i in range(runs)]
        context = multiprocessing.get_context("fork")
        chunk = max(1, runs // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers, mp_context=context) as pool:
            return list(pool.map(_run_indexed, range(runs), chunksize=chunk))
    finally:
        _FORK_STATE = None


def _aggregate(
    outcomes: list[tuple[float, int, str]],
    spec_fields: dict,
    hp: HyperParams,
    runs: int,
    seed: int,
) -> EvalReport:
    accuracies = np.array([acc for acc, _, _ in outcomes])
    mean, ci95 = confidence_interval95(accuracies)
    rolling = hashlib.sha256()
    for _, _, fingerprint in outcomes:
        rolling.update(fingerprint.encode("ascii"))
    return EvalReport(
        mean_accuracy=mean,
        ci95=ci95,
        runs=runs,
        seed=seed,
        k=hp.propagation.k,
        kappa=hp.propagation.kappa,
        alpha=hp.propagation.alpha,
        epochs=hp.train.epochs,
        learning_rate=hp.train.learning_rate,
        weight_decay=hp.train.weight_decay,
        mean_epochs_run=float(np.mean([e for _, e, _ in outcomes])),
        episodes_fingerprint=rolling.hexdigest(),
        accuracies=accuracies,
        **spec_fields,
    )


def evaluate(
    fset: FeatureSet,
    spec: EpisodeSpec,
    hp: HyperParams,
    runs: int,
    seed: int,
    workers: int = 1,
) -> EvalReport:
    """Run independent episodes keyed by (seed, 0..runs-1) and aggregate.

    The report is identical regardless of worker count or scheduling; any
    failing episode aborts the evaluation with its run index attached.
    """
    if runs < 1:
        raise ValidationError(f"runs must be >= 1, got {runs}")
    outcomes = _map_runs(
        lambda i: sample_episode(fset, spec, seed, i), hp, runs, workers
    )
    spec_fields = {
        "ways": spec.ways,
        "shots": spec.shots,
        "queries": spec.queries_total,
        "sampling": spec.sampling,
        "pool_per_class": spec.pool_per_class,
    }
    return _aggregate(outcomes, spec_fields, hp, runs, seed)


def sweep(
    fset: FeatureSet,
    spec: EpisodeSpec,
    k_grid: Sequence[int],
    kappa_grid: Sequence[int],
    alpha_grid: Sequence[float],
    train: TrainConfig,
    runs: int,
    seed: int,
    workers: int = 1,
) -> SweepReport:
    """Evaluate the Cartesian grid (k outermost, alpha innermost).

    Every grid point replays the same episode stream (same seed), so rows
    differ only by hyperparameters: comparisons are paired, and each row's
    episodes_fingerprint is identical.
    """
    if not (len(k_grid) and len(kappa_grid) and len(alpha_grid)):
        raise ValidationError("sweep grid must be nonempty in k, kappa, and alpha")
    rows = []
    for k, kappa, alpha in product(k_grid, kappa_grid, alpha_grid):
        hp = HyperParams(
            propagation=PropagationParams(k=k, kappa=kappa, alpha=alpha), train=train
        )
        rows.append((hp, evaluate(fset, spec, hp, runs, seed, workers)))
    return SweepReport(rows=rows)


def evaluate_imbalance(
    fset: FeatureSet,
    q1_list: Sequence[int],
    total: int,
    shots: int,
    hp: HyperParams,
    runs: int,
    seed: int,
    workers: int = 1,
) -> list[tuple[int, EvalReport]]:
    """One 2-way evaluation per q1; accuracy is over all `total` queries."""
    if runs < 1:
        raise ValidationError(f"runs must be >= 1, got {runs}")
    for q1 in q1_list:
        if not 1 <= q1 <= total - 1:
            raise ValidationError(f"q1 must lie in [1, {total - 1}], got {q1}")
    results = []
    for q1 in q1_list:
        outcomes = _map_runs(
            lambda i, q1=q1: sample_imbalanced_two_way(fset, q1, total, shots, seed, i),
            hp,
            runs,
            workers,
        )
        spec_fields = {
            "ways": 2,
            "shots": shots,
            "queries": total,
            "sampling": "imbalanced",
            "pool_per_class": "all",
            "q1": q1,
        }
        results.append((q1, _aggregate(outcomes, spec_fields, hp, runs, seed)))
    return results


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    """One CSV row per report, mirroring the JSON field names."""
    columns = [
        "mean_accuracy",
        "ci95",
        "runs",
        "seed",
        "ways",
        "shots",
        "queries",
        "sampling",
        "pool_per_class",
        "k",
        "kappa",
        "alpha",
        "epochs",
        "learning_rate",
        "weight_decay",
        "mean_epochs_run",
        "q1",
        "episodes_fingerprint",
    ]
    lines = [",".join(columns)]
    for report in reports:
        data = report.to_dict()
        lines.append(",".join(str(data.get(col, "")) for col in columns))
    return "\n".join(lines) + "\n"


def reports_to_json(reports: Sequence[EvalReport], include_accuracies: bool = False) -> str:
    return (
        json.dumps([r.to_dict(include_accuracies) for r in reports], indent=2) + "\n"
    )
