"""Episodic task sampling: balanced, uniform-pool, and 2-way imbalanced draws.

Every episode is a pure function of (feature set, spec, seed, run_index).
Randomness comes from a counter-based generator (Philox) keyed by the seed
and run index together, so any subset of runs can be drawn in any order, on
any worker, and still reproduce bit-identically.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import FeatureSet

SAMPLING_MODES = ("balanced", "uniform")


def episode_rng(seed: int, run_index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, run_index)."""
    key = np.random.SeedSequence(entropy=(seed & (2**64 - 1), run_index))
    return np.random.Generator(np.random.Philox(key))


@dataclass(frozen=True)
class EpisodeSpec:
    """Shape of one few-shot task.

    balanced sampling draws exactly queries_total / ways queries per class;
    uniform sampling merges an equal-size per-class pool and draws the
    queries from it uniformly, so per-class counts fluctuate. pool_per_class
    is an integer pool size or "all" (use everything left, truncated to the
    minimum available across the chosen classes so pools stay equal).
    """

    ways: int
    shots: int
    queries_total: int
    sampling: str = "uniform"
    pool_per_class: int | str = "all"

    def __post_init__(self):
        if self.ways < 2:
            raise ValidationError(f"ways must be >= 2, got {self.ways}")
        if self.shots < 1:
            raise ValidationError(f"shots must be >= 1, got {self.shots}")
        if self.queries_total < 1:
            raise ValidationError(f"queries_total must be >= 1, got {self.queries_total}")
        if self.sampling not in SAMPLING_MODES:
            raise ValidationError(
                f"sampling must be one of {SAMPLING_MODES}, got {self.sampling!r}"
            )
        if self.sampling == "balanced" and self.queries_total % self.ways:
            raise ValidationError(
                f"balanced sampling requires ways ({self.ways}) to divide "
                f"queries_total ({self.queries_total})"
            )
        if self.pool_per_class != "all":
            if not isinstance(self.pool_per_class, int) or self.pool_per_class < 1:
                raise ValidationError(
                    f'pool_per_class must be a positive integer or "all", '
                    f"got {self.pool_per_class!r}"
                )


@dataclass(frozen=True)
class Episode:
    """One few-shot task with ground-truth query labels held out for scoring.

    Labels are episode-local (0..ways-1); class_map sends them back to the
    source FeatureSet's class indices. Support and query rows are disjoint.
    """

    support_features: np.ndarray  # (shots * ways, h) float64
    support_labels: np.ndarray  # (shots * ways,) in [0, ways)
    query_features: np.ndarray  # (Q, h) float64
    query_truth: np.ndarray  # (Q,) in [0, ways)
    class_map: np.ndarray  # (ways,) episode-local -> original class

    @property
    def ways(self) -> int:
        return self.class_map.shape[0]

    @property
    def query_count(self) -> int:
        return self.query_truth.shape[0]

    def fingerprint(self) -> str:
        """Content hash used to prove two runs consumed the same episode."""
        digest = hashlib.sha256()
        for arr in (
            self.support_features,
            self.support_labels,
            self.query_features,
            self.query_truth,
            self.class_map,
        ):
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()


def _class_rows(fset: FeatureSet, classes: np.ndarray) -> list[np.ndarray]:
    return [np.flatnonzero(fset.labels == c) for c in classes]


def _build_episode(
    fset: FeatureSet,
    classes: np.ndarray,
    support_rows: np.ndarray,
    query_rows: np.ndarray,
    query_truth: np.ndarray,
    shots: int,
) -> Episode:
    support_labels = np.repeat(np.arange(classes.shape[0]), shots)
    return Episode(
        support_features=fset.features[support_rows].astype(np.float64),
        support_labels=support_labels,
        query_features=fset.features[query_rows].astype(np.float64),
        query_truth=np.asarray(query_truth, dtype=np.int64),
        class_map=classes.astype(np.int64),
    )


def sample_episode(
    fset: FeatureSet, spec: EpisodeSpec, seed: int, run_index: int
) -> Episode:
    """Draw one episode under the spec's sampling protocol.

    Classes are drawn uniformly without replacement, then shots support
    rows per class. Balanced mode draws exactly queries_total/ways query
    rows per class; uniform mode pools pool_per_class remaining rows per
    class (equal across classes) and draws all queries from the merged pool.
    """
    if fset.class_count < spec.ways:
        raise ValidationError(
            f"need {spec.ways} classes, feature set has {fset.class_count}"
        )
    rng = episode_rng(seed, run_index)
    classes = rng.choice(fset.class_count, size=spec.ways, replace=False)
    rows_by_class = _class_rows(fset, classes)

    if spec.sampling == "balanced":
        per_class = spec.queries_total // spec.ways
        support_parts, query_parts = [], []
        for local, rows in enumerate(rows_by_class):
            needed = spec.shots + per_class
            if rows.shape[0] < needed:
                raise ValidationError(
                    f"class {int(classes[local])} has {rows.shape[0]} rows, "
                    f"needs {needed} (shots + queries per class)"
                )
            picked = rng.choice(rows, size=needed, replace=False)
            support_parts.append(picked[: spec.shots])
            query_parts.append(picked[spec.shots :])
        support_rows = np.concatenate(support_parts)
        query_rows = np.concatenate(query_parts)
        query_truth = np.repeat(np.arange(spec.ways), per_class)
        return _build_episode(
            fset, classes, support_rows, query_rows, query_truth, spec.shots
        )

    # uniform: equal per-class pools, queries drawn from the merged pool
    support_parts, remaining = [], []
    for local, rows in enumerate(rows_by_class):
        if rows.shape[0] < spec.shots + 1:
            raise ValidationError(
                f"class {int(classes[local])} has {rows.shape[0]} rows, needs "
                f"{spec.shots + 1} (shots plus at least one pool row)"
            )
        picked = rng.choice(rows, size=spec.shots, replace=False)
        support_parts.append(picked)
        remaining.append(rows[~np.isin(rows, picked)])
    min_available = min(rem.shape[0] for rem in remaining)
    pool_size = (
        min_available
        if spec.pool_per_class == "all"
        else min(spec.pool_per_class, min_available)
    )
    merged_rows = np.concatenate(
        [rng.choice(rem, size=pool_size, replace=False) for rem in remaining]
    )
    merged_truth = np.repeat(np.arange(spec.ways), pool_size)
    if merged_rows.shape[0] < spec.queries_total:
        raise ValidationError(
            f"pool of {merged_rows.shape[0]} rows cannot supply "
            f"{spec.queries_total} queries"
        )
    chosen = rng.choice(merged_rows.shape[0], size=spec.queries_total, replace=False)
    return _build_episode(
        fset,
        classes,
        np.concatenate(support_parts),
        merged_rows[chosen],
        merged_truth[chosen],
        spec.shots,
    )


def sample_imbalanced_two_way(
    fset: FeatureSet,
    q1: int,
    total: int,
    shots: int,
    seed: int,
    run_index: int,
) -> Episode:
    """Two-class episode with q1 queries from the first class, total-q1 from the second.

    The total stays fixed while q1 slides, which is what makes the
    imbalance study comparable across q1 values.
    """
    if shots < 1:
        raise ValidationError(f"shots must be >= 1, got {shots}")
    if total < 2:
        raise ValidationError(f"total must be >= 2, got {total}")
    if not 1 <= q1 <= total - 1:
        raise ValidationError(f"q1 must lie in [1, {total - 1}], got {q1}")
    if fset.class_count < 2:
        raise ValidationError("need at least 2 classes")
    rng = episode_rng(seed, run_index)
    classes = rng.choice(fset.class_count, size=2, replace=False)
    rows_by_class = _class_rows(fset, classes)

    counts = (q1, total - q1)
    support_parts, query_parts = [], []
    for local, rows in enumerate(rows_by_class):
        needed = shots + counts[local]
        if rows.shape[0] < needed:
            raise ValidationError(
                f"class {int(classes[local])} has {rows.shape[0]} rows, needs {needed}"
            )
        picked = rng.choice(rows, size=needed, replace=False)
        support_parts.append(picked[:shots])
        query_parts.append(picked[shots:])
    query_truth = np.repeat(np.arange(2), counts)
    return _build_episode(
        fset,
        classes,
        np.concatenate(support_parts),
        np.concatenate(query_parts),
        query_truth,
        shots,
    )
