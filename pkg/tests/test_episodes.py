from __future__ import annotations

import numpy as np
import pytest

from graphshot import (
    EpisodeSpec,
    FeatureSet,
    SyntheticConfig,
    ValidationError,
    episode_rng,
    generate_synthetic,
    sample_episode,
    sample_imbalanced_two_way,
)


def per_class_query_counts(episode) -> np.ndarray:
    return np.bincount(episode.query_truth, minlength=episode.ways)


class TestEpisodeSpec:
    def test_balanced_requires_divisibility(self):
        with pytest.raises(ValidationError, match="divide"):
            EpisodeSpec(ways=5, shots=1, queries_total=74, sampling="balanced")

    def test_field_ranges(self):
        with pytest.raises(ValidationError):
            EpisodeSpec(ways=1, shots=1, queries_total=10)
        with pytest.raises(ValidationError):
            EpisodeSpec(ways=2, shots=0, queries_total=10)
        with pytest.raises(ValidationError):
            EpisodeSpec(ways=2, shots=1, queries_total=10, sampling="stratified")
        with pytest.raises(ValidationError):
            EpisodeSpec(ways=2, shots=1, queries_total=10, pool_per_class=0)


class TestBalancedSampling:
    def test_exact_per_class_counts(self, small_set):
        spec = EpisodeSpec(ways=5, shots=1, queries_total=75, sampling="balanced",)
        # 75 queries over 5 ways needs 16 rows/class; build a wider universe
        fset = generate_synthetic(
            SyntheticConfig(class_count=6, per_class=20, dim=4, seed=2)
        )
        episode = sample_episode(fset, spec, seed=1, run_index=0)
        np.testing.assert_array_equal(per_class_query_counts(episode), [15] * 5)

    def test_counts_exact_over_many_seeds(self, small_set):
        spec = EpisodeSpec(ways=3, shots=2, queries_total=12, sampling="balanced")
        for run in range(50):
            episode = sample_episode(small_set, spec, seed=9, run_index=run)
            np.testing.assert_array_equal(per_class_query_counts(episode), [4, 4, 4])


class TestUniformSampling:
    def test_counts_sum_but_fluctuate(self, small_set):
        spec = EpisodeSpec(ways=5, shots=1, queries_total=75, sampling="uniform")
        fset = generate_synthetic(
            SyntheticConfig(class_count=5, per_class=110, dim=4, seed=3)
        )
        counts = []
        for run in range(1000):
            episode = sample_episode(fset, spec, seed=5, run_index=run)
            got = per_class_query_counts(episode)
            assert got.sum() == 75
            counts.append(got)
        spread = np.var(np.asarray(counts, dtype=np.float64), axis=0)
        assert np.all(spread > 0)  # distinguishes uniform from balanced draws

    def test_explicit_pool_size_caps_pool(self):
        fset = generate_synthetic(
            SyntheticConfig(class_count=4, per_class=12, dim=4, seed=4)
        )
        spec = EpisodeSpec(
            ways=2, shots=1, queries_total=6, sampling="uniform", pool_per_class=3
        )
        episode = sample_episode(fset, spec, seed=6, run_index=0)
        # merged pool is 2 * 3 = 6 rows, so the queries are exactly the pool
        assert episode.query_count == 6
        assert per_class_query_counts(episode).sum() == 6

    def test_insufficient_pool_errors(self):
        fset = generate_synthetic(
            SyntheticConfig(class_count=3, per_class=4, dim=4, seed=5)
        )
        spec = EpisodeSpec(ways=3, shots=1, queries_total=50, sampling="uniform")
        with pytest.raises(ValidationError, match="cannot supply"):
            sample_episode(fset, spec, seed=1, run_index=0)

    def test_exhausted_class_named_in_error(self):
        feats = np.abs(np.random.default_rng(6).normal(size=(7, 3))).astype(np.float32)
        labels = np.array([0, 0, 0, 1, 1, 1, 2])  # class 2 has exactly one row
        fset = FeatureSet(features=feats, labels=labels, class_count=3)
        spec = EpisodeSpec(ways=3, shots=1, queries_total=3, sampling="uniform")
        with pytest.raises(ValidationError, match="class 2"):
            sample_episode(fset, spec, seed=3, run_index=0)

    def test_large_q_concentrates_within_binomial_envelope(self):
        fset = generate_synthetic(
            SyntheticConfig(class_count=5, per_class=210, dim=4, seed=7)
        )
        spec = EpisodeSpec(
            ways=5, shots=1, queries_total=500, sampling="uniform", pool_per_class=200
        )
        expected = 500 / 5
        sigma = np.sqrt(500 * 0.2 * 0.8)
        worst = 0.0
        for run in range(200):
            episode = sample_episode(fset, spec, seed=8, run_index=run)
            worst = max(worst, np.abs(per_class_query_counts(episode) - expected).max())
        assert worst <= 5 * sigma


class TestDeterminism:
    def test_same_key_same_episode(self, small_set):
        spec = EpisodeSpec(ways=4, shots=2, queries_total=20, sampling="uniform")
        a = sample_episode(small_set, spec, seed=11, run_index=3)
        b = sample_episode(small_set, spec, seed=11, run_index=3)
        assert a.fingerprint() == b.fingerprint()

    def test_run_index_independent_of_order(self, small_set):
        spec = EpisodeSpec(ways=4, shots=2, queries_total=20, sampling="uniform")
        forward = [
            sample_episode(small_set, spec, seed=11, run_index=i).fingerprint()
            for i in range(6)
        ]
        backward = [
            sample_episode(small_set, spec, seed=11, run_index=i).fingerprint()
            for i in reversed(range(6))
        ]
        assert forward == backward[::-1]

    def test_distinct_keys_differ(self, small_set):
        spec = EpisodeSpec(ways=4, shots=2, queries_total=20, sampling="uniform")
        prints = {
            sample_episode(small_set, spec, seed=s, run_index=r).fingerprint()
            for s in (1, 2) for r in range(4)
        }
        assert len(prints) == 8

    def test_rng_streams_are_keyed(self):
        a = episode_rng(1, 0).integers(0, 2**31, 8)
        b = episode_rng(1, 1).integers(0, 2**31, 8)
        c = episode_rng(2, 0).integers(0, 2**31, 8)
        assert not np.array_equal(a, b) and not np.array_equal(a, c)


class TestSupportQueryDisjointness:
    def test_no_shared_rows_across_draws(self, small_set):
        # feature rows are distinct in the synthetic universe, so identical
        # vectors across support/query would mean a shared source row
        for run in range(40):
            spec = EpisodeSpec(ways=3, shots=2, queries_total=9, sampling="uniform")
            episode = sample_episode(small_set, spec, seed=13, run_index=run)
            support = {row.tobytes() for row in episode.support_features}
            query = {row.tobytes() for row in episode.query_features}
            assert not (support & query)

    def test_balanced_disjoint_too(self, small_set):
        for run in range(40):
            spec = EpisodeSpec(ways=3, shots=1, queries_total=9, sampling="balanced")
            episode = sample_episode(small_set, spec, seed=14, run_index=run)
            support = {row.tobytes() for row in episode.support_features}
            query = {row.tobytes() for row in episode.query_features}
            assert not (support & query)


class TestImbalancedTwoWay:
    def test_extreme_imbalance_counts(self, small_set):
        fset = generate_synthetic(
            SyntheticConfig(class_count=4, per_class=120, dim=4, seed=8)
        )
        episode = sample_imbalanced_two_way(
            fset, q1=1, total=100, shots=1, seed=15, run_index=0
        )
        np.testing.assert_array_equal(per_class_query_counts(episode), [1, 99])

    def test_half_split_is_balanced(self, small_set):
        fset = generate_synthetic(
            SyntheticConfig(class_count=4, per_class=80, dim=4, seed=9)
        )
        episode = sample_imbalanced_two_way(
            fset, q1=50, total=100, shots=1, seed=16, run_index=0
        )
        np.testing.assert_array_equal(per_class_query_counts(episode), [50, 50])

    def test_bounds(self, small_set):
        with pytest.raises(ValidationError, match="q1"):
            sample_imbalanced_two_way(small_set, q1=0, total=10, shots=1, seed=1, run_index=0)
        with pytest.raises(ValidationError, match="q1"):
            sample_imbalanced_two_way(small_set, q1=10, total=10, shots=1, seed=1, run_index=0)

    def test_insufficient_rows_named(self, small_set):
        with pytest.raises(ValidationError, match="class"):
            sample_imbalanced_two_way(
                small_set, q1=1, total=100, shots=1, seed=2, run_index=0
            )  # classes hold 30 rows; the majority class needs 100

    def test_deterministic(self, small_set):
        a = sample_imbalanced_two_way(small_set, 5, 20, 1, seed=17, run_index=4)
        b = sample_imbalanced_two_way(small_set, 5, 20, 1, seed=17, run_index=4)
        assert a.fingerprint() == b.fingerprint()
