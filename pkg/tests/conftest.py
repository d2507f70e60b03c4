from __future__ import annotations

import pytest

from graphshot import FeatureSet, SyntheticConfig, generate_synthetic


@pytest.fixture(scope="session")
def small_set() -> FeatureSet:
    """5 classes x 30 rows, dim 8: desk-scale universe for episode sampling."""
    return generate_synthetic(
        SyntheticConfig(class_count=5, per_class=30, dim=8, seed=11)
    )


@pytest.fixture(scope="session")
def acceptance_set() -> FeatureSet:
    """The acceptance-scale synthetic universe (20 classes x 600, dim 64).

    center_scale 0.5 puts desk-scale episode accuracy in the same band as
    real backbone features (roughly 0.5-0.85 for 1-shot), where both the
    diffusion benefit and the over-smoothing degradation are visible; at
    larger scales every configuration saturates near 1.0.
    """
    return generate_synthetic(
        SyntheticConfig(
            class_count=20, per_class=600, dim=64, center_scale=0.5,
            noise_sigma=0.3, seed=7,
        )
    )
