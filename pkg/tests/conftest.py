import numpy as np
import pytest

from eegstates import (
    FeatureSet,
    SpectrogramConfig,
    cap_40min,
    extract_features,
    generate_synthetic,
)


@pytest.fixture(scope="session")
def small_dataset():
    """3 subjects x 4 records x 60 s; records 1-2 are habituation."""
    records, manifest = generate_synthetic(3, 4, 60, seed=11)
    return records, manifest


@pytest.fixture(scope="session")
def small_features(small_dataset):
    """Eligible frames of the small dataset at window 4 s, hop 64."""
    records, _ = small_dataset
    config = SpectrogramConfig(4, 64)
    eligible = [r for r in records if r.record_index > 2]
    return FeatureSet.concat(
        [extract_features(cap_40min(r), config) for r in eligible]
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(2024)
