import os

import numpy as np
import pytest
from hypothesis import settings

from fogrl.daphnet import RawTrial
from fogrl.synthetic import SyntheticSpec, generate_synthetic

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def make_trial(annotation, rate=1.0, subject_id=1, trial_id="S01R01", channels=None):
    ann = np.asarray(annotation, dtype=np.int8)
    n = len(ann)
    t_ms = np.round(np.arange(n) * 1000.0 / rate).astype(np.int64)
    if channels is None:
        channels = np.arange(n * 9, dtype=np.float64).reshape(n, 9)
    return RawTrial(subject_id, trial_id, t_ms, channels, ann, rate)


@pytest.fixture
def small_corpus():
    spec = SyntheticSpec(n_subjects=3, episodes_per_subject=4)
    return generate_synthetic(spec, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
