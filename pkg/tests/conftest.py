import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mindswarm.synth import compact_spec, generate_with_truth


@pytest.fixture(scope="session")
def mi_session():
    """Compact high-contrast 4-class session: 200 trials, 16 ch, 200 Hz."""
    spec = compact_spec("MI", trials_per_class=50, contrast=4.0, seed=1234)
    rec, truth = generate_with_truth(spec)
    return spec, rec, truth


@pytest.fixture(scope="session")
def vi_session():
    spec = compact_spec("VI", trials_per_class=50, contrast=4.0, seed=77)
    rec, truth = generate_with_truth(spec)
    return spec, rec, truth


@pytest.fixture(scope="session")
def mi_pipeline(mi_session):
    """Pipeline trained on the full compact MI session (window 0-1 s)."""
    from mindswarm import analysis

    _, rec, _ = mi_session
    return analysis.train_pipeline_on_recording(rec, window=(0.0, 1.0))
