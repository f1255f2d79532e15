import pytest

from elab.cosmic.synthetic import DetectorSpec, SyntheticSpec, generate_synthetic


@pytest.fixture
def decay_dataset():
    """One detector, enough decays for a stable fit, fixed seed."""
    spec = SyntheticSpec(
        detectors=(DetectorSpec(detector_id="6148", school="School01"),),
        duration_s=900.0,
        trigger_rate_hz=5.0,
        decay_fraction=0.25,
        tau_us=2.2,
        seed=4242,
    )
    datasets, truth = generate_synthetic(spec)
    return datasets[0], truth
