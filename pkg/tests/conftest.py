import pytest
from hypothesis import settings

from hamlearn.dataset import EnsembleSpec, generate_dataset, sample_ensemble
from hamlearn.physics import ControlFlux, DeviceParams, FrameConfig, QubitConstants
from hamlearn.surrogate import TrainConfig, init_model, train

settings.register_profile("suite", max_examples=25, deadline=None)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def q():
    return QubitConstants()


@pytest.fixture(scope="session")
def frame():
    return FrameConfig()


@pytest.fixture(scope="session")
def midpoint_eta():
    return DeviceParams(25.5, 0.30, 0.020, 0.020, 0.003)


@pytest.fixture(scope="session")
def decoupled_eta():
    return DeviceParams(25.5, 0.30, 0.0, 0.0, 0.0)


@pytest.fixture
def mid_flux():
    return ControlFlux(0.25, 0.25, 0.1)


def random_device(rng) -> DeviceParams:
    spec = EnsembleSpec()
    b = spec.eta_bounds()
    return DeviceParams.from_array(rng.uniform(b[:, 0], b[:, 1]))


def random_flux(rng) -> ControlFlux:
    spec = EnsembleSpec()
    b = spec.flux_bounds()
    return ControlFlux.from_array(rng.uniform(b[:, 0], b[:, 1]))


@pytest.fixture(scope="session")
def small_dataset(q, frame):
    """300 records (6 devices x 50 pulses) for tests that need real data."""
    spec = EnsembleSpec(seed=11)
    devices = sample_ensemble(spec, 6)
    return generate_dataset(q, devices, 50, frame, 1.0, spec)


@pytest.fixture(scope="session")
def small_model(small_dataset):
    """A briefly trained surrogate; accurate enough for smoke checks."""
    cfg = TrainConfig(max_epochs=2500, seed=1)
    model, _ = train(init_model(1), small_dataset.usable_records(), cfg)
    return model
