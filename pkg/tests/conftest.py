import numpy as np
import pytest

from ilf import beam, study
from ilf.synthetic import ModalModel, random_stable_model


@pytest.fixture(scope="session")
def beam_system():
    """Default 8-element beam calibrated to the two reference frequencies."""
    return study.build_beam()


@pytest.fixture(scope="session")
def analytical(beam_system):
    return beam.analytical_modes(beam_system)


@pytest.fixture(scope="session")
def step_runs(beam_system):
    return study.step_runs(beam_system)


@pytest.fixture(scope="session")
def direct_frf(step_runs):
    return study.estimate_frf(step_runs, "direct")


@pytest.fixture(scope="session")
def exact_band_frf(beam_system):
    """Noise-free receptance on 400 bins across the analysis band."""
    freqs = np.linspace(*study.DEFAULT_BAND_HZ, 400)
    return beam.exact_frf(beam_system, freqs, study.BEAM_INPUTS)


@pytest.fixture(scope="session")
def exact_wide_frf(beam_system):
    """Noise-free receptance on a log grid that covers all 32 beam modes."""
    freqs = np.geomspace(5.0, 40000.0, 400)
    return beam.exact_frf(beam_system, freqs, study.BEAM_INPUTS)


@pytest.fixture
def order8_model():
    return random_stable_model(8, n_inputs=2, n_outputs=3, seed=11)


@pytest.fixture
def oscillator_model():
    """SISO 10 Hz, 3% damped receptance as a modal model."""
    w0, zeta = 2 * np.pi * 10.0, 0.03
    wd = w0 * np.sqrt(1 - zeta**2)
    return ModalModel(np.array([-zeta * w0 + 1j * wd]), np.ones((1, 1)), np.array([[1 / (2j * wd)]]))
