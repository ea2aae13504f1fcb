import pytest

from subtraction import DetectorModel, ExperimentParams
from witness import WitnessConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale sweeps (deselect with -m 'not slow')")


@pytest.fixture
def typical_params():
    """V0 = -4.67 dB, r1 = 0.1771, r2 = 0.08, s' = 0.8, eta_HD = 0.85"""
    return ExperimentParams.typical()


@pytest.fixture
def lossless_params(typical_params):
    """Typical squeezing and impurity with perfect mode purity and homodyne efficiency"""
    return typical_params.replace(mode_purity=1.0, eta_hd=1.0)


@pytest.fixture
def dark_count_detector():
    """On-off detector with 1e-4 dark counts and 5% efficiency"""
    return DetectorModel.for_model("imnpnrd", pdc=1e-4, eta=0.05, name="test-apd")


@pytest.fixture
def coarse_witness():
    return WitnessConfig.from_points(a_points=41, s_points=21)
