import math

import pytest

from levibench.model_core import NoiseBudget, OscillatorParams, SphereParams
from levibench.optics import OpticalTrain

TABLE_MASS_KG = 7.8e-8
TABLE_F0_HZ = 10.58
TABLE_GAMMA_HZ = 7.1e-5
TABLE_TEMP_K = 298.0
TABLE_TEFF_K = 289.0
TABLE_XI_V_M = 1.14e10
TABLE_SQRT_SIMP = 4.70e-9  # m/rtHz


@pytest.fixture(scope="session")
def sphere():
    return SphereParams(radius_m=0.25e-3, refractive_index=1.4, density_kg_m3=1190.0)


@pytest.fixture(scope="session")
def paper_osc(sphere):
    """Published-experiment mode: 10.58 Hz, gamma/2pi = 71 uHz."""
    return OscillatorParams(
        sphere=sphere,
        omega0=2 * math.pi * TABLE_F0_HZ,
        gamma=2 * math.pi * TABLE_GAMMA_HZ,
        temp_env=TABLE_TEMP_K,
    )


@pytest.fixture(scope="session")
def desk_osc(sphere):
    """Same mode with gamma/2pi = 0.1 Hz: thermalizes in seconds."""
    return OscillatorParams(
        sphere=sphere,
        omega0=2 * math.pi * TABLE_F0_HZ,
        gamma=2 * math.pi * 0.1,
        temp_env=TABLE_TEMP_K,
    )


@pytest.fixture(scope="session")
def train(sphere):
    return OpticalTrain(sphere=sphere)


@pytest.fixture(scope="session")
def paper_budget():
    return NoiseBudget(s_xx_imp=TABLE_SQRT_SIMP**2, s_ff_ba=0.0)
