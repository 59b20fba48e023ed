import numpy as np
import pytest

from lobvol.sim import default_qr_params
from lobvol.surrogate import bachelier_log_grid

SIGMA2 = 1e-8          # per-second efficient variance of the reference surrogate
OMEGA = 5e-5           # observation-noise standard deviation
N_DAY = 23400          # one-second returns in a 6.5-hour session


@pytest.fixture(scope="session")
def qr_default():
    return default_qr_params()


@pytest.fixture(scope="session")
def clean_grid():
    return bachelier_log_grid(SIGMA2, N_DAY, mesh=1.0, seed=42)


@pytest.fixture(scope="session")
def noisy_grid():
    return bachelier_log_grid(SIGMA2, N_DAY, mesh=1.0, noise_std=OMEGA, seed=42)


@pytest.fixture(scope="session")
def clean_grids():
    return [bachelier_log_grid(SIGMA2, 7200, mesh=1.0, seed=300 + i)
            for i in range(60)]


@pytest.fixture(scope="session")
def noisy_grids():
    return [bachelier_log_grid(SIGMA2, 7200, mesh=1.0, noise_std=OMEGA,
                               seed=300 + i) for i in range(60)]
