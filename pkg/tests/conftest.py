import numpy as np
import pytest

from tntsim.hamiltonian import PhysicalParams
from tntsim.mcwf import DEFAULT_CHANNELS, NoiseModel
from tntsim.protocols import ensemble_sweep, ideal_sweep

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def tnt_params():
    """Time-averaged twist-and-turn working point: N chi = 2pi x 30 Hz,
    Omega = 2pi x 19 Hz, delta = 0."""
    return PhysicalParams(omega=TWO_PI * 19.0, nchi_fixed=TWO_PI * 30.0)


@pytest.fixture(scope="session")
def oat_params():
    return PhysicalParams(omega=0.0, nchi_fixed=TWO_PI * 30.0)


@pytest.fixture(scope="session")
def ideal_curve(tnt_params):
    """Exact closed-system sweep at N = 500 on a 0.5 ms grid to 40 ms."""
    times = np.arange(1, 81) * 0.5e-3
    return ideal_sweep(tnt_params, 500, times)


@pytest.fixture(scope="session")
def lossy_curve(tnt_params):
    """500-trajectory MCWF sweep with the default loss channels (no echo,
    no detuning noise) on a 2 ms grid to 30 ms.  Shared by the acceptance
    criteria and the qualitative trajectory tests."""
    times = np.arange(2, 31, 2) * 1e-3
    return ensemble_sweep(
        tnt_params,
        500,
        times,
        channels=DEFAULT_CHANNELS,
        noise=NoiseModel(),
        n_traj=500,
        master_seed=20260810,
        cos_method="moments",
    )
