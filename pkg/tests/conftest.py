import pytest

from cityroad.dispersion import compute_c_star
from cityroad.lattice_sim import InitialData, SimulationConfig, simulate
from cityroad.model import Parameters, logistic


@pytest.fixture(scope="session")
def params_unit():
    return Parameters(1.0, 1.0, 1.0, nonlinearity=logistic(1.0))


@pytest.fixture(scope="session")
def c_star_unit(params_unit):
    return compute_c_star(params_unit)


@pytest.fixture(scope="session")
def left_block_run(params_unit):
    """Long left-block experiment shared by the front-speed and long-time tests."""
    cfg = SimulationConfig(T=80.0, dt=1e-3, m=32)
    return simulate(InitialData.left_block(), cfg, params_unit)
