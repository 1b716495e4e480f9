import math

import pytest

from nspr.nse import SolverConfig, run


@pytest.fixture(scope="session")
def tg_short():
    """Taylor-Green at nu = 1, n = 32 to t = 0.1, every step saved."""
    return run(SolverConfig(n=32, dt=1e-3, t_end=0.1))


@pytest.fixture(scope="session")
def tg_long():
    """Taylor-Green to t = 1.2, every 10th step saved (room for unit cylinders)."""
    return run(SolverConfig(n=32, dt=1e-3, t_end=1.2, save_every=10))


@pytest.fixture(scope="session")
def random_runs():
    return [run(SolverConfig(n=32, dt=5e-3, t_end=1.2, init="random_divfree", seed=s,
                             save_every=4)) for s in (1, 2)]


@pytest.fixture(scope="session")
def box_center():
    return (math.pi, math.pi, math.pi)
