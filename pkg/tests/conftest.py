import numpy as np
import pytest
from hypothesis import settings

from vlcsteer.channel import NoiseModel
from vlcsteer.geometry import make_grid

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

AP = np.array([4.0, 4.0, 4.0])
USER_Z = 0.85


@pytest.fixture(scope="session")
def noise():
    return NoiseModel(2.5e-20, 20e6)


@pytest.fixture(scope="session")
def grid():
    return make_grid()


@pytest.fixture(scope="session")
def coarse_grid():
    return make_grid(delta=6.0, gamma_min=1.0, gamma_max=15.0, gamma_step=2.0)


def drop(rng, k, room=8.0):
    xy = rng.uniform(0, room, size=(k, 2))
    return np.column_stack([xy, np.full(k, USER_Z)])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
