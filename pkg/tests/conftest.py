import pytest

from uaviab.antenna import Orientation, horn_pattern
from uaviab.radio import RadioConfig, Transmitter, watts_to_dbm
from uaviab.raytrace import Band
from uaviab.scene import gen_manhattan

F1 = Band("f1", 30e9, 100e6)
F2 = Band("f2", 60e9, 100e6)


@pytest.fixture(scope="session")
def small_scene():
    """Two street axes through the origin, roofs below 30 m."""
    return gen_manhattan(300, 200, 60, 50, 20, 10, 30, seed=3)


@pytest.fixture(scope="session")
def horn():
    return horn_pattern(30.0)


@pytest.fixture(scope="session")
def donor(horn):
    return Transmitter("donor", (0.0, 0.0, 25.0), "donor", F1, watts_to_dbm(10.0), 10.0, horn,
                       Orientation(0.0, 2.0))


@pytest.fixture(scope="session")
def radio():
    return RadioConfig()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
