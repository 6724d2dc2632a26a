import numpy as np
import pytest

from besfem import fem, walls
from besfem.model import (
    EnvelopePart,
    Layer,
    Material,
    WallConstruction,
    ZoneConfig,
    default_config,
)
from besfem.validation import acceptance_weather
from besfem.zone import build_network


@pytest.fixture
def concrete():
    return Material("concrete", 2.0, 2400.0, 840.0)


@pytest.fixture
def wool():
    return Material("mineral_wool", 0.04, 30.0, 1030.0)


@pytest.fixture
def default_cfg():
    return default_config()


@pytest.fixture
def box_wall(default_cfg):
    """North face of the default box."""
    return next(p for p in default_cfg.zone.envelope if p.id == "north")


@pytest.fixture
def make_part():
    def _make(layers, area=1.0, pid="wall", **kw):
        return EnvelopePart(pid, area, WallConstruction(tuple(Layer(m, d) for m, d in layers)), **kw)
    return _make


@pytest.fixture(scope="session")
def default_network():
    return build_network(default_config().zone)


@pytest.fixture(scope="session")
def month_weather():
    return acceptance_weather(default_config())


@pytest.fixture(scope="session")
def box_system_10():
    cfg = default_config()
    mesh = fem.build_box_mesh(cfg.box, 10)
    return fem.assemble(mesh, fem.MaterialField.for_box(cfg.box), 25.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20230101)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
