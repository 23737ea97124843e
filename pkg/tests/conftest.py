import numpy as np
import pytest

from prpsim.config import ScenarioConfig
from prpsim.protocol import NeighborTable
from prpsim.radio import received_power

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def cfg():
    return ScenarioConfig()


def build_table(config, links, now=0.0):
    """NeighborTable where node u heard each v in ``links[u]`` at the given distance (m)."""
    table = NeighborTable(config.node_count, config)
    for u, nbrs in links.items():
        for v, d in nbrs.items():
            rssi = received_power(config.tx_power_dbm, np.array([float(d)]), config.frequency_mhz)
            table.record_hellos(np.array([u]), np.array([v]), rssi, now)
    return table
