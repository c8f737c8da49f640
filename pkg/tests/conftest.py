import pytest

from microtopo.network import load_network
from microtopo.scenario import fixture_path


@pytest.fixture(scope="session")
def fivebus():
    return load_network(fixture_path("fivebus.net"))


@pytest.fixture(scope="session")
def graph(fivebus):
    return fivebus[0]


@pytest.fixture(scope="session")
def topologies(fivebus):
    return fivebus[1]


@pytest.fixture(scope="session")
def topo_by_id(topologies):
    return {t.id: t for t in topologies}
