import numpy as np
import pytest

from app.models.models import Grouping, QuadraticCost, TimeGrid
from app.services.network_service import network_service


def build(node_count, edges):
    return network_service.from_edges(node_count, edges)


def single_group(node_count):
    return Grouping(group_of=np.zeros(node_count, dtype=np.int64), M=1)


def singletons(node_count):
    return Grouping(group_of=np.arange(node_count), M=node_count)


def random_graph(node_count, edge_prob, seed):
    """Erdos-Renyi graph plus a spanning path so it is connected."""
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((node_count, node_count)) < edge_prob, k=1)
    edges = list(zip(*np.nonzero(upper)))
    edges += [(j, j + 1) for j in range(node_count - 1)]
    return build(node_count, edges)


@pytest.fixture
def single_node():
    return build(1, [])


@pytest.fixture
def k2():
    return build(2, [(0, 1)])


@pytest.fixture
def path3():
    return build(3, [(0, 1), (1, 2)])


@pytest.fixture
def k4():
    return build(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])


@pytest.fixture
def cycle4():
    return build(4, [(0, 1), (1, 2), (2, 3), (3, 0)])


@pytest.fixture
def star6():
    return build(6, [(0, leaf) for leaf in range(1, 6)])


@pytest.fixture
def grid1000():
    return TimeGrid(T=1.0, K=1000)


@pytest.fixture
def grid200():
    return TimeGrid(T=1.0, K=200)


@pytest.fixture
def unit_cost():
    return QuadraticCost(b=1.0, p=[1.0])
