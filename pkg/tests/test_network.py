import io
import logging

import networkx as nx
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings as hsettings, strategies as st
from pydantic import ValidationError

from app.core.exceptions import ConfigError, NetworkFormatError
from app.models.models import Network
from app.services.network_service import network_service
from conftest import build


def test_read_path_edge_list():
    network, labels = network_service.read_edge_list("0 1\n1 2")
    assert network.node_count == 3
    assert network.edges().tolist() == [[0, 1], [1, 2]]
    assert network.degrees.tolist() == [1, 2, 1]
    assert labels.tolist() == [0, 1, 2]


def test_read_collapses_duplicates_and_drops_self_loops(caplog):
    caplog.set_level(logging.WARNING)
    network, labels = network_service.read_edge_list("# c\n5 7\n7 5\n5 5")
    assert network.node_count == 2
    assert network.edge_count == 1
    assert labels.tolist() == [5, 7]
    assert "self-loop" in caplog.text


def test_parse_error_reports_line_number():
    with pytest.raises(NetworkFormatError) as info:
        network_service.read_edge_list("0 1\n1 x")
    assert info.value.line == 2
    assert "line 2" in str(info.value)


@pytest.mark.parametrize("text", ["0 1 2", "-1 3", ""])
def test_malformed_input_rejected(text):
    with pytest.raises(NetworkFormatError):
        network_service.read_edge_list(text)


def test_load_file_missing_path(tmp_path):
    with pytest.raises(ConfigError):
        network_service.load_file(tmp_path / "missing.txt")


def test_network_rejects_asymmetric_adjacency():
    adjacency = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValidationError):
        Network(node_count=2, adjacency=adjacency)


def test_giant_component_picks_triangle():
    network = build(7, [(0, 1), (2, 3), (4, 5), (5, 6), (6, 4)])
    giant, mapping = network_service.giant_component(network)
    assert giant.node_count == 3
    assert giant.edge_count == 3
    assert mapping == {4: 0, 5: 1, 6: 2}


def test_giant_component_of_connected_graph_is_identity(path3):
    giant, mapping = network_service.giant_component(path3)
    assert giant.edges().tolist() == path3.edges().tolist()
    assert mapping == {0: 0, 1: 1, 2: 2}


def test_giant_component_of_single_node(single_node):
    giant, _ = network_service.giant_component(single_node)
    assert giant.node_count == 1


def test_giant_component_ties_go_to_smallest_id():
    network = build(4, [(2, 3), (0, 1)])
    _, mapping = network_service.giant_component(network)
    assert sorted(mapping) == [0, 1]


def test_bfs_sample_on_path():
    path = build(4, [(0, 1), (1, 2), (2, 3)])
    sample = network_service.bfs_sample(path, start=0, target=2)
    assert sample.node_count == 2
    assert sample.edges().tolist() == [[0, 1]]


def test_bfs_sample_on_star_uses_id_order(star6):
    nodes = network_service.bfs_nodes(star6, start=0, target=3)
    assert nodes.tolist() == [0, 1, 2]
    sample = network_service.bfs_sample(star6, start=0, target=3)
    assert sample.edges().tolist() == [[0, 1], [0, 2]]


def test_bfs_sample_rejects_small_component():
    network = build(4, [(0, 1), (2, 3)])
    with pytest.raises(ConfigError):
        network_service.bfs_sample(network, start=0, target=3)


def test_bfs_sample_full_component(path3):
    sample = network_service.bfs_sample(path3, start=1, target=3)
    assert sample.edges().tolist() == path3.edges().tolist()


def test_relabel_map_lists_original_ids():
    _, labels = network_service.read_edge_list("10 20\n20 30")
    buffer = io.StringIO()
    network_service.write_relabel_map(labels, buffer)
    assert buffer.getvalue() == "old,new\n10,0\n20,1\n30,2\n"


def test_round_trip_keeps_isolated_nodes():
    network = build(5, [(0, 3), (3, 4)])
    buffer = io.StringIO()
    network_service.save_edge_list(network, buffer)
    reloaded = network_service.load_edge_list(buffer.getvalue())
    assert reloaded.node_count == 5
    assert reloaded.edges().tolist() == network.edges().tolist()


@hsettings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=1, max_value=12).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=30),
        )
    )
)
def test_save_then_load_round_trips(case):
    node_count, edges = case
    network = build(node_count, edges)
    buffer = io.StringIO()
    network_service.save_edge_list(network, buffer)
    reloaded = network_service.load_edge_list(buffer.getvalue())
    assert reloaded.node_count == network.node_count
    assert (reloaded.adjacency != network.adjacency).nnz == 0


@hsettings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 15), st.integers(0, 15)), min_size=1, max_size=40))
def test_loaded_networks_are_canonical(edges):
    text = "\n".join(f"{u} {v}" for u, v in edges)
    network, labels = network_service.read_edge_list(text)
    a = network.adjacency
    assert (a != a.T).nnz == 0
    assert not a.diagonal().any()
    assert len(set(labels.tolist())) == network.node_count

    graph = nx.Graph()
    graph.add_nodes_from(labels.tolist())
    graph.add_edges_from((u, v) for u, v in edges if u != v)
    assert network.edge_count == graph.number_of_edges()


@hsettings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=1, max_value=15).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=25),
        )
    )
)
def test_giant_component_is_connected_and_largest(case):
    node_count, edges = case
    network = build(node_count, edges)
    giant, mapping = network_service.giant_component(network)
    assert network_service.is_connected(giant)
    assert len(mapping) == giant.node_count

    graph = nx.Graph()
    graph.add_nodes_from(range(node_count))
    graph.add_edges_from(edges)
    assert giant.node_count == max(len(c) for c in nx.connected_components(graph))
