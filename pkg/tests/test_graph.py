from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairgb.graph import (
    Graph, SchemaError, build_group_table, degree_distribution, neighbor_distribution,
)

from conftest import path_graph, random_graph


def _graph_with_groups(ys, ss, train):
    n = len(ys)
    return Graph.from_edges(n, [], np.zeros((n, 1)), ys, ss, train=train)


def test_group_counts():
    g = _graph_with_groups([0, 0, 1, 1, 1], [0, 0, 0, 1, 1], train=[0, 1, 2, 3])
    assert build_group_table(g).counts == {(0, 0): 2, (1, 0): 1, (1, 1): 1}


def test_group_table_empty_train():
    g = _graph_with_groups([0, 1], [0, 1], train=[])
    with pytest.raises(SchemaError, match="empty train set"):
        build_group_table(g)


def test_group_table_single_group():
    g = _graph_with_groups([1] * 5, [1] * 5, train=range(5))
    counts = build_group_table(g).counts
    assert counts == {(1, 1): 5}
    assert counts.get((0, 0), 0) == 0


def test_train_node_without_label_rejected():
    with pytest.raises(SchemaError):
        _graph_with_groups([0, -1], [0, 0], train=[0, 1])


def test_neighbor_distribution_cases():
    g = Graph.from_edges(9, [(0, 1), (0, 2), (3, 7)], np.zeros((9, 1)), np.zeros(9), np.zeros(9))
    p = neighbor_distribution(g, 0)
    assert p.as_dict() == {1: 0.5, 2: 0.5}
    assert neighbor_distribution(g, 3).as_dict() == {7: 1.0}
    assert len(neighbor_distribution(g, 8)) == 0


def test_degree_distribution_examples():
    assert sorted(degree_distribution(path_graph(3)).degrees) == [1, 1, 2]
    empty = Graph.from_edges(3, [], np.zeros((3, 1)), np.zeros(3), np.zeros(3))
    assert list(degree_distribution(empty).degrees) == [0, 0, 0]
    k3 = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)], np.zeros((3, 1)), np.zeros(3), np.zeros(3))
    assert list(degree_distribution(k3).degrees) == [2, 2, 2]
    assert degree_distribution(k3).degrees.sum() == 2 * k3.num_edges


def test_symmetric_storage_without_self_loops():
    g = Graph.from_edges(3, [(0, 1), (1, 0), (2, 2)], np.zeros((3, 1)), np.zeros(3), np.zeros(3))
    assert g.num_edges == 1
    assert list(g.neighbors(0)) == [1] and list(g.neighbors(1)) == [0]
    assert len(g.neighbors(2)) == 0


def test_invalid_structures_rejected():
    x, z = np.zeros((2, 1)), np.zeros(2)
    with pytest.raises(SchemaError, match="symmetric"):
        Graph(2, np.array([0, 1, 1]), np.array([1]), x, z, z)
    with pytest.raises(SchemaError, match="overlap"):
        Graph.from_edges(2, [], x, z, z, train=[0], test=[0])
    with pytest.raises(SchemaError, match="non-finite"):
        Graph.from_edges(2, [], np.array([[np.nan], [0.0]]), z, z)
    with pytest.raises(SchemaError, match="rows"):
        Graph.from_edges(2, [], np.zeros((3, 1)), z, z)


def test_graph_is_immutable(small_graph):
    with pytest.raises(ValueError):
        small_graph.features[0, 0] = 1.0
    with pytest.raises(AttributeError):
        small_graph.num_nodes = 3


edge_lists = st.integers(2, 12).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=40))
)


@settings(max_examples=100, deadline=None)
@given(edge_lists)
def test_edge_list_round_trip(data):
    n, edges = data
    g = Graph.from_edges(n, edges, np.zeros((n, 1)), np.zeros(n), np.zeros(n))
    once = g.edge_list()
    again = Graph.from_edges(n, once, g.features, g.labels, g.sensitive).edge_list()
    assert np.array_equal(once, again)
    expected = sorted({(min(a, b), max(a, b)) for a, b in edges if a != b})
    assert [tuple(e) for e in once] == expected


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 15), st.floats(0.05, 0.9), st.integers(0, 1000))
def test_neighbor_probs_are_inverse_degree(n, p, seed):
    g = random_graph(n=n, p=p, seed=seed)
    for v in range(n):
        dist = neighbor_distribution(g, v)
        if g.degrees[v] == 0:
            assert len(dist) == 0
            continue
        assert len(np.unique(dist.support)) == len(dist.support)
        assert all(Fraction(q) == Fraction(1, int(g.degrees[v])) or abs(q - 1 / g.degrees[v]) < 1e-12 for q in dist.probs)
        assert abs(dist.probs.sum() - 1.0) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(0, 1000))
def test_group_table_partitions_train(n, seed):
    rng = np.random.default_rng(seed)
    train = rng.permutation(n)[: rng.integers(1, n + 1)]
    g = _graph_with_groups(rng.integers(2, size=n), rng.integers(2, size=n), train)
    table = build_group_table(g)
    members = np.concatenate(list(table.groups.values()))
    assert sorted(members) == sorted(train)
    assert len(members) == len(set(members.tolist()))
    assert sum(table.counts.values()) == len(train)
