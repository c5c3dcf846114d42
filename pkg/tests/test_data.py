import numpy as np
import pytest

from fairgb.data import (
    DatasetSpec, ParseError, SplitPolicy, SyntheticSpec, generate_synthetic, read_dataset,
    split_nodes, standardize_features,
)
from fairgb.graph import Graph, build_group_table


def _write(tmp_path, nodes, edges):
    (tmp_path / "nodes.csv").write_text(nodes)
    (tmp_path / "edges.csv").write_text(edges)
    return DatasetSpec.from_dir("toy", tmp_path, split=SplitPolicy(train_fraction=0.5, valid_fraction=0.25))


NODES = "node_id,f1,f2,label,sensitive\n" + "".join(
    f"{i},{i * 0.5},{(i % 3) - 1},{i % 2},{(i // 2) % 2}\n" for i in range(8))


def test_loader_reads_toy_graph(tmp_path):
    spec = _write(tmp_path, NODES, "src,dst\n0,1\n1,0\n2,3\n4,4\n5,7\n")
    g, stats = read_dataset(spec)
    assert (stats.num_nodes, stats.num_features, stats.self_loops) == (8, 3, 1)
    # reversed pair merged, self-loop counted but not stored
    assert g.num_edges == 3 and stats.num_edges == 4
    assert np.array_equal(g.edge_list(), [[0, 1], [2, 3], [5, 7]])
    assert np.allclose(g.features.mean(axis=0), 0, atol=1e-12)


def test_sensitive_feature_toggle(tmp_path):
    spec = _write(tmp_path, NODES, "src,dst\n0,1\n")
    off = DatasetSpec.from_dir("toy", tmp_path, include_sensitive_in_features=False)
    assert read_dataset(spec)[1].num_features == 3
    assert read_dataset(off)[1].num_features == 2


@pytest.mark.parametrize("nodes,edges,match", [
    (NODES.replace("3,1.5,", "3,abc,"), "src,dst\n0,1\n", r"row 5, column 'f1'"),
    (NODES, "src,dst\n0,9\n", "dangling endpoint 9"),
    (NODES, "src,dst\n0,1\n0,1\n", "row 3: duplicate edge"),
    (NODES.replace("label", "target"), "src,dst\n0,1\n", "missing column 'label'"),
    (NODES + "7,1,1,1,1\n", "src,dst\n0,1\n", "duplicate node id 7"),
])
def test_loader_errors_name_the_location(tmp_path, nodes, edges, match):
    with pytest.raises(ParseError, match=match):
        read_dataset(_write(tmp_path, nodes, edges))


def test_index_files(tmp_path):
    _write(tmp_path, NODES, "src,dst\n0,1\n")
    for name, ids in (("train", [0, 1, 2, 3]), ("valid", [4, 5]), ("test", [6, 7])):
        (tmp_path / f"{name}.idx").write_text("\n".join(map(str, ids)) + "\n")
    g, _ = read_dataset(DatasetSpec.from_dir("toy", tmp_path))
    assert list(g.train) == [0, 1, 2, 3] and list(g.test) == [6, 7]


def test_standardize_examples():
    out = standardize_features(np.array([[1.0], [2.0], [3.0]]))
    assert np.allclose(out[:, 0], [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12)
    assert np.array_equal(standardize_features(np.full((4, 2), 7.0)), np.zeros((4, 2)))
    z = standardize_features(np.random.default_rng(0).standard_normal((50, 3)))
    assert np.allclose(standardize_features(z), z, atol=1e-9)


def test_split_fractions_stratified():
    n = 8
    g = Graph.from_edges(n, [], np.zeros((n, 1)), [0, 0, 0, 0, 1, 1, 1, 1], [0] * n)
    a = split_nodes(g, SplitPolicy(seed=3))
    assert (len(a.train), len(a.valid), len(a.test)) == (4, 2, 2)
    assert sorted(g.labels[a.train]) == [0, 0, 1, 1]
    b = split_nodes(g, SplitPolicy(seed=3))
    assert np.array_equal(a.train, b.train) and np.array_equal(a.test, b.test)
    with pytest.raises(ValueError):
        SplitPolicy(train_fraction=0.8, valid_fraction=0.3)


def test_synthetic_counts_and_determinism():
    spec = SyntheticSpec(train_counts=(10, 3, 2, 5), valid_counts=(1, 1, 1, 1), test_counts=(2, 2, 2, 2))
    g = generate_synthetic(spec)
    h = generate_synthetic(spec)
    assert np.array_equal(g.indices, h.indices) and np.array_equal(g.features, h.features)
    counts = build_group_table(g).counts
    assert [counts[k] for k in ((0, 0), (0, 1), (1, 0), (1, 1))] == [10, 3, 2, 5]
    assert (len(g.train), len(g.valid), len(g.test)) == (20, 4, 8)


def test_synthetic_exact_conditional_rates():
    g = generate_synthetic(SyntheticSpec(train_counts=(200, 50, 50, 200)))
    t = g.train
    y, s = g.labels[t], g.sensitive[t]
    assert np.mean(s[y == 1] == 1) == 0.8 and np.mean(s[y == 0] == 1) == 0.2


def test_synthetic_zero_inter_block_probability():
    g = generate_synthetic(SyntheticSpec(train_counts=(30, 30, 30, 30), p_intra=0.2, p_inter=0.0))
    block = 2 * g.labels + g.sensitive
    e = g.edge_list()
    assert len(e) > 0 and np.all(block[e[:, 0]] == block[e[:, 1]])


def test_synthetic_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(train_counts=(1, 2, 3))
    with pytest.raises(ValueError):
        SyntheticSpec(p_intra=1.5)
