import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liamne.graph import (
    GraphFormatError,
    MultiplexNetwork,
    compute_stats,
    imbalance_ratio,
    layer_density,
    load_multiplex,
    save_multiplex,
)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_simple(tmp_path):
    p = write(tmp_path, "e.txt", "0 0 1\n0 1 2\n1 0 2\n")
    net = load_multiplex(p)
    assert net.num_nodes == 3
    assert net.num_layers == 2
    assert net.edge_count(0) == 2
    assert net.edge_count(1) == 1


def test_load_symmetric_pair_collapsed(tmp_path):
    p = write(tmp_path, "e.txt", "0 1 2\n0 2 1\n1 0 1\n")
    net = load_multiplex(p)
    assert net.edge_set(0) == {(1, 2)}


def test_load_out_of_range_with_header(tmp_path):
    p = write(tmp_path, "e.txt", "nodes 10 layers 2\n0 1 2\n1 3 99\n")
    with pytest.raises(GraphFormatError, match="endpoint out of range"):
        load_multiplex(p)


def test_load_malformed_line_reports_line_number(tmp_path):
    p = write(tmp_path, "e.txt", "# comment\n0 1 2\n0 1\n")
    with pytest.raises(GraphFormatError, match="line 3"):
        load_multiplex(p)


def test_load_comments_header_and_isolated_nodes(tmp_path):
    p = write(tmp_path, "e.txt", "# hi\nnodes 6 layers 3\n0 1 2\n2 4 3\n")
    net = load_multiplex(p)
    assert net.num_nodes == 6
    assert net.num_layers == 3
    assert net.edge_count(1) == 0
    assert net.neighbors(5, 0) == []


def test_self_loops_dropped(tmp_path, caplog):
    p = write(tmp_path, "e.txt", "0 1 1\n0 1 2\n1 0 2\n")
    net = load_multiplex(p)
    assert net.edge_set(0) == {(1, 2)}
    assert "self-loops" in caplog.text


def test_attribute_row_mismatch(tmp_path):
    e = write(tmp_path, "e.txt", "0 0 1\n1 1 2\n")
    a = write(tmp_path, "a.txt", "0 1.0 2.0\n1 0.5 0.5\n")
    with pytest.raises(GraphFormatError, match="attribute row count mismatch"):
        load_multiplex(e, attr_file=a)


def test_attributes_and_labels(tmp_path):
    e = write(tmp_path, "e.txt", "0 0 1\n1 1 2\n")
    a = write(tmp_path, "a.txt", "2 3 4\n0 1 2\n1 -1 0.5\n")
    lab = write(tmp_path, "l.txt", "0 1\n1 0\n2 1\n")
    net = load_multiplex(e, attr_file=a, label_file=lab)
    np.testing.assert_array_equal(net.attributes, [[1, 2], [-1, 0.5], [3, 4]])
    assert net.labels == {0: 1, 1: 0, 2: 1}


def test_string_ids(tmp_path):
    e = write(tmp_path, "e.txt", "0 alice bob\n1 bob carol\n")
    net = load_multiplex(e, string_ids=True)
    assert net.node_names == ("alice", "bob", "carol")
    assert net.edge_set(1) == {(1, 2)}


def test_requires_two_layers():
    with pytest.raises(GraphFormatError):
        MultiplexNetwork(3, (np.array([[0, 1]]),))


def test_network_is_read_only():
    net = MultiplexNetwork(3, ([[0, 1]], [[1, 2]]))
    with pytest.raises(ValueError):
        net.layers[0][0, 0] = 2


def test_neighbors():
    net = MultiplexNetwork(5, ([[1, 2], [1, 3]], [[0, 4]]))
    assert net.neighbors(1, 0) == [2, 3]
    assert net.neighbors(4, 0) == []
    assert net.neighbors(2, 0) == [1]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), max_size=40), st.integers(0, 1000))
def test_neighbor_symmetry_and_roundtrip(tmp_path_factory, edges, seed):
    rng = np.random.default_rng(seed)
    other = rng.integers(0, 12, size=(10, 2))
    net = MultiplexNetwork(12, (np.array(edges, dtype=np.int64).reshape(-1, 2), other))
    for l in range(2):
        for i in range(12):
            for j in net.neighbors(i, l):
                assert i in net.neighbors(j, l)
    path = tmp_path_factory.mktemp("rt") / "net.txt"
    save_multiplex(net, path)
    assert load_multiplex(path).same_edges(net)


def test_save_load_labels_attributes(tmp_path):
    net = MultiplexNetwork(
        3, ([[0, 1]], [[1, 2]]), attributes=np.array([[0.1], [1 / 3], [2.0]]), labels={0: 0, 1: 1, 2: 1}
    )
    save_multiplex(net, tmp_path / "e", tmp_path / "l", tmp_path / "a")
    back = load_multiplex(tmp_path / "e", tmp_path / "a", tmp_path / "l")
    assert back.same_edges(net)
    assert back.labels == net.labels
    np.testing.assert_array_equal(back.attributes, net.attributes)


# Published dataset rows: (|V|, |E_max|, |E_min| = |E_t|, printed mu, printed density x 1e-5)
TABLE1 = {
    "FFTWYT": (6407, 42327, 614, 4.23, 1.49),
    "Sacch-Pomb": (4092, 34192, 240, 4.95, 1.43),
    "Sacch-Cere": (6570, 109045, 1426, 4.33, 3.30),
    "IMDB": (3550, 66428, 13788, 1.57, 109),
    "IMDB*": (3550, 50484, 811, 4.13, 6.43),
    "DBLP": (7907, 144783, 90145, 0.47, 144),
    "DBLP*": (7907, 109428, 2039, 3.98, 3.26),
}


@pytest.mark.parametrize("name", sorted(TABLE1))
def test_dataset_row_formulas(name):
    n, e_max, e_min, mu, dens = TABLE1[name]
    assert imbalance_ratio(e_max, e_min) == pytest.approx(mu, abs=0.01)
    assert layer_density(e_min, n) * 1e5 == pytest.approx(dens, rel=0.02)


def test_natural_log_not_base10():
    assert math.log10(42327 / 614) == pytest.approx(1.84, abs=0.01)
    assert imbalance_ratio(42327, 614) != pytest.approx(1.84, abs=0.1)


def test_compute_stats_equal_layers():
    rng = np.random.default_rng(0)
    layers = []
    for _ in range(2):
        keys = rng.choice(45, size=10, replace=False)
        iu = np.triu_indices(10, 1)
        layers.append(np.column_stack([iu[0][keys], iu[1][keys]]))
    st_ = compute_stats(MultiplexNetwork(10, tuple(layers)), 0)
    assert st_.imbalance_ratio == 0.0
    assert st_.edges_per_layer == (10, 10)


def test_compute_stats_fields():
    net = MultiplexNetwork(4, ([[0, 1]], [[0, 1], [1, 2], [2, 3]], [[0, 2], [1, 3]]))
    s = compute_stats(net, 0)
    assert s.densest == 1 and s.sparsest == 0
    assert s.imbalance_ratio == pytest.approx(math.log(3))
    assert s.target_density == pytest.approx(1 / 12)
    assert 0 < s.target_density <= 1


def test_compute_stats_empty_layer():
    net = MultiplexNetwork(4, ([[0, 1]], []))
    with pytest.raises(ValueError, match="imbalance ratio undefined"):
        compute_stats(net, 0)
