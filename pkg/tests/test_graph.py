import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphtest.graph import (CommunityPartition, Graph, GraphFormatError, GraphPopulation,
                             PopulationAdjacency, TestOutcome, load_edge_list, load_population,
                             save_edge_list, save_population, symmetric_difference_count)


def write(tmp_path, text, name="g.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_path_graph(tmp_path):
    g = load_edge_list(write(tmp_path, "0 1\n1 2"), 3)
    assert g.n == 3 and g.num_edges == 2
    assert g.edges.tolist() == [[0, 1], [1, 2]]


def test_load_dedup_and_self_loop(tmp_path):
    with pytest.warns(UserWarning, match="1 self-loop"):
        g, loops = load_edge_list(write(tmp_path, "0 1\n1 0\n0 0"), 2, return_loops=True)
    assert loops == 1
    assert g.edges.tolist() == [[0, 1]]


def test_load_range_error(tmp_path):
    with pytest.raises(IndexError):
        load_edge_list(write(tmp_path, "0 5"), 3)


def test_load_parse_error_names_line(tmp_path):
    with pytest.raises(GraphFormatError, match=":2:"):
        load_edge_list(write(tmp_path, "# header\n0 x\n"), 3)


def test_load_ignores_comments_and_blank_lines(tmp_path):
    g = load_edge_list(write(tmp_path, "# comment\n\n2 0\n"), 3)
    assert g.edges.tolist() == [[0, 2]]


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), max_size=30), st.randoms())
def test_load_invariant_under_permutation_and_orientation(pairs, rnd):
    import tempfile
    from pathlib import Path

    flipped = [(v, u) if rnd.random() < 0.5 else (u, v) for u, v in pairs]
    rnd.shuffle(flipped)
    with tempfile.TemporaryDirectory() as d, warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = Path(d) / "a.txt"
        b = Path(d) / "b.txt"
        a.write_text("".join(f"{u} {v}\n" for u, v in pairs))
        b.write_text("".join(f"{u} {v}\n" for u, v in flipped))
        assert load_edge_list(a, 7) == load_edge_list(b, 7)


def test_edge_list_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    a = np.triu(rng.random((12, 12)) < 0.3, 1)
    g = Graph(a | a.T)
    save_edge_list(g, tmp_path / "g.txt")
    assert load_edge_list(tmp_path / "g.txt", 12) == g


def test_population_manifest_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    graphs = []
    for _ in range(3):
        a = np.triu(rng.random((6, 6)) < 0.5, 1)
        graphs.append(Graph(a | a.T))
    save_population(GraphPopulation(graphs), tmp_path / "pop.json")
    spec = json.loads((tmp_path / "pop.json").read_text())
    assert spec["n"] == 6 and len(spec["graphs"]) == 3
    pop = load_population(tmp_path / "pop.json")
    assert list(pop) == graphs


def test_bad_manifest(tmp_path):
    write(tmp_path, '{"graphs": []}', "bad.json")
    with pytest.raises(GraphFormatError):
        load_population(tmp_path / "bad.json")


@pytest.mark.parametrize("adj, msg", [
    ([[0, 1], [0, 0]], "symmetric"),
    ([[1, 0], [0, 0]], "diagonal"),
    ([[0, 2], [2, 0]], "0 or 1"),
])
def test_graph_rejects_invalid(adj, msg):
    with pytest.raises(ValueError, match=msg):
        Graph(adj)


def test_graph_is_immutable():
    g = Graph.complete(3)
    with pytest.raises(ValueError):
        g.adj[0, 1] = 0


def test_population_invariants():
    with pytest.raises(ValueError):
        GraphPopulation([])
    with pytest.raises(ValueError):
        GraphPopulation([Graph.empty(3), Graph.empty(4)])
    assert GraphPopulation([Graph.empty(3)] * 2).m == 2


def test_population_adjacency_validation():
    PopulationAdjacency([[0, 0.3], [0.3, 0]])
    for bad in ([[0, 1.2], [1.2, 0]], [[0.1, 0], [0, 0]], [[0, 0.2], [0.3, 0]]):
        with pytest.raises(ValueError):
            PopulationAdjacency(bad)


def test_partition_rejects_empty_block():
    with pytest.raises(ValueError, match="empty"):
        CommunityPartition([0, 0, 2])
    part = CommunityPartition.compact([5, 9, 5])
    assert part.labels.tolist() == [0, 1, 0] and part.r == 2


def test_symmetric_difference_examples():
    tri = Graph.complete(3)
    assert symmetric_difference_count(tri, tri) == 0
    assert symmetric_difference_count(Graph.empty(3), tri) == 3
    with pytest.raises(ValueError):
        symmetric_difference_count(Graph.empty(3), Graph.empty(4))


@pytest.mark.parametrize("seed", range(10))
def test_symmetric_difference_matches_pair_scan(seed):
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(2):
        a = np.triu(rng.random((6, 6)) < 0.5, 1)
        mats.append((a | a.T).astype(int))
    expected = sum(mats[0][i][j] != mats[1][i][j] for i in range(6) for j in range(i + 1, 6))
    assert symmetric_difference_count(Graph(mats[0]), Graph(mats[1])) == expected


def test_outcome_contract():
    o = TestOutcome("x", float("inf"), 0.0, 0.05, {"k": np.int64(3)})
    assert o.reject
    d = json.loads(o.to_json())
    assert d["statistic"] == "inf" and d["details"]["k"] == 3 and d["neglog_p"] == "inf"
    assert not TestOutcome("x", 0.0, 0.05000001, 0.05).reject
    assert TestOutcome("x", 0.0, 0.05, 0.05).reject
    with pytest.raises(ValueError):
        TestOutcome("x", 0.0, 1.5, 0.05)
