import json
import re
import warnings

import numpy as np
import pytest

from cliquebma.cliquemodel import CliquePartition, ScoredModel, enumerate_all_partitions, mle_exists
from cliquebma.contingency import SparseTable, ingest_matrix, marginalize, two_way_positive
from cliquebma.exceptions import EmptyModelSpaceWarning, LabelMismatchError, PreprocessError
from cliquebma.graphio import (
    Graph,
    bag_from_json,
    bma_graph,
    connectivity_graph,
    degree_report,
    edges_csv,
    existence_csv,
    export_dot,
    export_json,
    graph_diff,
    graph_from_json,
    partition_to_graph,
    prune_isolated,
    retained_from_json,
)
from cliquebma.posterior import Edge, existence_probabilities, occams_window
from cliquebma.search import ModelBag

from conftest import random_rows

DOT_EDGE = re.compile(r'^\s*"((?:[^"\\]|\\.)*)"\s*--\s*"((?:[^"\\]|\\.)*)"\s*(\[[^\]]*\])?;$')
DOT_NODE = re.compile(r'^\s*"((?:[^"\\]|\\.)*)";$')


def parse_dot(text):
    """Minimal parser for the undirected subset of DOT we emit."""
    lines = text.strip().splitlines()
    assert re.match(r'^graph "[^"]*" \{$', lines[0]) and lines[-1] == "}"
    nodes, edges = [], {}
    for line in lines[1:-1]:
        if m := DOT_EDGE.match(line):
            colour = re.search(r"color=(\w+)", m.group(3) or "")
            edges[tuple(sorted((m.group(1), m.group(2))))] = colour.group(1) if colour else None
        elif m := DOT_NODE.match(line):
            nodes.append(m.group(1))
        else:
            raise AssertionError(f"unparseable DOT line {line!r}")
    return nodes, edges


class TestConnectivity:
    def test_t1(self, t1):
        assert connectivity_graph(t1).edge_set() == {("X1", "X2")}

    def test_missing_cell(self):
        table = SparseTable.from_cells({"00": 5, "01": 3, "10": 2})
        assert connectivity_graph(table).edge_set() == set()

    def test_triangle(self):
        table = SparseTable.from_cells({f"{i:03b}": i + 1 for i in range(8)})
        assert len(connectivity_graph(table).edges) == 3

    def test_constant_column(self):
        with pytest.raises(PreprocessError):
            connectivity_graph(SparseTable.from_cells({"01": 3, "00": 2}))

    def test_matches_pairwise_marginals(self):
        rng = np.random.default_rng(0)
        rows = (rng.random((60, 9)) < 0.15).astype(int)
        rows[0] = 1
        rows[1] = 0
        table = ingest_matrix(rows)
        graph = connectivity_graph(table)
        names = table.names
        for a in range(9):
            for b in range(a + 1, 9):
                assert ((names[a], names[b]) in graph.edges) == two_way_positive(table, a, b)

    def test_superset_of_valid_model_graphs(self):
        rng = np.random.default_rng(7)
        table = ingest_matrix(random_rows(rng, 60, 5, dependence=0.5))
        conn = connectivity_graph(table).edge_set()
        for m in enumerate_all_partitions(5):
            if mle_exists(table, m):
                assert partition_to_graph(m, table.names).edge_set() <= conn


class TestPrune:
    def _with_isolated(self, t1):
        # third variable is 1 in a single observation only
        cells = {"000": 4, "010": 3, "100": 1, "110": 1, "001": 1}
        return SparseTable.from_cells(cells)

    def test_collapse_isolated(self, t1):
        table = self._with_isolated(t1)
        graph = connectivity_graph(table)
        reduced, dropped = prune_isolated(table, graph)
        assert dropped == ("X3",)
        assert reduced.as_dict() == t1.as_dict()
        assert reduced.total == table.total

    def test_identity(self, t1):
        reduced, dropped = prune_isolated(t1, connectivity_graph(t1))
        assert reduced is t1 and dropped == ()

    def test_all_isolated_warns(self):
        table = SparseTable.from_cells({"00": 5, "01": 3, "10": 2})
        with pytest.warns(EmptyModelSpaceWarning):
            reduced, dropped = prune_isolated(table, connectivity_graph(table))
        assert reduced is table

    def test_preserves_joint_counts(self):
        rng = np.random.default_rng(3)
        rows = random_rows(rng, 200, 6)
        rows = np.hstack([rows, np.zeros((200, 2), dtype=np.uint8)])
        rows[5, 6] = 1
        rows[9, 7] = 1
        table = ingest_matrix(rows)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            reduced, dropped = prune_isolated(table, connectivity_graph(table))
        assert set(dropped) == {"X7", "X8"}
        assert reduced.total == table.total
        kept = [table.names.index(n) for n in reduced.names]
        assert marginalize(reduced, range(reduced.n_vars)).as_dict() == marginalize(table, kept).as_dict()


class TestDegrees:
    def test_path(self):
        g = Graph.from_edges(["1", "2", "3"], [("1", "2"), ("2", "3")])
        assert degree_report(g) == pytest.approx({"1": 1 / 3, "2": 2 / 3, "3": 1 / 3})

    def test_edgeless_and_complete(self):
        assert set(degree_report(Graph(("a", "b"))).values()) == {0.0}
        verts = [str(i) for i in range(5)]
        complete = Graph.from_edges(verts, [(a, b) for a in verts for b in verts if a < b])
        assert list(degree_report(complete).values()) == pytest.approx([4 / 5] * 5)


class TestPartitionGraph:
    def test_triangle_plus_isolated(self):
        g = partition_to_graph(CliquePartition(((0, 1, 2), (3,))))
        assert g.edge_set() == {("1", "2"), ("1", "3"), ("2", "3")}

    def test_components_recover_partition(self):
        for m in enumerate_all_partitions(5):
            g = partition_to_graph(m)
            comps = sorted(sorted(int(v) - 1 for v in c) for c in g.components())
            assert [tuple(c) for c in comps] == list(m.cliques)


class TestDiff:
    def test_cases(self):
        verts = ["1", "2", "3"]
        g12 = Graph.from_edges(verts, [("1", "2")])
        g23 = Graph.from_edges(verts, [("2", "3")])
        d = graph_diff(g12, g12)
        assert d.shared == {("1", "2")} and not d.only_first and not d.only_second
        d = graph_diff(g12, g23)
        assert d.only_first == {("1", "2")} and d.only_second == {("2", "3")}
        d = graph_diff(g12, Graph(tuple(verts)))
        assert d.only_first == g12.edge_set()

    def test_partition_property(self):
        rng = np.random.default_rng(0)
        verts = [f"v{i}" for i in range(7)]
        pairs = [(a, b) for a in verts for b in verts if a < b]
        for _ in range(20):
            e1 = [pairs[i] for i in rng.choice(len(pairs), 6, replace=False)]
            e2 = [pairs[i] for i in rng.choice(len(pairs), 6, replace=False)]
            d = graph_diff(Graph.from_edges(verts, e1), Graph.from_edges(verts, e2))
            assert not (d.only_first & d.shared) and not (d.only_second & d.shared)
            assert not (d.only_first & d.only_second)
            assert d.only_first | d.only_second | d.shared == set(e1) | set(e2)

    def test_mismatch(self):
        with pytest.raises(LabelMismatchError):
            graph_diff(Graph(("a",)), Graph(("b",)))


class TestDot:
    def test_edgeless(self):
        nodes, edges = parse_dot(export_dot(Graph(("b", "a"))))
        assert nodes == ["a", "b"] and edges == {}

    def test_bma_colours(self):
        g = bma_graph([Edge(0, 1, 0.95, "black"), Edge(1, 2, 0.3, "green")], ["a", "b", "c"])
        _, edges = parse_dot(export_dot(g))
        assert edges == {("a", "b"): "black", ("b", "c"): "green"}

    def test_deterministic_and_roundtrip(self):
        m = CliquePartition(((0, 2, 4), (1, 3), (5,)))
        names = ['x"1', "x2", "x 3", "x4", "x5", "x6"]
        g = partition_to_graph(m, names)
        text = export_dot(g)
        assert text == export_dot(partition_to_graph(m, names))
        nodes, edges = parse_dot(text)
        unescaped = {tuple(sorted(s.replace('\\"', '"') for s in e)) for e in edges}
        assert unescaped == g.edge_set()
        assert len(nodes) == 6


class TestJson:
    def test_empty_graph(self):
        assert export_json(Graph(())) == '{"vertices":[],"edges":[]}'

    def test_partition_text(self):
        assert json.loads(export_json(CliquePartition(((0, 1), (2,)))))["cliques"] == "1,2;3"

    def test_graph_roundtrip(self):
        g = bma_graph([Edge(0, 1, 0.95, "black")], ["a", "b", "c"])
        assert graph_from_json(export_json(g)) == g

    def test_bag_and_retained_roundtrip(self):
        parts = list(enumerate_all_partitions(3))
        bag = ModelBag(ScoredModel(10.0 + i, m) for i, m in enumerate(parts))
        assert bag_from_json(export_json(bag)) == bag
        ret = occams_window(bag, 0.01)
        back = retained_from_json(export_json(ret))
        assert back.models == ret.models
        np.testing.assert_array_equal(back.weights, ret.weights)

    def test_single_retained_weight_one(self):
        bag = ModelBag([ScoredModel(1.0, CliquePartition.singletons(2))])
        data = json.loads(export_json(occams_window(bag)))
        assert data["models"][0]["weight"] == 1.0

    def test_csv_outputs(self, t1):
        ret = occams_window(ModelBag([ScoredModel(1.0, CliquePartition.saturated(2))]))
        text = existence_csv(existence_probabilities(ret, t1))
        lines = text.splitlines()
        assert lines[0] == "variable,probability"
        rows = dict(line.split(",") for line in lines[1:])
        assert list(rows) == ["X1", "X2", "__unknown__"]
        assert [float(v) for v in rows.values()] == pytest.approx([0.1, 0.3, 0.5], rel=1e-12)
        text = edges_csv([Edge(0, 1, 1.0, "black")], ["b", "a"])
        assert text.splitlines() == ["var_i,var_j,probability,bucket", "a,b,1.0,black"]
