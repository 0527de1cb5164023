"""Graphs over labelled variables, plus the text exports of every artifact.

Vertex labels, not column indices, identify variables here: pruning
renumbers columns, and diffs compare graphs from different tables.
"""

from __future__ import annotations

import csv
import io
import json
import os
import warnings
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cliquemodel import CliquePartition, ScoredModel, parse_partition
from .contingency import SparseTable
from .exceptions import EmptyModelSpaceWarning, InputValueError, LabelMismatchError, PreprocessError
from .posterior import (
    Edge,
    EdgeProbabilityMatrix,
    ExistenceReport,
    RetainedSet,
    bucket_of,
)
from .search import ModelBag

__all__ = [
    "Graph",
    "GraphDiff",
    "connectivity_graph",
    "prune_isolated",
    "degree_report",
    "partition_to_graph",
    "bma_graph",
    "graph_diff",
    "export_dot",
    "export_json",
    "graph_from_json",
    "bag_from_json",
    "retained_from_json",
    "edges_csv",
    "read_edges_csv",
    "existence_csv",
    "degrees_csv",
    "traces_csv",
    "write_text",
]


def _pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph; ``edges`` maps a sorted label pair to an optional weight."""

    vertices: tuple[str, ...]
    edges: dict[tuple[str, str], float | None] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise InputValueError("duplicate vertex labels")
        known = set(self.vertices)
        for a, b in self.edges:
            if a == b:
                raise InputValueError(f"self-loop on {a!r}")
            if a not in known or b not in known:
                raise InputValueError(f"edge ({a!r}, {b!r}) has an unknown endpoint")

    @classmethod
    def from_edges(cls, vertices: Iterable[str], edges: Iterable, weights: Sequence | None = None) -> "Graph":
        edges = list(edges)
        ws = [None] * len(edges) if weights is None else list(weights)
        return cls(tuple(vertices), {_pair(a, b): w for (a, b), w in zip(edges, ws)})

    def edge_set(self) -> set[tuple[str, str]]:
        return set(self.edges)

    def degree(self) -> dict[str, int]:
        deg = dict.fromkeys(self.vertices, 0)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def components(self) -> list[set[str]]:
        adj = {v: set() for v in self.vertices}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        seen: set[str] = set()
        out = []
        for v in self.vertices:
            if v in seen:
                continue
            comp, stack = set(), [v]
            while stack:
                u = stack.pop()
                if u in comp:
                    continue
                comp.add(u)
                stack.extend(adj[u] - comp)
            seen |= comp
            out.append(comp)
        return out


class GraphDiff(NamedTuple):
    only_first: set[tuple[str, str]]
    only_second: set[tuple[str, str]]
    shared: set[tuple[str, str]]


def _pairwise_positive(table: SparseTable) -> np.ndarray:
    """Boolean B x B matrix: all four cells of the pair's 2x2 marginal are positive."""
    x = table.patterns.astype(np.int64)
    w = table.counts
    n11 = (x * w[:, None]).T @ x
    ones = np.diag(n11)
    n10 = ones[:, None] - n11
    n01 = ones[None, :] - n11
    n00 = table.total - ones[:, None] - ones[None, :] + n11
    ok = (n11 > 0) & (n10 > 0) & (n01 > 0) & (n00 > 0)
    np.fill_diagonal(ok, False)
    return ok


def connectivity_graph(table: SparseTable) -> Graph:
    """Edge between two variables iff their 2x2 marginal has no empty cell."""
    if table.constant_columns:
        bad = [table.names[b] for b in table.constant_columns]
        raise PreprocessError(f"constant columns must be removed first: {bad}")
    ok = _pairwise_positive(table)
    names = table.names
    ii, jj = np.nonzero(np.triu(ok, 1))
    return Graph.from_edges(names, [(names[i], names[j]) for i, j in zip(ii, jj)])


def prune_isolated(table: SparseTable, graph: Graph) -> tuple[SparseTable, tuple[str, ...]]:
    """Sum the table over variables with no connectivity edge.

    If every variable is isolated the table is returned unchanged with an
    :class:`EmptyModelSpaceWarning`; the search then only has the
    all-singleton model to offer.
    """
    if set(graph.vertices) != set(table.names):
        raise LabelMismatchError("graph vertices do not match table variables")
    deg = graph.degree()
    keep = [i for i, name in enumerate(table.names) if deg[name] > 0]
    if not keep:
        warnings.warn("every variable is isolated; nothing left to model jointly", EmptyModelSpaceWarning, stacklevel=2)
        return table, ()
    dropped = tuple(name for name in table.names if deg[name] == 0)
    if not dropped:
        return table, ()
    return table.collapse(keep), dropped


def degree_report(graph: Graph) -> dict[str, float]:
    """Degree of each vertex as a proportion of the number of vertices."""
    n = len(graph.vertices)
    return {v: d / n for v, d in graph.degree().items()}


def partition_to_graph(model: CliquePartition, names: Sequence[str] | None = None) -> Graph:
    names = list(names) if names is not None else [str(i + 1) for i in range(model.n_vars)]
    return Graph.from_edges(names, [(names[a], names[b]) for a, b in model.same_clique_pairs()])


def bma_graph(edges: Iterable[Edge], names: Sequence[str]) -> Graph:
    edges = list(edges)
    return Graph.from_edges(names, [(names[e.i], names[e.j]) for e in edges], [e.probability for e in edges])


def graph_diff(g1: Graph, g2: Graph) -> GraphDiff:
    if set(g1.vertices) != set(g2.vertices):
        raise LabelMismatchError(
            f"vertex sets differ: {sorted(set(g1.vertices) ^ set(g2.vertices))}"
        )
    e1, e2 = g1.edge_set(), g2.edge_set()
    return GraphDiff(e1 - e2, e2 - e1, e1 & e2)


def _dot_id(label: str) -> str:
    return '"' + label.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(graph: Graph, name: str = "G") -> str:
    """DOT text with vertices and edges sorted by label.

    Weighted edges (BMA probabilities) get their bucket colour and a label.
    """
    lines = [f"graph {_dot_id(name)} {{"]
    for v in sorted(graph.vertices):
        lines.append(f"  {_dot_id(v)};")
    for (a, b) in sorted(graph.edges):
        w = graph.edges[(a, b)]
        attrs = "" if w is None else f' [color={bucket_of(w)}, label="{w:.3f}"]'
        lines.append(f"  {_dot_id(a)} -- {_dot_id(b)}{attrs};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# JSON


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _model_record(model: ScoredModel, names=None, weight=None) -> dict:
    rec = {"cliques": model.partition.to_text(), "bic": model.bic}
    if names is not None:
        rec["labels"] = model.partition.labelled(names)
    if weight is not None:
        rec["weight"] = weight
    return rec


def export_json(obj, names: Sequence[str] | None = None) -> str:
    """Serialize a graph, bag, retained set, report, matrix or partition.

    Key order is fixed per schema, so equal inputs give identical text.
    """
    if isinstance(obj, Graph):
        verts = sorted(obj.vertices)
        edges = []
        for (a, b) in sorted(obj.edges):
            rec = {"source": a, "target": b}
            if obj.edges[(a, b)] is not None:
                rec["weight"] = obj.edges[(a, b)]
            edges.append(rec)
        return _dumps({"vertices": verts, "edges": edges})
    if isinstance(obj, ModelBag):
        return _dumps([_model_record(m, names) for m in obj.models()])
    if isinstance(obj, RetainedSet):
        return _dumps(
            {
                "c": obj.c,
                "models": [_model_record(m, names, w) for m, w in obj.ranked()],
            }
        )
    if isinstance(obj, ExistenceReport):
        return _dumps(
            {
                "unknown": obj.unknown,
                "variables": {n: float(p) for n, p in zip(obj.names, obj.per_variable)},
            }
        )
    if isinstance(obj, EdgeProbabilityMatrix):
        labels = list(obj.names or names or [str(i + 1) for i in range(obj.n_vars)])
        return _dumps({"names": labels, "values": obj.values.tolist()})
    if isinstance(obj, CliquePartition):
        return _dumps({"cliques": obj.to_text()})
    if isinstance(obj, ScoredModel):
        return _dumps(_model_record(obj, names))
    raise TypeError(f"no JSON schema for {type(obj).__name__}")


def graph_from_json(text: str) -> Graph:
    data = json.loads(text)
    edges = [(e["source"], e["target"]) for e in data["edges"]]
    return Graph.from_edges(data["vertices"], edges, [e.get("weight") for e in data["edges"]])


def _n_vars_of(text: str) -> int:
    return sum(len(part.split(",")) for part in text.split(";"))


def bag_from_json(text: str) -> ModelBag:
    bag = ModelBag()
    for rec in json.loads(text):
        part = parse_partition(rec["cliques"], _n_vars_of(rec["cliques"]))
        bag.add(ScoredModel(float(rec["bic"]), part))
    return bag


def retained_from_json(text: str) -> RetainedSet:
    data = json.loads(text)
    recs = sorted(
        (
            (parse_partition(r["cliques"], _n_vars_of(r["cliques"])), float(r["bic"]), float(r["weight"]))
            for r in data["models"]
        ),
        key=lambda r: r[0],
    )
    models = tuple(ScoredModel(b, p) for p, b, _ in recs)
    return RetainedSet(
        models,
        np.array([-m.bic for m in models]),
        np.array([w for _, _, w in recs]),
        float(data["c"]),
    )


# --------------------------------------------------------------------------
# CSV


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def edges_csv(edges: Iterable[Edge], names: Sequence[str]) -> str:
    rows = sorted(
        (_pair(names[e.i], names[e.j]) + (repr(e.probability), e.bucket) for e in edges),
    )
    return _csv_text(["var_i", "var_j", "probability", "bucket"], rows)


def read_edges_csv(path) -> list[tuple[str, str, float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"var_i", "var_j"} - set(reader.fieldnames or ())
        if missing:
            raise InputValueError(f"{path}: missing columns {sorted(missing)}")
        return [(r["var_i"], r["var_j"], float(r.get("probability") or "nan")) for r in reader]


def existence_csv(report: ExistenceReport) -> str:
    rows = [(n, repr(float(p))) for n, p in zip(report.names, report.per_variable)]
    rows.append(("__unknown__", repr(report.unknown)))
    return _csv_text(["variable", "probability"], rows)


def degrees_csv(degrees: dict[str, float]) -> str:
    return _csv_text(["variable", "degree_proportion"], [(v, repr(d)) for v, d in degrees.items()])


def traces_csv(traces) -> str:
    buf = io.StringIO()
    buf.write("chain,iteration,bic,accepted,move\n")
    for t in traces:
        for chain, it, b, acc, move in t.rows():
            buf.write(f"{chain},{it},{b!r},{int(acc)},{move}\n")
    return buf.getvalue()


def write_text(path, text: str) -> None:
    """Write ``text`` atomically (temp file then rename)."""
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
