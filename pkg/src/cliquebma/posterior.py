"""Occam's window and Bayes model averaging over a bag of clique models.

Model weights are proportional to ``exp(-BIC)``; all weight arithmetic is
done in the log domain with the best model's BIC subtracted first. Every
reduction over models runs in canonical-partition order so results are
reproducible bit for bit.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_probability
from .cliquemodel import CliquePartition, ScoredModel, log_cell_probabilities, mle_exists
from .contingency import SparseTable, as_pattern
from .exceptions import EmptyBagError, ModelInvalidError
from .search import ModelBag

__all__ = [
    "RetainedSet",
    "EdgeProbabilityMatrix",
    "ExistenceReport",
    "Edge",
    "BUCKETS",
    "occams_window",
    "edge_probabilities",
    "existence_probabilities",
    "bma_cell_probability",
    "bma_cell_probabilities",
    "bucket_of",
    "threshold_edges",
]

# (lower, upper] probability intervals and their colours
BUCKETS = (
    (0.9, 1.0, "black"),
    (0.5, 0.9, "red"),
    (0.1, 0.5, "green"),
    (0.0, 0.1, "grey"),
)


@dataclass(frozen=True)
class RetainedSet:
    """Models inside Occam's window, in canonical-partition order."""

    models: tuple[ScoredModel, ...]
    log_weights: np.ndarray
    weights: np.ndarray
    c: float

    def __len__(self):
        return len(self.models)

    @property
    def best(self) -> ScoredModel:
        return min(self.models)

    @property
    def n_vars(self) -> int:
        return self.models[0].partition.n_vars

    def ranked(self) -> list[tuple[ScoredModel, float]]:
        """(model, weight) pairs from best to worst BIC."""
        order = sorted(range(len(self.models)), key=lambda i: self.models[i])
        return [(self.models[i], float(self.weights[i])) for i in order]


@dataclass(frozen=True)
class EdgeProbabilityMatrix:
    """Posterior probability that two variables share a clique."""

    values: np.ndarray
    names: tuple[str, ...] | None = None

    def __getitem__(self, ij):
        return self.values[ij]

    @property
    def n_vars(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ExistenceReport:
    """Averaged probability that an observation matches exactly one variable
    (``per_variable``) or none of them (``unknown``)."""

    unknown: float
    per_variable: np.ndarray
    names: tuple[str, ...]

    def as_dict(self) -> dict[str, float]:
        out = {name: float(p) for name, p in zip(self.names, self.per_variable)}
        out["__unknown__"] = self.unknown
        return out

    def top(self, n: int = 5) -> list[tuple[str, float]]:
        items = sorted(self.as_dict().items(), key=lambda kv: (-kv[1], kv[0]))
        return items[:n]


class Edge(NamedTuple):
    i: int
    j: int
    probability: float
    bucket: str


def occams_window(bag: ModelBag | Iterable[ScoredModel], c: float = 1e-4) -> RetainedSet:
    """Keep models whose weight is at least ``c`` times the best model's.

    With weights ``exp(-BIC)`` this retains ``BIC <= best_bic + ln(1/c)``.
    Weights are renormalized over the retained models only.
    """
    c = check_probability(c, "c", open_interval=True)
    models = bag.models() if isinstance(bag, ModelBag) else sorted(m for m in bag if m.mle_exists)
    if not models:
        raise EmptyBagError("cannot apply Occam's window to an empty bag")
    best = min(m.bic for m in models)
    cutoff = best + math.log(1.0 / c)
    kept = sorted((m for m in models if m.bic <= cutoff), key=lambda m: m.partition)
    log_w = np.array([-m.bic for m in kept])
    shifted = np.exp(log_w - log_w.max())
    weights = shifted / math.fsum(shifted)
    return RetainedSet(tuple(kept), log_w, weights, c)


def edge_probabilities(retained: RetainedSet, names=None) -> EdgeProbabilityMatrix:
    n = retained.n_vars
    values = np.zeros((n, n))
    for model, w in zip(retained.models, retained.weights):
        for a, b in model.partition.same_clique_pairs():
            values[a, b] += w
    values = np.clip(values + values.T, 0.0, 1.0)
    return EdgeProbabilityMatrix(values, None if names is None else tuple(names))


def _check_models(retained: RetainedSet, table: SparseTable) -> None:
    for m in retained.models:
        if m.partition.n_vars != table.n_vars or not mle_exists(table, m.partition):
            raise ModelInvalidError(f"retained model {m.partition} has no MLEs on this table")


def bma_cell_probabilities(retained: RetainedSet, table: SparseTable, xs) -> np.ndarray:
    """Weighted average of per-model MLE probabilities for each row of ``xs``."""
    _check_models(retained, table)
    xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))
    out = np.zeros(len(xs))
    for model, w in zip(retained.models, retained.weights):
        out += w * np.exp(log_cell_probabilities(table, model.partition, xs))
    return out


def bma_cell_probability(retained: RetainedSet, table: SparseTable, x) -> float:
    pat = as_pattern(x, table.n_vars)
    return float(bma_cell_probabilities(retained, table, pat[None, :])[0])


def existence_probabilities(retained: RetainedSet, table: SparseTable) -> ExistenceReport:
    """Probabilities of the all-zero pattern and of each single-one pattern."""
    n = table.n_vars
    probes = np.vstack([np.zeros((1, n), dtype=np.uint8), np.eye(n, dtype=np.uint8)])
    probs = bma_cell_probabilities(retained, table, probes)
    return ExistenceReport(float(probs[0]), probs[1:], table.names)


def bucket_of(probability: float) -> str:
    for lo, hi, colour in BUCKETS:
        if lo < probability <= hi:
            return colour
    raise ValueError(f"probability {probability} outside (0, 1]")


def threshold_edges(matrix: EdgeProbabilityMatrix | np.ndarray, threshold: float = 0.1) -> list[Edge]:
    """Edges with probability strictly above ``threshold``, each with its colour bucket."""
    threshold = check_probability(threshold, "threshold")
    values = matrix.values if isinstance(matrix, EdgeProbabilityMatrix) else np.asarray(matrix)
    n = values.shape[0]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            p = float(values[i, j])
            if p > threshold and p > 0.0:
                edges.append(Edge(i, j, p, bucket_of(p)))
    return edges


def partition_weights(retained: RetainedSet) -> dict[CliquePartition, float]:
    return {m.partition: float(w) for m, w in zip(retained.models, retained.weights)}
