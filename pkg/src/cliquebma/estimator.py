"""scikit-learn style wrappers around the functional API.

``make_pipeline(PresenceBinarizer(), ConnectivityPruner(), CliqueModelSearch())``
runs the whole count-matrix-to-association-graph workflow.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary_matrix
from .contingency import SparseTable, binarize, ingest_matrix
from .graphio import Graph, bma_graph, connectivity_graph, degree_report, partition_to_graph, prune_isolated
from .posterior import (
    bma_cell_probabilities,
    edge_probabilities,
    existence_probabilities,
    occams_window,
    threshold_edges,
)
from .search import SearchConfig, run_search

__all__ = ["PresenceBinarizer", "ConnectivityPruner", "CliqueModelSearch"]


def _feature_names(X, n_features: int, given=None) -> tuple[str, ...]:
    if given is not None:
        return tuple(str(n) for n in given)
    cols = getattr(X, "columns", None)
    if cols is not None:
        return tuple(str(c) for c in cols)
    return tuple(f"X{i + 1}" for i in range(n_features))


def _as_table(X, feature_names=None) -> SparseTable:
    if isinstance(X, SparseTable):
        return X
    bits = check_binary_matrix(np.asarray(X))
    return ingest_matrix(bits, names=_feature_names(X, bits.shape[1], feature_names))


class PresenceBinarizer(TransformerMixin, BaseEstimator):
    """Count matrix to presence/absence: 1 where ``count >= threshold``.

    Unlike :class:`sklearn.preprocessing.Binarizer` the comparison is
    inclusive and negative counts are rejected.
    """

    def __init__(self, threshold: int = 1):
        self.threshold = threshold

    def fit(self, X, y=None):
        self.n_features_in_ = np.asarray(X).shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return binarize(np.asarray(X), self.threshold)


class ConnectivityPruner(TransformerMixin, BaseEstimator):
    """Drop variables that have no fully positive 2x2 marginal with any other.

    Parameters
    ----------
    drop_constant : bool, default=False
        Remove all-0 and all-1 columns before building the graph instead of
        raising :class:`~cliquebma.exceptions.PreprocessError`.

    Attributes
    ----------
    graph_ : Graph
        Connectivity graph of the retained-plus-isolated variables.
    support_ : ndarray of bool
        Mask of columns kept by :meth:`transform`.
    dropped_ : tuple of str
    degrees_ : dict
        Degree proportion of every vertex of ``graph_``.
    """

    def __init__(self, drop_constant: bool = False):
        self.drop_constant = drop_constant

    def fit(self, X, y=None, feature_names=None):
        table = _as_table(X, feature_names)
        names = table.names
        support = np.ones(table.n_vars, dtype=bool)
        if self.drop_constant and table.constant_columns:
            support[list(table.constant_columns)] = False
            table = table.collapse(np.flatnonzero(support))
        self.graph_ = connectivity_graph(table)
        reduced, dropped = prune_isolated(table, self.graph_)
        support &= np.isin(names, reduced.names)
        self.support_ = support
        self.dropped_ = tuple(n for n, keep in zip(names, support) if not keep)
        self.degrees_ = degree_report(self.graph_)
        self.feature_names_in_ = np.array(names, dtype=object)
        self.n_features_in_ = len(names)
        self.table_ = reduced
        return self

    def transform(self, X):
        check_is_fitted(self, "support_")
        if isinstance(X, SparseTable):
            return X.collapse(np.flatnonzero(self.support_))
        return np.asarray(X)[:, self.support_]

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "support_")
        return self.feature_names_in_[self.support_]


class CliqueModelSearch(BaseEstimator):
    """Clique loglinear model search with Bayes model averaging.

    Fitting runs ``chains`` independent stochastic searches over clique
    models of the binary data, keeps the models inside Occam's window and
    averages over them.

    Parameters
    ----------
    chains : int, default=100
    iterations : int, default=100_000
        Steps per chain.
    occam_c : float, default=1e-4
        Keep models with posterior weight at least ``occam_c`` times the best.
    edge_threshold : float, default=0.1
        Report edges with averaged probability strictly above this.
    random_state : int, default=0
        Master seed; chain ``i`` is seeded from ``(random_state, i)``.
    n_jobs : int, default=1
        Worker processes for the chains. Results do not depend on it.

    Attributes
    ----------
    table_ : SparseTable
    bag_ : ModelBag
    traces_ : list of ChainTrace
    hit_fraction_ : float
    retained_ : RetainedSet
    best_model_ : ScoredModel
    edge_probabilities_ : ndarray of shape (n_features, n_features)
    edges_ : list of Edge
    existence_ : ExistenceReport
    """

    def __init__(
        self,
        chains: int = 100,
        iterations: int = 100_000,
        occam_c: float = 1e-4,
        edge_threshold: float = 0.1,
        random_state: int = 0,
        n_jobs: int = 1,
    ):
        self.chains = chains
        self.iterations = iterations
        self.occam_c = occam_c
        self.edge_threshold = edge_threshold
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self) -> SearchConfig:
        return SearchConfig(
            chains=self.chains,
            iterations=self.iterations,
            master_seed=int(self.random_state),
            occam_c=self.occam_c,
            workers=self.n_jobs,
        )

    def fit(self, X, y=None, feature_names=None):
        table = _as_table(X, feature_names)
        result = run_search(table, self._config())
        self.table_ = table
        self.bag_ = result.bag
        self.traces_ = result.traces
        self.hit_fraction_ = result.hit_fraction
        self.retained_ = occams_window(result.bag, self.occam_c)
        self.best_model_ = self.retained_.best
        matrix = edge_probabilities(self.retained_, table.names)
        self.edge_probabilities_ = matrix.values
        self.edges_ = threshold_edges(matrix, self.edge_threshold)
        self.existence_ = existence_probabilities(self.retained_, table)
        self.feature_names_in_ = np.array(table.names, dtype=object)
        self.n_features_in_ = table.n_vars
        return self

    def score_samples(self, X):
        """Log of the model-averaged probability of each row pattern."""
        check_is_fitted(self, "retained_")
        bits = check_binary_matrix(np.asarray(X))
        with np.errstate(divide="ignore"):
            return np.log(bma_cell_probabilities(self.retained_, self.table_, bits))

    def score(self, X, y=None):
        """Mean log model-averaged probability of the rows of ``X``."""
        return float(np.mean(self.score_samples(X)))

    def graph(self) -> Graph:
        """Thresholded model-averaged association graph."""
        check_is_fitted(self, "edges_")
        return bma_graph(self.edges_, self.table_.names)

    def best_graph(self) -> Graph:
        check_is_fitted(self, "best_model_")
        return partition_to_graph(self.best_model_.partition, self.table_.names)
