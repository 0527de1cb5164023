"""Clique loglinear model search and Bayes model averaging for sparse binary tables."""

from .cliquemodel import (
    CliquePartition,
    ScoredModel,
    bic,
    cell_probability,
    count_clique_models,
    enumerate_all_partitions,
    log_likelihood,
    log_mean_cell,
    mle_exists,
    param_count,
    parse_partition,
    validate_partition,
)
from .contingency import SparseTable, binarize, ingest_matrix, marginalize, two_way_positive
from .estimator import CliqueModelSearch, ConnectivityPruner, PresenceBinarizer
from .posterior import (
    bma_cell_probability,
    edge_probabilities,
    existence_probabilities,
    occams_window,
    threshold_edges,
)
from .search import ModelBag, SearchConfig, run_chain, run_search

__version__ = "0.1.0"

__all__ = [
    "CliqueModelSearch",
    "CliquePartition",
    "ConnectivityPruner",
    "ModelBag",
    "PresenceBinarizer",
    "ScoredModel",
    "SearchConfig",
    "SparseTable",
    "binarize",
    "bic",
    "bma_cell_probability",
    "cell_probability",
    "count_clique_models",
    "edge_probabilities",
    "enumerate_all_partitions",
    "existence_probabilities",
    "ingest_matrix",
    "log_likelihood",
    "log_mean_cell",
    "marginalize",
    "mle_exists",
    "occams_window",
    "param_count",
    "parse_partition",
    "run_chain",
    "run_search",
    "threshold_edges",
    "two_way_positive",
    "validate_partition",
]
