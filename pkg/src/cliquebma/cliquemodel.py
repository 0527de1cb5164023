"""Clique loglinear models on binary tables.

A clique model is a partition of the variables into generators. Inside a
generator every interaction is free; across generators the variables are
independent, so the MLE of a cell probability is the product of the
generators' marginal proportions and exists iff each generator's marginal
table has no zero cell. Everything here works from marginals of the
positive cells only.

Variable indices are 0-based in Python. The text form (``"1,2;3"``) is
1-based, matching column positions in input files.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .contingency import SparseTable, as_pattern, log2_floor
from .exceptions import GuardError, ModelInvalidError, PartitionError

__all__ = [
    "CliquePartition",
    "ScoredModel",
    "CliqueScorer",
    "validate_partition",
    "parse_partition",
    "mle_exists",
    "cell_probability",
    "log_cell_probabilities",
    "log_mean_cell",
    "log_likelihood",
    "param_count",
    "bic",
    "score",
    "count_clique_models",
    "enumerate_all_partitions",
    "bell_number",
]

MAX_ENUMERATION_VARS = 12


@dataclass(frozen=True, order=True)
class CliquePartition:
    """Canonical partition of ``range(n_vars)`` into cliques.

    ``cliques`` is sorted by smallest member and each clique is sorted, so
    equality and hashing coincide with model identity. Use
    :func:`validate_partition` for untrusted input.
    """

    cliques: tuple[tuple[int, ...], ...]

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]]) -> "CliquePartition":
        """Canonicalize already-valid blocks (no validation)."""
        return cls(tuple(sorted(tuple(sorted(b)) for b in blocks)))

    @classmethod
    def singletons(cls, n_vars: int) -> "CliquePartition":
        return cls(tuple((i,) for i in range(n_vars)))

    @classmethod
    def saturated(cls, n_vars: int) -> "CliquePartition":
        return cls((tuple(range(n_vars)),))

    @property
    def n_vars(self) -> int:
        return sum(len(c) for c in self.cliques)

    def __len__(self) -> int:
        return len(self.cliques)

    def __iter__(self):
        return iter(self.cliques)

    def to_text(self) -> str:
        return ";".join(",".join(str(v + 1) for v in c) for c in self.cliques)

    def labelled(self, names: Sequence[str]) -> list[list[str]]:
        return [[names[v] for v in c] for c in self.cliques]

    def block_index(self) -> dict[int, int]:
        return {v: j for j, c in enumerate(self.cliques) for v in c}

    def same_clique_pairs(self) -> Iterator[tuple[int, int]]:
        for c in self.cliques:
            for a in range(len(c)):
                for b in range(a + 1, len(c)):
                    yield c[a], c[b]

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True, order=True)
class ScoredModel:
    """A partition with its BIC; ``bic`` is ``inf`` exactly when MLEs do not exist."""

    bic: float
    partition: CliquePartition

    @property
    def mle_exists(self) -> bool:
        return math.isfinite(self.bic)


def validate_partition(cliques: Iterable[Iterable[int]], n_vars: int) -> CliquePartition:
    """Check that ``cliques`` is a partition of ``range(n_vars)`` and canonicalize it."""
    blocks = [tuple(int(v) for v in c) for c in cliques]
    seen: set[int] = set()
    for block in blocks:
        if not block:
            raise PartitionError("empty clique")
        for v in block:
            if not 0 <= v < n_vars:
                raise PartitionError(f"index {v} out of range for {n_vars} variables")
            if v in seen:
                raise PartitionError(f"variable {v} appears in more than one clique")
            seen.add(v)
    if len(seen) != n_vars:
        missing = sorted(set(range(n_vars)) - seen)
        raise PartitionError(f"variables {missing} are not covered")
    return CliquePartition.from_blocks(blocks)


def parse_partition(text: str, n_vars: int) -> CliquePartition:
    """Parse the 1-based text form ``"1,2;3"``."""
    try:
        blocks = [[int(v) - 1 for v in part.split(",")] for part in text.strip().split(";")]
    except ValueError:
        raise PartitionError(f"cannot parse partition {text!r}") from None
    return validate_partition(blocks, n_vars)


def _check_fits(table: SparseTable, model: CliquePartition) -> None:
    if model.n_vars != table.n_vars:
        raise PartitionError(f"model covers {model.n_vars} variables, table has {table.n_vars}")


def _clique_term(table: SparseTable, clique: tuple[int, ...], max_size: int):
    """Return ``(exists, sum n log n)`` for one generator's marginal."""
    if len(clique) > max_size:
        return False, math.nan
    counts = table.marginal_counts(clique)
    if len(counts) != 1 << len(clique):
        return False, math.nan
    return True, float(np.dot(counts, np.log(counts)))


def mle_exists(table: SparseTable, model: CliquePartition) -> bool:
    _check_fits(table, model)
    max_size = log2_floor(table.total)
    return all(_clique_term(table, c, max_size)[0] for c in model.cliques)


def param_count(model: CliquePartition) -> int:
    """Free parameters: ``sum_j 2**|C_j| - k + 1``."""
    return sum(1 << len(c) for c in model.cliques) - len(model.cliques) + 1


def _bic_from_terms(terms: Sequence[float], model: CliquePartition, total: int) -> float:
    log_r = math.log(total)
    k = len(model.cliques)
    fit = math.fsum(terms) - (k - 1) * total * log_r
    return -2.0 * fit + param_count(model) * log_r


def bic(table: SparseTable, model: CliquePartition) -> float:
    """BIC of ``model``: ``-2 sum_x n(x) log m(x) + param_count * log R``.

    Raises
    ------
    ModelInvalidError
        If the model's MLEs do not exist on ``table``.
    """
    result = score(table, model)
    if not result.mle_exists:
        raise ModelInvalidError(f"MLEs do not exist for model {model}")
    return result.bic


def score(table: SparseTable, model: CliquePartition) -> ScoredModel:
    """Scored model; invalid models get ``bic = inf`` rather than an error."""
    _check_fits(table, model)
    max_size = log2_floor(table.total)
    terms = []
    for c in model.cliques:
        ok, s = _clique_term(table, c, max_size)
        if not ok:
            return ScoredModel(math.inf, model)
        terms.append(s)
    return ScoredModel(_bic_from_terms(terms, model, table.total), model)


def _require(table: SparseTable, model: CliquePartition) -> None:
    if not mle_exists(table, model):
        raise ModelInvalidError(f"MLEs do not exist for model {model}")


def _marginal_lookup(table: SparseTable, clique: tuple[int, ...], xs: np.ndarray) -> np.ndarray:
    pats = table._marginal_cached(clique)[0]
    counts = table.marginal_counts(clique)
    weights = 1 << np.arange(len(clique) - 1, -1, -1, dtype=np.int64)
    keys = pats.astype(np.int64) @ weights
    want = xs[:, list(clique)].astype(np.int64) @ weights
    pos = np.searchsorted(keys, want)
    pos = np.minimum(pos, len(keys) - 1)
    found = keys[pos] == want
    return np.where(found, counts[pos], 0)


def log_cell_probabilities(table: SparseTable, model: CliquePartition, xs) -> np.ndarray:
    """Vectorized log MLE cell probabilities for the rows of ``xs``."""
    _require(table, model)
    xs = np.atleast_2d(np.asarray(xs, dtype=np.uint8))
    out = np.full(len(xs), -len(model.cliques) * math.log(table.total))
    for c in model.cliques:
        out += np.log(_marginal_lookup(table, c, xs))
    return out


def cell_probability(table: SparseTable, model: CliquePartition, x) -> float:
    """MLE probability of pattern ``x``: ``prod_j n_Cj(x_Cj) / R``."""
    pat = as_pattern(x, table.n_vars)
    return float(np.exp(log_cell_probabilities(table, model, pat[None, :])[0]))


def log_mean_cell(table: SparseTable, model: CliquePartition, x) -> float:
    """Log MLE mean cell count: ``sum_j log n_Cj(x_Cj) - (k - 1) log R``."""
    pat = as_pattern(x, table.n_vars)
    return float(log_cell_probabilities(table, model, pat[None, :])[0] + math.log(table.total))


def log_likelihood(table: SparseTable, model: CliquePartition) -> float:
    """Maximized multinomial log-likelihood ``sum_x n(x) log p(x)``."""
    _require(table, model)
    terms = [_clique_term(table, c, table.n_vars)[1] for c in model.cliques]
    return math.fsum(terms) - len(model.cliques) * table.total * math.log(table.total)


class CliqueScorer:
    """BIC evaluator with a bounded per-generator cache.

    Chains revisit the same generators constantly, so caching the
    ``sum n log n`` term per generator makes a model score cost O(k) lookups.
    """

    def __init__(self, table: SparseTable, cache_size: int = 200_000):
        self.table = table
        self.cache_size = cache_size
        self._max_size = log2_floor(table.total)
        self._terms: OrderedDict[tuple[int, ...], tuple[bool, float]] = OrderedDict()
        self.evaluations = 0

    def term(self, clique: tuple[int, ...]) -> tuple[bool, float]:
        hit = self._terms.get(clique)
        if hit is not None:
            self._terms.move_to_end(clique)
            return hit
        hit = _clique_term(self.table, clique, self._max_size)
        self._terms[clique] = hit
        if len(self._terms) > self.cache_size:
            self._terms.popitem(last=False)
        return hit

    def __call__(self, model: CliquePartition) -> ScoredModel:
        self.evaluations += 1
        terms = []
        for c in model.cliques:
            ok, s = self.term(c)
            if not ok:
                return ScoredModel(math.inf, model)
            terms.append(s)
        return ScoredModel(_bic_from_terms(terms, model, self.table.total), model)


@lru_cache(maxsize=None)
def _partition_numbers(n: int) -> tuple[int, ...]:
    p = [1] + [0] * n
    for m in range(1, n + 1):
        total = 0
        k = 1
        while True:
            g1 = k * (3 * k - 1) // 2
            if g1 > m:
                break
            sign = 1 if k % 2 else -1
            total += sign * p[m - g1]
            g2 = g1 + k
            if g2 <= m:
                total += sign * p[m - g2]
            k += 1
        p[m] = total
    return tuple(p)


def count_clique_models(n_vars: int) -> int:
    """Integer-partition count ``P(n_vars)`` via Euler's pentagonal recurrence.

    This counts unlabeled clique-size profiles. The number of distinct labeled
    clique models is the Bell number; see :func:`enumerate_all_partitions`.
    """
    if n_vars < 1:
        raise ValueError("n_vars must be >= 1")
    return _partition_numbers(int(n_vars))[n_vars]


def enumerate_all_partitions(n_vars: int) -> Iterator[CliquePartition]:
    """Yield every set partition of ``range(n_vars)`` exactly once.

    Uses restricted growth strings; guarded at ``n_vars <= 12`` (4.2 million
    partitions).
    """
    if n_vars < 1:
        raise ValueError("n_vars must be >= 1")
    if n_vars > MAX_ENUMERATION_VARS:
        raise GuardError(f"refusing to enumerate partitions of {n_vars} > {MAX_ENUMERATION_VARS} variables")

    def grow(i: int, labels: list[int], n_blocks: int):
        if i == n_vars:
            blocks: list[list[int]] = [[] for _ in range(n_blocks)]
            for v, lab in enumerate(labels):
                blocks[lab].append(v)
            yield CliquePartition(tuple(tuple(b) for b in blocks))
            return
        for lab in range(n_blocks + 1):
            labels.append(lab)
            yield from grow(i + 1, labels, max(n_blocks, lab + 1))
            labels.pop()

    return grow(0, [], 0)


def bell_number(n_vars: int) -> int:
    """Number of set partitions of ``n_vars`` labelled variables (Bell triangle)."""
    if n_vars < 1:
        raise ValueError("n_vars must be >= 1")
    row = [1]
    for _ in range(n_vars - 1):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]
