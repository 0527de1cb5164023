"""Sparse binary contingency tables.

A table stores only the observed cell patterns and their counts. Patterns are
bit-packed into ``uint64`` words (``ceil(B / 64)`` per cell) which serve as
the aggregation key; an unpacked ``uint8`` copy is kept for fast column
slicing during marginalization. Marginal tables are built by extracting the
subset columns and aggregating, so no ``2**|C|`` array is ever allocated.
"""

from __future__ import annotations

import csv
import io
import os
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import (
    check_binary_matrix,
    check_names,
    check_rectangular,
    check_subset,
)
from .exceptions import InputShapeError, InputValueError, SubsetError

__all__ = [
    "SparseTable",
    "MarginalTable",
    "ingest_matrix",
    "binarize",
    "marginalize",
    "two_way_positive",
    "as_pattern",
    "read_binary_matrix",
    "read_count_matrix",
    "read_cells",
    "write_cells",
    "format_cells",
]

_WORD = 64


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack an ``(n, B)`` 0/1 array into ``(n, ceil(B/64))`` uint64 words."""
    n, b = bits.shape
    n_words = max(1, -(-b // _WORD))
    padded = np.zeros((n, n_words * _WORD), dtype=np.uint8)
    padded[:, :b] = bits
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view("<u8").reshape(n, n_words)


def _unpack(words: np.ndarray, b: int) -> np.ndarray:
    raw = np.ascontiguousarray(words.astype("<u8")).view(np.uint8)
    return np.unpackbits(raw, axis=1, bitorder="little")[:, :b]


def _aggregate(keys: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum ``counts`` over equal rows of ``keys``; returns (unique_keys, sums)."""
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    sums = np.zeros(len(uniq), dtype=np.int64)
    np.add.at(sums, inverse.reshape(-1), counts)
    return uniq, sums


def _lex_order(bits: np.ndarray) -> np.ndarray:
    # first column is the most significant key
    return np.lexsort(bits.T[::-1]) if bits.shape[1] else np.arange(len(bits))


def as_pattern(x, n_vars: int) -> np.ndarray:
    """Coerce a bit string (``"0101"``) or 0/1 sequence into a uint8 vector."""
    if isinstance(x, str):
        if any(ch not in "01" for ch in x):
            raise InputValueError(f"pattern {x!r} must contain only 0 and 1")
        arr = np.frombuffer(x.encode(), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(x, dtype=np.int64).reshape(-1)
        if np.any((arr != 0) & (arr != 1)):
            raise InputValueError(f"pattern {x!r} must contain only 0 and 1")
    if arr.size != n_vars:
        raise InputShapeError(f"pattern has length {arr.size}, expected {n_vars}")
    return arr.astype(np.uint8)


def _bitstring(bits: Iterable[int]) -> str:
    return "".join("1" if v else "0" for v in bits)


@dataclass(frozen=True)
class MarginalTable:
    """Counts of the positive cells of the marginal over ``subset``.

    ``patterns`` rows are in lexicographic order; absent patterns have count 0.
    """

    subset: tuple[int, ...]
    patterns: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count(self, x) -> int:
        pat = as_pattern(x, len(self.subset))
        hit = np.all(self.patterns == pat, axis=1)
        return int(self.counts[hit].sum())

    def as_dict(self) -> dict[str, int]:
        return {_bitstring(p): int(c) for p, c in zip(self.patterns, self.counts)}


class SparseTable:
    """Aggregated counts of a ``B``-dimensional binary contingency table.

    Instances are immutable once built and may be shared read-only between
    threads or pickled to worker processes. Build them with
    :func:`ingest_matrix` or :meth:`from_cells`.

    Attributes
    ----------
    n_vars : int
        Number of binary variables ``B``.
    total : int
        Grand total ``R``.
    patterns : ndarray of shape (n_cells, n_vars), uint8
        Observed cell patterns in lexicographic order.
    counts : ndarray of shape (n_cells,), int64
        Strictly positive count of each pattern.
    words : ndarray of shape (n_cells, ceil(n_vars / 64)), uint64
        Bit-packed patterns; bit ``b`` of the table lives in word ``b // 64``.
    names : tuple of str
    constant_columns : tuple of int
        Variables that take a single value across all observations.
    """

    def __init__(self, patterns: np.ndarray, counts: np.ndarray, names=None):
        patterns = np.asarray(patterns, dtype=np.uint8)
        counts = np.asarray(counts, dtype=np.int64)
        if patterns.ndim != 2 or patterns.shape[1] < 1:
            raise InputShapeError("patterns must be a 2-D array with at least one column")
        if len(patterns) != len(counts) or len(counts) == 0:
            raise InputShapeError("need one positive count per pattern and at least one cell")
        if np.any(counts < 1):
            raise InputValueError("stored cell counts must be >= 1")
        words, counts = _aggregate(_pack(patterns), counts)
        bits = _unpack(words, patterns.shape[1])
        order = _lex_order(bits)
        self._words = words[order]
        self._bits = bits[order]
        self._counts = counts[order]
        for arr in (self._words, self._bits, self._counts):
            arr.setflags(write=False)
        self._names = check_names(names, patterns.shape[1])
        self._total = int(self._counts.sum())
        ones = self._counts @ self._bits.astype(np.int64)
        self._constant = tuple(int(b) for b in np.flatnonzero((ones == 0) | (ones == self._total)))
        self._init_cache()

    def _init_cache(self, maxsize: int = 65536) -> None:
        self._marginal_cached = lru_cache(maxsize=maxsize)(self._marginal_uncached)

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_marginal_cached"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._init_cache()

    @classmethod
    def from_cells(cls, cells: Mapping, names=None) -> "SparseTable":
        """Build from a mapping ``pattern -> count`` (zero counts are dropped)."""
        items = [(k, int(v)) for k, v in cells.items() if int(v) != 0]
        if not items:
            raise InputShapeError("table has no positive cells")
        if any(v < 0 for _, v in items):
            raise InputValueError("cell counts must be nonnegative")
        first = items[0][0]
        n_vars = len(first) if isinstance(first, str) else len(np.asarray(first).reshape(-1))
        pats = np.stack([as_pattern(k, n_vars) for k, _ in items])
        return cls(pats, np.array([v for _, v in items]), names=names)

    @property
    def n_vars(self) -> int:
        return self._bits.shape[1]

    @property
    def total(self) -> int:
        return self._total

    @property
    def n_cells(self) -> int:
        return len(self._counts)

    @property
    def patterns(self) -> np.ndarray:
        return self._bits

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def words(self) -> np.ndarray:
        return self._words

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def constant_columns(self) -> tuple[int, ...]:
        return self._constant

    def as_dict(self) -> dict[str, int]:
        return {_bitstring(p): int(c) for p, c in zip(self._bits, self._counts)}

    def count(self, x) -> int:
        key = _pack(as_pattern(x, self.n_vars)[None, :])[0]
        hit = np.all(self._words == key, axis=1)
        return int(self._counts[hit].sum())

    def to_rows(self) -> np.ndarray:
        """Expand back to one row per observation."""
        return np.repeat(self._bits, self._counts, axis=0)

    def collapse(self, keep: Sequence[int]) -> "SparseTable":
        """Sum out every variable not in ``keep`` (0-based, order preserved)."""
        keep = list(keep)
        if not keep:
            raise SubsetError("cannot collapse a table onto zero variables")
        check_subset(keep, self.n_vars)
        return SparseTable(self._bits[:, keep], self._counts, [self._names[i] for i in keep])

    def __eq__(self, other):
        if not isinstance(other, SparseTable):
            return NotImplemented
        return (
            self._names == other._names
            and np.array_equal(self._bits, other._bits)
            and np.array_equal(self._counts, other._counts)
        )

    def __hash__(self):
        return hash((self._names, self._words.tobytes(), self._counts.tobytes()))

    def __repr__(self):
        return f"SparseTable(n_vars={self.n_vars}, total={self.total}, n_cells={self.n_cells})"

    def marginal_counts(self, subset: tuple[int, ...]) -> np.ndarray:
        """Positive counts of the marginal over a sorted 0-based ``subset`` tuple.

        Cached; callers must not mutate the returned array.
        """
        return self._marginal_cached(subset)[1]

    def _marginal_uncached(self, subset: tuple[int, ...]):
        cols = self._bits[:, list(subset)]
        if len(subset) <= 62:
            weights = np.left_shift(np.uint64(1), np.arange(len(subset) - 1, -1, -1, dtype=np.uint64))
            keys = (cols.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)
            uniq, sums = _aggregate(keys, self._counts)
            width = len(subset)
            pats = ((uniq[:, None] >> np.arange(width - 1, -1, -1, dtype=np.uint64)) & np.uint64(1)).astype(np.uint8)
        else:
            uniq, sums = _aggregate(_pack(cols), self._counts)
            pats = _unpack(uniq, len(subset))
            order = _lex_order(pats)
            pats, sums = pats[order], sums[order]
        pats.setflags(write=False)
        sums.setflags(write=False)
        return pats, sums


def ingest_matrix(rows, names=None) -> SparseTable:
    """Aggregate an observation-by-variable 0/1 matrix into a :class:`SparseTable`.

    Raises
    ------
    InputShapeError
        Ragged or empty input.
    InputValueError
        Entries other than 0 and 1, or duplicate labels.
    """
    bits = check_binary_matrix(rows)
    return SparseTable(bits, np.ones(len(bits), dtype=np.int64), names=names)


def binarize(counts, threshold: int = 1) -> np.ndarray:
    """Map a count matrix to presence/absence: ``1`` iff ``count >= threshold``."""
    arr = check_rectangular(counts, name="count matrix")
    if threshold < 1 or int(threshold) != threshold:
        raise InputValueError(f"threshold must be a positive integer, got {threshold}")
    if np.any(arr < 0):
        raise InputValueError("count matrix contains negative entries")
    return (arr >= threshold).astype(np.uint8)


def marginalize(table: SparseTable, subset: Sequence[int]) -> MarginalTable:
    """Marginal table over ``subset`` (0-based indices, any order).

    The result is keyed by the subset in ascending index order.
    """
    idx = check_subset(subset, table.n_vars)
    pats, sums = table._marginal_cached(idx)
    return MarginalTable(idx, pats, sums)


def two_way_positive(table: SparseTable, b1: int, b2: int) -> bool:
    """True iff all four cells of the 2x2 marginal over ``(b1, b2)`` are positive."""
    if int(b1) == int(b2):
        raise SubsetError("two_way_positive needs two distinct variables")
    idx = check_subset((b1, b2), table.n_vars)
    return len(table.marginal_counts(idx)) == 4


# --------------------------------------------------------------------------
# file formats


def _sniff_delimiter(first_line: str, path) -> str:
    if str(path).endswith((".tsv", ".tab")) or "\t" in first_line:
        return "\t"
    return ","


def _read_grid(path) -> tuple[list[str] | None, list[list[str]]]:
    with open(path, newline="") as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputShapeError(f"{path}: empty file")
    delim = _sniff_delimiter(lines[0], path)
    grid = [[cell.strip() for cell in row] for row in csv.reader(lines, delimiter=delim)]
    header = None
    if any(not cell.lstrip("-").isdigit() for cell in grid[0]):
        header, grid = grid[0], grid[1:]
    if not grid:
        raise InputShapeError(f"{path}: no data rows")
    lengths = {len(r) for r in grid}
    if len(lengths) > 1 or (header is not None and len(header) not in lengths):
        raise InputShapeError(f"{path}: ragged rows")
    return header, grid


def read_binary_matrix(path) -> SparseTable:
    """Read a CSV/TSV 0/1 matrix with an optional header of variable names."""
    header, grid = _read_grid(path)
    for r, row in enumerate(grid):
        for cell in row:
            if cell not in ("0", "1"):
                raise InputValueError(f"{path}: row {r + 1} has non-binary entry {cell!r}")
    return ingest_matrix(np.array(grid, dtype=np.uint8), names=header)


def read_count_matrix(path, threshold: int = 1) -> SparseTable:
    """Read a CSV/TSV count matrix and binarize it at ``threshold``."""
    header, grid = _read_grid(path)
    try:
        arr = np.array([[int(c) for c in row] for row in grid], dtype=np.int64)
    except ValueError as exc:
        raise InputValueError(f"{path}: non-integer count ({exc})") from None
    return ingest_matrix(binarize(arr, threshold), names=header)


def format_cells(table: SparseTable) -> str:
    """Aggregated cell format: optional ``# names`` line then ``bits,count`` lines."""
    buf = io.StringIO()
    buf.write("# " + ",".join(table.names) + "\n")
    for pat, cnt in zip(table.patterns, table.counts):
        buf.write(f"{_bitstring(pat)},{int(cnt)}\n")
    return buf.getvalue()


def write_cells(table: SparseTable, path) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(format_cells(table))
    os.replace(tmp, path)


def read_cells(path) -> SparseTable:
    names = None
    cells: dict[str, int] = {}
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if names is None and lineno == 1:
                    names = [n.strip() for n in line[1:].split(",")]
                continue
            try:
                bits, cnt = line.split(",")
                cnt = int(cnt)
            except ValueError:
                raise InputValueError(f"{path}:{lineno}: expected '<bitstring>,<count>'") from None
            bits = bits.strip()
            if width is None:
                width = len(bits)
            if len(bits) != width:
                raise InputShapeError(f"{path}:{lineno}: bitstring length {len(bits)} != {width}")
            if cnt < 0 or any(ch not in "01" for ch in bits):
                raise InputValueError(f"{path}:{lineno}: invalid cell {line!r}")
            cells[bits] = cells.get(bits, 0) + cnt
    if not cells:
        raise InputShapeError(f"{path}: no cells")
    return SparseTable.from_cells(cells, names=names)


def log2_floor(n: int) -> int:
    return int(n).bit_length() - 1
