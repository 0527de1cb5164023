"""Planted-clique connectivity matrices and recovery scoring.

Each planted clique owns a contiguous block of rows in which its member
columns are Bernoulli(``p_in``); every other cell is Bernoulli(``p_bg``).
Rows that come out all-zero get a single 1 in a random column so every
observation matches at least one variable.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
import yaml

from ._validation import check_probability, check_rectangular
from .exceptions import LabelMismatchError, SpecError
from .graphio import Graph, partition_to_graph
from .cliquemodel import CliquePartition

__all__ = ["SynthSpec", "load_spec", "generate", "inject_noise", "recovery_score", "variable_names"]


def variable_names(n_vars: int) -> tuple[str, ...]:
    return tuple(f"X{i + 1}" for i in range(n_vars))


@dataclass(frozen=True)
class SynthSpec:
    """Generator settings; ``planted`` holds 0-based column indices."""

    n_vars: int
    n_rows: int
    planted: tuple[tuple[int, ...], ...] = ()
    p_in: float = 0.8
    p_bg: float = 0.2
    clique_row_fraction: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_vars < 1 or self.n_rows < 1:
            raise SpecError("n_vars and n_rows must be positive")
        seen: set[int] = set()
        for clique in self.planted:
            if len(clique) < 2:
                raise SpecError(f"planted clique {clique} needs at least two members")
            for v in clique:
                if not 0 <= v < self.n_vars:
                    raise SpecError(f"planted index {v + 1} out of range")
                if v in seen:
                    raise SpecError(f"planted cliques overlap on variable {v + 1}")
                seen.add(v)
        if not 0.0 < self.p_bg < self.p_in <= 1.0:
            raise SpecError("need 0 < p_bg < p_in <= 1")
        if self.planted and self.block_size * len(self.planted) > self.n_rows:
            raise SpecError("planted row blocks exceed the number of rows")

    @property
    def row_fraction(self) -> float:
        if self.clique_row_fraction is not None:
            return self.clique_row_fraction
        return 0.8 / len(self.planted) if self.planted else 0.0

    @property
    def block_size(self) -> int:
        return int(round(self.row_fraction * self.n_rows))

    @classmethod
    def from_mapping(cls, cfg: Mapping) -> "SynthSpec":
        """Build from config keys; ``planted`` there is 1-based.

        ``clique_sizes`` may replace ``planted``: cliques of those sizes are
        then placed on randomly chosen columns using ``seed``.
        """
        known = {"n_vars", "n_rows", "planted", "clique_sizes", "p_in", "p_bg", "clique_row_fraction", "seed"}
        unknown = set(cfg) - known
        if unknown:
            raise SpecError(f"unknown spec keys: {sorted(unknown)}")
        try:
            n_vars, n_rows = int(cfg["n_vars"]), int(cfg["n_rows"])
        except KeyError as exc:
            raise SpecError(f"missing spec key {exc}") from None
        seed = int(cfg.get("seed", 0))
        if "planted" in cfg and "clique_sizes" in cfg:
            raise SpecError("give either planted or clique_sizes, not both")
        if "clique_sizes" in cfg:
            planted = random_planted(n_vars, cfg["clique_sizes"], np.random.default_rng(seed))
        else:
            planted = tuple(tuple(int(v) - 1 for v in c) for c in cfg.get("planted", ()))
        frac = cfg.get("clique_row_fraction")
        return cls(
            n_vars,
            n_rows,
            planted,
            float(cfg.get("p_in", 0.8)),
            float(cfg.get("p_bg", 0.2)),
            None if frac is None else float(frac),
            seed,
        )

    def to_mapping(self) -> dict:
        return {
            "n_vars": self.n_vars,
            "n_rows": self.n_rows,
            "planted": [[v + 1 for v in c] for c in self.planted],
            "p_in": self.p_in,
            "p_bg": self.p_bg,
            "clique_row_fraction": self.clique_row_fraction,
            "seed": self.seed,
        }


def random_planted(n_vars: int, sizes: Iterable[int], rng: np.random.Generator) -> tuple[tuple[int, ...], ...]:
    """Disjoint cliques of the given sizes on randomly chosen columns."""
    sizes = [int(s) for s in sizes]
    if sum(sizes) > n_vars:
        raise SpecError(f"clique sizes {sizes} need more than {n_vars} variables")
    cols = rng.permutation(n_vars)
    out, start = [], 0
    for s in sizes:
        out.append(tuple(sorted(int(v) for v in cols[start : start + s])))
        start += s
    return tuple(out)


def load_spec(path) -> SynthSpec:
    """Read a YAML or JSON spec file."""
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, Mapping):
        raise SpecError(f"{path}: expected a mapping of spec keys")
    return SynthSpec.from_mapping(cfg)


def planted_graph(spec: SynthSpec) -> Graph:
    covered = {v for c in spec.planted for v in c}
    blocks = list(spec.planted) + [(v,) for v in range(spec.n_vars) if v not in covered]
    return partition_to_graph(CliquePartition.from_blocks(blocks), variable_names(spec.n_vars))


def generate(spec: SynthSpec, rng: np.random.Generator | None = None) -> tuple[np.ndarray, Graph]:
    """Simulate an ``n_rows x n_vars`` 0/1 matrix with planted co-occurrence."""
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    prob = np.full((spec.n_rows, spec.n_vars), spec.p_bg)
    size = spec.block_size
    for j, clique in enumerate(spec.planted):
        prob[j * size : (j + 1) * size, list(clique)] = spec.p_in
    matrix = (rng.random(prob.shape) < prob).astype(np.uint8)
    empty = np.flatnonzero(matrix.sum(axis=1) == 0)
    if len(empty):
        matrix[empty, rng.integers(0, spec.n_vars, size=len(empty))] = 1
    return matrix, planted_graph(spec)


def inject_noise(matrix, p_flip: float, rng: np.random.Generator) -> np.ndarray:
    """Turn each 0 into a 1 independently with probability ``p_flip``."""
    p_flip = check_probability(p_flip, "p_flip")
    arr = check_rectangular(matrix).astype(np.uint8)
    flips = rng.random(arr.shape) < p_flip
    return np.where(flips, np.uint8(1), arr)


def _edge_pairs(edges, vertices: set[str]) -> set[tuple[str, str]]:
    if isinstance(edges, Graph):
        if set(edges.vertices) != vertices:
            raise LabelMismatchError("estimated graph has different vertex labels")
        return edges.edge_set()
    out = set()
    for e in edges:
        a, b = e[0], e[1]
        if a not in vertices or b not in vertices:
            raise LabelMismatchError(f"edge ({a!r}, {b!r}) uses an unknown label")
        out.add((a, b) if a <= b else (b, a))
    return out


def recovery_score(planted: Graph, estimated) -> tuple[float, float]:
    """(recall, precision) of estimated edges against the planted graph.

    ``estimated`` is a :class:`Graph` or an iterable of label pairs.
    """
    truth = planted.edge_set()
    est = _edge_pairs(estimated, set(planted.vertices))
    hit = len(truth & est)
    recall = hit / len(truth) if truth else 1.0
    if est:
        precision = hit / len(est)
    else:
        precision = 1.0 if not truth else 0.0
    return recall, precision


def spec_json(spec: SynthSpec) -> str:
    return json.dumps(spec.to_mapping(), sort_keys=True)
