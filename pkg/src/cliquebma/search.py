"""Multi-chain stochastic search over clique models.

Each chain starts from a random valid partition and proposes split, join,
switch and move perturbations. A proposal whose MLEs do not exist is
rejected outright; otherwise it is accepted with probability
``min(1, exp(BIC(current) - BIC(proposal)))``. Every scored model with
existing MLEs, accepted or not, is collected into the chain's bag.

Chains are independent: chain ``i`` draws from a generator seeded by
``SeedSequence([master_seed, i])``, so results do not depend on how chains
are spread over worker processes.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .cliquemodel import CliquePartition, CliqueScorer, ScoredModel
from .contingency import SparseTable
from .exceptions import InputValueError, NoValidModelError

__all__ = [
    "MOVES",
    "SearchConfig",
    "ModelBag",
    "ChainTrace",
    "StepResult",
    "SearchResult",
    "chain_rng",
    "random_valid_model",
    "propose",
    "step",
    "run_chain",
    "run_search",
]

logger = logging.getLogger(__name__)

MOVES = ("split", "join", "switch", "move")

Scorer = Callable[[CliquePartition], ScoredModel]


@dataclass(frozen=True)
class SearchConfig:
    chains: int = 100
    iterations: int = 100_000
    master_seed: int = 0
    occam_c: float = 1e-4
    workers: int = 1
    init_retry_cap: int = 1000

    def __post_init__(self):
        if self.chains < 1:
            raise InputValueError("chains must be >= 1")
        if self.iterations < 0:
            raise InputValueError("iterations must be >= 0")
        if self.workers < 1:
            raise InputValueError("workers must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise InputValueError("master_seed must be a 64-bit unsigned integer")
        if not 0.0 < self.occam_c < 1.0:
            raise InputValueError("occam_c must lie strictly between 0 and 1")
        if self.init_retry_cap < 2:
            raise InputValueError("init_retry_cap must be >= 2")


class ModelBag:
    """Deduplicated collection of scored models keyed by canonical partition."""

    def __init__(self, models: Iterable[ScoredModel] = ()):
        self.entries: dict[CliquePartition, ScoredModel] = {}
        for m in models:
            self.add(m)

    def add(self, model: ScoredModel) -> None:
        if not model.mle_exists:
            raise InputValueError(f"bag only holds models with MLEs; got {model.partition}")
        self.entries.setdefault(model.partition, model)

    def get(self, partition: CliquePartition) -> ScoredModel | None:
        return self.entries.get(partition)

    def merge(self, other: "ModelBag") -> "ModelBag":
        out = ModelBag()
        out.entries = dict(self.entries)
        for key, model in other.entries.items():
            out.entries.setdefault(key, model)
        return out

    @property
    def best(self) -> ScoredModel:
        if not self.entries:
            raise ValueError("empty bag has no best model")
        return min(self.entries.values())

    @property
    def best_bic(self) -> float:
        return self.best.bic

    def models(self) -> list[ScoredModel]:
        """Models sorted by (BIC, canonical partition)."""
        return sorted(self.entries.values())

    def __len__(self):
        return len(self.entries)

    def __contains__(self, partition):
        return partition in self.entries

    def __iter__(self):
        return iter(self.models())

    def __eq__(self, other):
        if not isinstance(other, ModelBag):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self):
        best = f", best_bic={self.best_bic:.6g}" if self.entries else ""
        return f"ModelBag(n_models={len(self)}{best})"


@dataclass
class ChainTrace:
    """Per-iteration record of one chain (iterations are numbered from 1)."""

    chain_id: int
    initial_bic: float
    bic: np.ndarray = field(repr=False)
    accepted: np.ndarray = field(repr=False)
    move: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.bic)

    @property
    def best_bic(self) -> float:
        return float(min(self.initial_bic, self.bic.min())) if len(self.bic) else self.initial_bic

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if len(self.accepted) else math.nan

    def rows(self):
        for i in range(len(self.bic)):
            yield (self.chain_id, i + 1, float(self.bic[i]), bool(self.accepted[i]), MOVES[self.move[i]])

    def __eq__(self, other):
        if not isinstance(other, ChainTrace):
            return NotImplemented
        return (
            self.chain_id == other.chain_id
            and self.initial_bic == other.initial_bic
            and np.array_equal(self.bic, other.bic)
            and np.array_equal(self.accepted, other.accepted)
            and np.array_equal(self.move, other.move)
        )


class StepResult(NamedTuple):
    state: ScoredModel
    candidate: ScoredModel | None
    accepted: bool
    move: str


class SearchResult(NamedTuple):
    bag: ModelBag
    traces: list[ChainTrace]
    hit_fraction: float


def chain_rng(master_seed: int, chain_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(chain_id)]))


def _randint(rng: np.random.Generator, n: int) -> int:
    # scalar rng.integers is several times slower than rng.random
    return min(int(rng.random() * n), n - 1)


def _as_scorer(table_or_scorer) -> Scorer:
    if isinstance(table_or_scorer, SparseTable):
        return CliqueScorer(table_or_scorer)
    return table_or_scorer


def _random_urn_partition(n_vars: int, rng: np.random.Generator) -> CliquePartition:
    blocks: list[list[int]] = []
    for v in range(n_vars):
        j = _randint(rng, len(blocks) + 1)
        if j == len(blocks):
            blocks.append([v])
        else:
            blocks[j].append(v)
    return CliquePartition(tuple(tuple(b) for b in blocks))


def random_valid_model(table: SparseTable, rng: np.random.Generator, cap: int = 1000, scorer: Scorer | None = None) -> ScoredModel:
    """Draw a random partition whose MLEs exist.

    Each variable in turn joins one of the existing cliques or opens a new
    one, all options equally likely. After ``cap // 2`` failed draws the
    all-singleton model is returned.

    Raises
    ------
    NoValidModelError
        If not even the all-singleton model has MLEs (a constant column).
    """
    scorer = scorer or CliqueScorer(table)
    fallback = scorer(CliquePartition.singletons(table.n_vars))
    if not fallback.mle_exists:
        raise NoValidModelError(
            "the all-singleton model has no MLEs; remove constant columns "
            f"{[table.names[b] for b in table.constant_columns]} first"
        )
    for _ in range(cap // 2):
        cand = scorer(_random_urn_partition(table.n_vars, rng))
        if cand.mle_exists:
            return cand
    return fallback


def _split(cliques: list[tuple[int, ...]], rng) -> list[tuple[int, ...]] | None:
    j = _randint(rng, len(cliques))
    clique = cliques[j]
    if len(clique) < 2:
        return None
    while True:
        sides = rng.random(len(clique)) < 0.5
        if sides.any() and not sides.all():
            break
    left = tuple(v for v, s in zip(clique, sides) if s)
    right = tuple(v for v, s in zip(clique, sides) if not s)
    return cliques[:j] + [left, right] + cliques[j + 1 :]


def _two_distinct(rng, k: int) -> tuple[int, int]:
    a = _randint(rng, k)
    b = _randint(rng, k - 1)
    return a, b + (b >= a)


def _join(cliques, rng):
    if len(cliques) < 2:
        return None
    a, b = _two_distinct(rng, len(cliques))
    merged = cliques[a] + cliques[b]
    return [c for i, c in enumerate(cliques) if i not in (a, b)] + [merged]


def _switch(cliques, rng):
    if len(cliques) < 2:
        return None
    a, b = _two_distinct(rng, len(cliques))
    ca, cb = list(cliques[a]), list(cliques[b])
    ia, ib = _randint(rng, len(ca)), _randint(rng, len(cb))
    ca[ia], cb[ib] = cb[ib], ca[ia]
    out = list(cliques)
    out[a], out[b] = tuple(ca), tuple(cb)
    return out


def _move(cliques, rng):
    if len(cliques) < 2:
        return None
    src, dst = _two_distinct(rng, len(cliques))
    members = list(cliques[src])
    v = members.pop(_randint(rng, len(members)))
    out = list(cliques)
    out[dst] = cliques[dst] + (v,)
    out[src] = tuple(members)
    return [c for c in out if c]


_MOVE_FNS = (_split, _join, _switch, _move)


def propose(model: CliquePartition, rng: np.random.Generator) -> tuple[CliquePartition, str]:
    """Perturb ``model`` with a uniformly chosen move.

    Degenerate draws (splitting a singleton, or any two-clique move when the
    model has one clique) return ``model`` itself.
    """
    code = _randint(rng, 4)
    blocks = _MOVE_FNS[code](list(model.cliques), rng)
    if blocks is None:
        return model, MOVES[code]
    return CliquePartition.from_blocks(blocks), MOVES[code]


def step(scorer, current: ScoredModel, rng: np.random.Generator, bag: ModelBag | None = None) -> StepResult:
    """One search iteration from ``current``.

    ``scorer`` is a :class:`SparseTable` or any callable mapping a partition
    to a :class:`ScoredModel`. When ``bag`` is given, previously scored
    models are looked up there instead of being rescored.
    """
    scorer = _as_scorer(scorer)
    proposal, move = propose(current.partition, rng)
    if proposal == current.partition:
        return StepResult(current, None, False, move)
    candidate = bag.get(proposal) if bag is not None else None
    if candidate is None:
        candidate = scorer(proposal)
    if not candidate.mle_exists:
        return StepResult(current, candidate, False, move)
    delta = candidate.bic - current.bic
    if delta <= 0.0 or rng.random() < math.exp(-delta):
        return StepResult(candidate, candidate, True, move)
    return StepResult(current, candidate, False, move)


def run_chain(table: SparseTable, config: SearchConfig, chain_id: int, scorer: Scorer | None = None) -> tuple[ModelBag, ChainTrace]:
    """Run one chain; deterministic in ``(config.master_seed, chain_id)``."""
    scorer = scorer or CliqueScorer(table)
    rng = chain_rng(config.master_seed, chain_id)
    state = random_valid_model(table, rng, cap=config.init_retry_cap, scorer=scorer)
    initial_bic = state.bic
    bag = ModelBag([state])
    n = config.iterations
    bics = np.empty(n, dtype=np.float64)
    accepted = np.zeros(n, dtype=bool)
    moves = np.empty(n, dtype=np.int8)
    move_code = {m: i for i, m in enumerate(MOVES)}
    for i in range(n):
        result = step(scorer, state, rng, bag)
        cand = result.candidate
        if cand is not None and cand.mle_exists:
            bag.add(cand)
        state = result.state
        bics[i] = state.bic
        accepted[i] = result.accepted
        moves[i] = move_code[result.move]
    return bag, ChainTrace(chain_id, initial_bic, bics, accepted, moves)


def _merge_all(bags: list[ModelBag]) -> ModelBag:
    merged = ModelBag()
    for b in bags:
        merged = merged.merge(b)
    return merged


_WORKER_TABLE: SparseTable | None = None


def _init_worker(table: SparseTable) -> None:
    global _WORKER_TABLE
    _WORKER_TABLE = table


def _chain_in_worker(args):
    config, chain_id = args
    return run_chain(_WORKER_TABLE, config, chain_id)


def run_search(table: SparseTable, config: SearchConfig) -> SearchResult:
    """Run ``config.chains`` independent chains and merge their bags.

    ``hit_fraction`` is the share of chains whose own path reached the best
    BIC found across all chains.
    """
    chain_ids = list(range(config.chains))
    if config.workers == 1 or config.chains == 1:
        scorer = CliqueScorer(table)
        results = [run_chain(table, config, cid, scorer=scorer) for cid in chain_ids]
    else:
        with ProcessPoolExecutor(
            max_workers=min(config.workers, config.chains),
            initializer=_init_worker,
            initargs=(table,),
        ) as pool:
            results = list(pool.map(_chain_in_worker, [(config, cid) for cid in chain_ids]))
    bags = [b for b, _ in results]
    traces = [t for _, t in results]
    merged = _merge_all(bags)
    best = merged.best_bic
    tol = 1e-9 * max(1.0, abs(best))
    hits = sum(1 for t in traces if t.best_bic <= best + tol)
    logger.info("search: %d chains, %d models in bag, best BIC %.6f, hit fraction %.3f", config.chains, len(merged), best, hits / config.chains)
    return SearchResult(merged, traces, hits / config.chains)
