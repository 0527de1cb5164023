import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cliquebma.cliquemodel import (
    CliquePartition,
    CliqueScorer,
    bell_number,
    bic,
    cell_probability,
    count_clique_models,
    enumerate_all_partitions,
    log_cell_probabilities,
    log_likelihood,
    log_mean_cell,
    mle_exists,
    param_count,
    parse_partition,
    score,
    validate_partition,
)
from cliquebma.contingency import SparseTable, ingest_matrix
from cliquebma.exceptions import GuardError, ModelInvalidError, PartitionError

from conftest import (
    all_patterns,
    expand_rows,
    oracle_bic,
    oracle_cell_probability,
    oracle_mle_exists,
    random_rows,
)

IND = CliquePartition(((0,), (1,)))
SAT = CliquePartition(((0, 1),))

# -2(5 ln 4.8 + 3 ln 3.2 + ln 1.2 + ln 0.8) + 3 ln 10, evaluated by hand
BIC_T1_IND = -15.67566476994989
# -2(5 ln 5 + 3 ln 3) + 4 ln 10
BIC_T1_SAT = -13.475712484373478
# 5 ln .5 + 3 ln .3 + 2 ln .1
LOGLIK_T1_SAT = -11.682824501765626


def p(*blocks):
    """Partition from 1-based blocks, as written in the examples."""
    return validate_partition([[v - 1 for v in b] for b in blocks], sum(len(b) for b in blocks))


class TestPartition:
    def test_valid_partition_is_canonical(self):
        part = validate_partition([[2], [1, 0]], 3)
        assert part.cliques == ((0, 1), (2,))
        assert part.to_text() == "1,2;3"

    @pytest.mark.parametrize(
        "blocks",
        [[[0, 1], [1, 2]], [[0], [2]], [[0, 1], []], [[0, 1, 3], [2]]],
        ids=["overlap", "gap", "empty", "out-of-range"],
    )
    def test_invalid_partitions(self, blocks):
        with pytest.raises(PartitionError):
            validate_partition(blocks, 3)

    def test_parse_any_order(self):
        assert parse_partition("3;2,1", 3) == p([1, 2], [3])
        with pytest.raises(PartitionError):
            parse_partition("1,x", 2)


class TestExistence:
    def test_t1(self, t1):
        assert mle_exists(t1, SAT)
        assert mle_exists(t1, IND)

    def test_missing_cell(self):
        table = SparseTable.from_cells({"00": 5, "01": 3, "10": 2})
        assert not mle_exists(table, SAT)
        assert mle_exists(table, IND)

    def test_oversized_generator_fails_fast(self):
        # R = 7 < 2**3, so no 3-clique can be filled
        rng = np.random.default_rng(3)
        table = ingest_matrix(rng.integers(0, 2, size=(7, 3)))
        assert not mle_exists(table, CliquePartition.saturated(3))

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_matches_oracle_and_refinement_monotone(self, seed):
        rng = np.random.default_rng(seed)
        n_vars = int(rng.integers(2, 6))
        table = ingest_matrix(random_rows(rng, int(rng.integers(5, 60)), n_vars))
        rows = expand_rows(table)
        parts = list(enumerate_all_partitions(n_vars))
        status = {m: mle_exists(table, m) for m in parts}
        for m, ok in status.items():
            assert ok == oracle_mle_exists(rows, m.cliques)
        # splitting a generator keeps existence
        for m, ok in status.items():
            if not ok:
                continue
            for j, c in enumerate(m.cliques):
                if len(c) > 1:
                    finer = CliquePartition.from_blocks(m.cliques[:j] + ((c[0],), c[1:]) + m.cliques[j + 1 :])
                    assert status[finer]


class TestCellProbability:
    def test_independence_t1(self, t1):
        assert cell_probability(t1, IND, "00") == pytest.approx(0.48, rel=1e-12)
        assert cell_probability(t1, IND, "11") == pytest.approx(0.08, rel=1e-12)

    def test_saturated_returns_empirical_frequency(self, t1):
        assert cell_probability(t1, SAT, "01") == pytest.approx(0.3, rel=1e-12)

    def test_invalid_model_raises(self):
        table = SparseTable.from_cells({"00": 5, "01": 3, "10": 2})
        with pytest.raises(ModelInvalidError):
            cell_probability(table, SAT, "00")

    @pytest.mark.parametrize(
        "model, x, expected",
        [(IND, "00", math.log(4.8)), (SAT, "00", math.log(5)), (IND, "10", math.log(1.2))],
    )
    def test_log_mean_cell(self, t1, model, x, expected):
        assert log_mean_cell(t1, model, x) == pytest.approx(expected, rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_normalization_product_form_and_prop1(self, seed):
        rng = np.random.default_rng(seed)
        n_vars = int(rng.integers(2, 7))
        table = ingest_matrix(random_rows(rng, 300, n_vars))
        valid = [m for m in enumerate_all_partitions(n_vars) if mle_exists(table, m)]
        model = valid[int(rng.integers(len(valid)))]
        pats = np.array(all_patterns(n_vars), dtype=np.uint8)
        probs = np.exp(log_cell_probabilities(table, model, pats))
        assert math.fsum(probs) == pytest.approx(1.0, abs=1e-9)
        assert np.all(probs > 0)
        r = table.total
        rows = expand_rows(table)
        for x, px in zip(pats, probs):
            expected = oracle_cell_probability(rows, model.cliques, tuple(x))
            assert px == pytest.approx(expected, rel=1e-12)
            assert log_mean_cell(table, model, x) == pytest.approx(math.log(r) + math.log(px), rel=1e-12, abs=1e-12)
        # fitted joint over variables in two different generators factorizes
        if len(model.cliques) >= 2:
            d1, d2 = model.cliques[0][0], model.cliques[1][-1]
            joint = {}
            for x, px in zip(pats, probs):
                key = (x[d1], x[d2])
                joint[key] = joint.get(key, 0.0) + px
            m1 = {a: sum(v for k, v in joint.items() if k[0] == a) for a in (0, 1)}
            m2 = {b: sum(v for k, v in joint.items() if k[1] == b) for b in (0, 1)}
            for (a, b), v in joint.items():
                assert v == pytest.approx(m1[a] * m2[b], rel=1e-9)


class TestLikelihoodAndBIC:
    def test_loglik_t1_saturated(self, t1):
        assert log_likelihood(t1, SAT) == pytest.approx(LOGLIK_T1_SAT, rel=1e-12)

    def test_loglik_single_variable(self):
        table = SparseTable.from_cells({"0": 4, "1": 6})
        expected = 4 * math.log(0.4) + 6 * math.log(0.6)
        assert log_likelihood(table, CliquePartition.singletons(1)) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize(
        "model, expected",
        [(p([1], [2]), 3), (p([1, 2]), 4), (p([1, 2, 3], [4]), 9)],
    )
    def test_param_count(self, model, expected):
        assert param_count(model) == expected

    def test_bic_t1(self, t1):
        assert bic(t1, IND) == pytest.approx(BIC_T1_IND, rel=1e-12)
        assert bic(t1, SAT) == pytest.approx(BIC_T1_SAT, rel=1e-12)
        rows = expand_rows(t1)
        assert oracle_bic(rows, IND.cliques) == pytest.approx(BIC_T1_IND, rel=1e-12)

    def test_bic_scaled_t1(self):
        scaled = SparseTable.from_cells({"00": 50, "01": 30, "10": 10, "11": 10})
        # hand values: -672.535708530165 (independence), -668.9568664183535 (saturated)
        assert bic(scaled, IND) == pytest.approx(-672.535708530165, rel=1e-12)
        assert bic(scaled, SAT) == pytest.approx(-668.9568664183535, rel=1e-12)
        assert bic(scaled, IND) < bic(scaled, SAT)

    def test_bic_invalid_model(self):
        table = SparseTable.from_cells({"00": 5, "01": 3, "10": 2})
        with pytest.raises(ModelInvalidError):
            bic(table, SAT)
        assert score(table, SAT).bic == math.inf
        assert not score(table, SAT).mle_exists

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_bic_three_ways(self, seed):
        rng = np.random.default_rng(seed)
        n_vars = int(rng.integers(1, 6))
        table = ingest_matrix(random_rows(rng, int(rng.integers(20, 200)), n_vars))
        rows = expand_rows(table)
        scorer = CliqueScorer(table)
        r = table.total
        for model in enumerate_all_partitions(n_vars):
            if not mle_exists(table, model):
                continue
            direct = oracle_bic(rows, model.cliques)
            via_mean = -2 * math.fsum(
                c * log_mean_cell(table, model, x) for x, c in zip(table.patterns, table.counts)
            ) + param_count(model) * math.log(r)
            via_loglik = -2 * (log_likelihood(table, model) + r * math.log(r)) + param_count(model) * math.log(r)
            value = bic(table, model)
            assert value == pytest.approx(direct, rel=1e-9, abs=1e-9)
            assert value == pytest.approx(via_mean, rel=1e-9, abs=1e-9)
            assert value == pytest.approx(via_loglik, rel=1e-9, abs=1e-9)
            assert scorer(model).bic == value

    def test_saturated_has_largest_loglik(self):
        rng = np.random.default_rng(11)
        table = ingest_matrix(random_rows(rng, 400, 4))
        sat = log_likelihood(table, CliquePartition.saturated(4))
        for model in enumerate_all_partitions(4):
            if mle_exists(table, model):
                assert log_likelihood(table, model) <= sat + 1e-9

    def test_skewed_counts_stay_finite(self):
        rng = np.random.default_rng(5)
        pats = rng.integers(0, 2, size=(400, 10))
        cells = {"".join(map(str, r)): int(rng.integers(1, 6)) for r in pats}
        cells["0" * 10] = 332_117
        cells["1" * 10] = 10**9
        table = SparseTable.from_cells(cells)
        value = bic(table, CliquePartition.singletons(10))
        assert math.isfinite(value)


class TestCounting:
    def test_p100(self):
        assert count_clique_models(100) == 190_569_292

    @pytest.mark.parametrize("n, expected", [(1, 1), (2, 2), (3, 3), (4, 5), (5, 7), (10, 42)])
    def test_small_values_by_enumeration(self, n, expected):
        # partitions of n into positive parts, counted by brute force
        def parts(m, largest):
            if m == 0:
                return 1
            return sum(parts(m - k, k) for k in range(1, min(m, largest) + 1))

        assert parts(n, n) == expected
        assert count_clique_models(n) == expected

    def test_p200(self):
        value = count_clique_models(200)
        assert f"{value:.3e}" == "3.973e+12"

    def test_p1000_known_value(self):
        # OEIS A000041
        assert count_clique_models(1000) == 24061467864032622473692149727991

    @pytest.mark.parametrize("n, bell", [(1, 1), (3, 5), (4, 15), (6, 203)])
    def test_enumeration_counts(self, n, bell):
        parts = list(enumerate_all_partitions(n))
        assert len(parts) == len(set(parts)) == bell == bell_number(n)
        for part in parts:
            assert validate_partition(part.cliques, n) == part

    def test_enumeration_single(self):
        assert list(enumerate_all_partitions(1)) == [CliquePartition(((0,),))]

    def test_enumeration_guard(self):
        with pytest.raises(GuardError):
            enumerate_all_partitions(13)

    def test_count_is_fast(self):
        start = time.perf_counter()
        count_clique_models(200)
        assert time.perf_counter() - start < 1.0
