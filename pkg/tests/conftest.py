import itertools
import math
from collections import Counter

import numpy as np
import pytest

from cliquebma.contingency import SparseTable

T1_CELLS = {"00": 5, "01": 3, "10": 1, "11": 1}


@pytest.fixture
def t1():
    return SparseTable.from_cells(T1_CELLS)


# --------------------------------------------------------------------------
# brute-force oracles shared by several test modules; they work on expanded
# rows with plain Python loops and never touch the package's marginal code


def expand_rows(table):
    return [tuple(int(v) for v in p) for p, c in zip(table.patterns, table.counts) for _ in range(int(c))]


def oracle_marginal(rows, subset):
    return Counter(tuple(r[i] for i in subset) for r in rows)


def oracle_cell_probability(rows, cliques, x):
    n = len(rows)
    prob = 1.0
    for c in cliques:
        prob *= oracle_marginal(rows, c)[tuple(x[i] for i in c)] / n
    return prob


def oracle_bic(rows, cliques):
    """Direct BIC: -2 sum_{n(x)>0} n(x) log m(x) + (sum 2^|C| - k + 1) log R."""
    n = len(rows)
    cells = Counter(rows)
    total = 0.0
    for x, cnt in cells.items():
        m = n * oracle_cell_probability(rows, cliques, x)
        total += cnt * math.log(m)
    k = len(cliques)
    params = sum(2 ** len(c) for c in cliques) - k + 1
    return -2.0 * total + params * math.log(n)


def oracle_mle_exists(rows, cliques):
    return all(len(oracle_marginal(rows, c)) == 2 ** len(c) for c in cliques)


def all_patterns(n_vars):
    return [tuple(p) for p in itertools.product((0, 1), repeat=n_vars)]


def random_rows(rng, n_rows, n_vars, dependence=0.3):
    """Random binary rows with some pairwise dependence between neighbours."""
    base = rng.random((n_rows, n_vars)) < rng.uniform(0.2, 0.7, size=n_vars)
    for j in range(1, n_vars):
        copy = rng.random(n_rows) < dependence * rng.random()
        base[copy, j] = base[copy, j - 1]
    return base.astype(np.uint8)


# --------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the summary

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): exit criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    label = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.failed):
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        detail = getattr(item, "acceptance_detail", "")
        _ACCEPTANCE[label] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0])):
        status, detail = _ACCEPTANCE[label]
        line = f"{status}  criterion {label}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
