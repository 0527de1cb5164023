"""Command-line pipeline.

Every subcommand writes its outputs into ``--output-dir`` under fixed names
together with a ``manifest.json`` that records the exact argument vector,
so ``cliquebma replay manifest.json`` regenerates the same files.

Exit codes: 0 success, 2 input error, 3 no valid model, 4 internal error.
Errors are reported on stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .cliquemodel import bell_number, count_clique_models
from .contingency import (
    SparseTable,
    format_cells,
    read_binary_matrix,
    read_cells,
    read_count_matrix,
)
from .exceptions import CliqueBMAError, InputError, LabelMismatchError, NoValidModelError
from .graphio import (
    Graph,
    bag_from_json,
    bma_graph,
    connectivity_graph,
    degree_report,
    degrees_csv,
    edges_csv,
    existence_csv,
    export_dot,
    export_json,
    graph_diff,
    prune_isolated,
    read_edges_csv,
    traces_csv,
    write_text,
)
from .posterior import edge_probabilities, existence_probabilities, occams_window, threshold_edges
from .search import SearchConfig, run_search
from .synth import generate, inject_noise, load_spec, variable_names

logger = logging.getLogger("cliquebma")

EXIT_OK, EXIT_INPUT, EXIT_NO_MODEL, EXIT_INTERNAL = 0, 2, 3, 4


class Run:
    """Collects outputs of one subcommand and writes the manifest last."""

    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = Path(args.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: list[dict] = []
        self.outputs: list[str] = []
        self.extra: dict = {}
        self.started = time.perf_counter()

    def input(self, path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise InputError(f"input file not found: {path}")
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.inputs.append({"path": str(path), "sha256": digest})
        return path

    def write(self, name: str, text: str) -> None:
        write_text(self.out / name, text)
        self.outputs.append(name)

    def finish(self, config: dict) -> None:
        manifest = {
            "command": self.args.command,
            "argv": self.argv,
            "inputs": self.inputs,
            "config": config,
            "versions": {
                "cliquebma": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
            "wall_clock_seconds": round(time.perf_counter() - self.started, 3),
            "outputs": sorted(self.outputs),
            **self.extra,
        }
        write_text(self.out / "manifest.json", json.dumps(manifest, indent=2) + "\n")


def _load_table(path: Path, fmt: str, threshold: int | None) -> SparseTable:
    if fmt == "auto":
        if threshold is not None:
            fmt = "counts"
        else:
            with open(path) as fh:
                first = next((ln for ln in fh if ln.strip() and not ln.startswith("#")), "")
            parts = first.strip().split(",")
            is_cells = len(parts) == 2 and set(parts[0]) <= {"0", "1"} and len(parts[0]) > 1 and parts[1].isdigit()
            fmt = "cells" if is_cells or str(path).endswith(".cells") else "binary"
    if fmt == "cells":
        return read_cells(path)
    if fmt == "counts":
        return read_count_matrix(path, threshold or 1)
    return read_binary_matrix(path)


def _search_config(args) -> dict:
    return {
        "chains": args.chains,
        "iterations": args.iters,
        "seed": args.seed,
        "workers": args.workers,
    }


def _preprocess(run: Run, table: SparseTable, drop_constant: bool) -> SparseTable:
    if drop_constant and table.constant_columns:
        const = set(table.constant_columns)
        dropped = [table.names[b] for b in sorted(const)]
        logger.info("dropping %d constant columns", len(dropped))
        table = table.collapse([b for b in range(table.n_vars) if b not in const])
        run.extra["dropped_constant"] = dropped
    graph = connectivity_graph(table)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        reduced, dropped = prune_isolated(table, graph)
    for w in caught:
        logger.warning("%s", w.message)
    logger.info("pruned %d isolated variables, %d remain", len(dropped), reduced.n_vars)
    run.extra["dropped_isolated"] = list(dropped)
    run.write("table.cells", format_cells(reduced))
    run.write("connectivity.dot", export_dot(graph, "connectivity"))
    run.write("connectivity.json", export_json(graph))
    run.write("degrees.csv", degrees_csv(degree_report(graph)))
    return reduced


def _search(run: Run, table: SparseTable, args):
    config = SearchConfig(
        chains=args.chains,
        iterations=args.iters,
        master_seed=args.seed,
        workers=args.workers,
    )
    result = run_search(table, config)
    run.write("bag.json", export_json(result.bag, table.names))
    run.write("traces.csv", traces_csv(result.traces))
    run.extra["hit_fraction"] = result.hit_fraction
    run.extra["best_bic"] = result.bag.best_bic
    return result.bag


def _bma(run: Run, bag, table: SparseTable, args) -> None:
    if bag.best.partition.n_vars != table.n_vars:
        raise InputError(
            f"bag models cover {bag.best.partition.n_vars} variables but the table has {table.n_vars}"
        )
    retained = occams_window(bag, args.c)
    matrix = edge_probabilities(retained, table.names)
    edges = threshold_edges(matrix, args.edge_threshold)
    report = existence_probabilities(retained, table)
    run.write("models.json", export_json(retained, table.names))
    run.write("edges.csv", edges_csv(edges, table.names))
    run.write("existence.csv", existence_csv(report))
    run.write("graph.dot", export_dot(bma_graph(edges, table.names), "bma"))
    run.extra["retained_models"] = len(retained)


def cmd_ingest(run: Run, args) -> dict:
    table = _load_table(run.input(args.input), args.format, args.binarize_threshold)
    run.write("table.cells", format_cells(table))
    run.extra["table"] = {"n_vars": table.n_vars, "total": table.total, "n_cells": table.n_cells}
    if table.constant_columns:
        run.extra["constant_columns"] = [table.names[b] for b in table.constant_columns]
    return {"format": args.format, "binarize_threshold": args.binarize_threshold}


def cmd_preprocess(run: Run, args) -> dict:
    table = _load_table(run.input(args.table), args.format, args.binarize_threshold)
    _preprocess(run, table, args.drop_constant)
    return {"drop_constant": args.drop_constant}


def cmd_search(run: Run, args) -> dict:
    table = _load_table(run.input(args.table), "cells", None)
    _search(run, table, args)
    return _search_config(args)


def cmd_bma(run: Run, args) -> dict:
    bag = bag_from_json(run.input(args.bag).read_text())
    table = _load_table(run.input(args.table), "cells", None)
    _bma(run, bag, table, args)
    return {"c": args.c, "edge_threshold": args.edge_threshold}


def cmd_pipeline(run: Run, args) -> dict:
    table = _load_table(run.input(args.input), args.format, args.binarize_threshold)
    reduced = _preprocess(run, table, args.drop_constant)
    bag = _search(run, reduced, args)
    _bma(run, bag, reduced, args)
    return {
        **_search_config(args),
        "c": args.c,
        "edge_threshold": args.edge_threshold,
        "binarize_threshold": args.binarize_threshold,
        "drop_constant": args.drop_constant,
    }


def cmd_simulate(run: Run, args) -> dict:
    spec = load_spec(run.input(args.spec))
    matrix, planted = generate(spec)
    if args.noise:
        matrix = inject_noise(matrix, args.noise, np.random.default_rng([spec.seed, 1]))
    names = variable_names(spec.n_vars)
    lines = [",".join(names)] + [",".join(map(str, row)) for row in matrix]
    run.write("matrix.csv", "\n".join(lines) + "\n")
    run.write("planted.dot", export_dot(planted, "planted"))
    run.write("planted.json", export_json(planted))
    return {**spec.to_mapping(), "noise": args.noise}


def _vertex_list(path) -> list[str]:
    with open(path) as fh:
        rows = [ln.split(",")[0].strip() for ln in fh.read().splitlines()[1:] if ln.strip()]
    return [r for r in rows if r != "__unknown__"]


def cmd_diff(run: Run, args) -> dict:
    e1 = read_edges_csv(run.input(args.edges1))
    e2 = read_edges_csv(run.input(args.edges2))
    if args.vars1 and args.vars2:
        v1, v2 = _vertex_list(run.input(args.vars1)), _vertex_list(run.input(args.vars2))
        if set(v1) != set(v2):
            raise LabelMismatchError(f"variable sets differ: {sorted(set(v1) ^ set(v2))}")
        verts = v1
    else:
        verts = sorted({v for a, b, _ in e1 + e2 for v in (a, b)})
    g1 = Graph.from_edges(verts, [(a, b) for a, b, _ in e1])
    g2 = Graph.from_edges(verts, [(a, b) for a, b, _ in e2])
    diff = graph_diff(g1, g2)
    report = {
        "only_first": [list(e) for e in sorted(diff.only_first)],
        "only_second": [list(e) for e in sorted(diff.only_second)],
        "shared": [list(e) for e in sorted(diff.shared)],
    }
    text = json.dumps(report, separators=(",", ":")) + "\n"
    run.write("diff.json", text)
    sys.stdout.write(text)
    return {}


def _add_output(p):
    p.add_argument("--output-dir", default=".", help="directory for outputs (default: current)")


def _add_input_format(p):
    p.add_argument("--format", choices=("auto", "binary", "cells", "counts"), default="auto")
    p.add_argument("--binarize-threshold", type=int, default=None, help="input is a count matrix; 1 where count >= N")


def _add_search(p):
    p.add_argument("--chains", type=int, default=100)
    p.add_argument("--iters", type=int, default=100_000, help="iterations per chain")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")


def _add_bma(p):
    p.add_argument("--c", type=float, default=1e-4, help="Occam's window constant")
    p.add_argument("--edge-threshold", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cliquebma", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="aggregate a binary/count matrix into table.cells")
    p.add_argument("input")
    _add_input_format(p)
    _add_output(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("preprocess", help="build the connectivity graph and drop isolated variables")
    p.add_argument("table")
    _add_input_format(p)
    p.add_argument("--drop-constant", action="store_true", help="remove all-0/all-1 columns instead of failing")
    _add_output(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("search", help="run the stochastic model search")
    p.add_argument("table")
    _add_search(p)
    _add_output(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("bma", help="Occam's window and model averaging over a bag")
    p.add_argument("bag")
    p.add_argument("table")
    _add_bma(p)
    _add_output(p)
    p.set_defaults(func=cmd_bma)

    p = sub.add_parser("pipeline", help="preprocess, search and bma in one go")
    p.add_argument("input")
    _add_input_format(p)
    p.add_argument("--drop-constant", action="store_true")
    _add_search(p)
    _add_bma(p)
    _add_output(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("simulate", help="generate a planted-clique matrix")
    p.add_argument("spec", help="YAML/JSON generator spec")
    p.add_argument("--noise", type=float, default=0.0, help="flip 0s to 1s with this probability")
    _add_output(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("count-models", help="print the integer-partition count P(B)")
    p.add_argument("n_vars", type=int)
    p.add_argument("--labelled", action="store_true", help="print the Bell number instead")
    p.set_defaults(func=None)

    p = sub.add_parser("diff", help="compare two edges.csv files")
    p.add_argument("edges1")
    p.add_argument("edges2")
    p.add_argument("--vars1", help="existence.csv/degrees.csv listing the first run's variables")
    p.add_argument("--vars2")
    _add_output(p)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--output-dir", default=None, help="override the recorded output directory")
    p.set_defaults(func=None)
    return parser


def _replay_argv(args) -> list[str]:
    with open(args.manifest) as fh:
        argv = list(json.load(fh)["argv"])
    if args.output_dir is not None:
        cleaned, skip = [], False
        for tok in argv:
            if skip:
                skip = False
                continue
            if tok == "--output-dir":
                skip = True
                continue
            if tok.startswith("--output-dir="):
                continue
            cleaned.append(tok)
        argv = cleaned + ["--output-dir", args.output_dir]
    return argv


def _fail(code: int, exc: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "count-models":
            if args.n_vars < 1:
                raise InputError("n_vars must be >= 1")
            value = bell_number(args.n_vars) if args.labelled else count_clique_models(args.n_vars)
            print(value)
            return EXIT_OK
        if args.command == "replay":
            return main(_replay_argv(args))
        run = Run(args, argv)
        config = args.func(run, args)
        run.finish(config)
        return EXIT_OK
    except NoValidModelError as exc:
        return _fail(EXIT_NO_MODEL, exc)
    except (InputError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        return _fail(EXIT_INPUT, exc)
    except CliqueBMAError as exc:
        return _fail(EXIT_INPUT, exc)
    except Exception as exc:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        return _fail(EXIT_INTERNAL, exc)


if __name__ == "__main__":
    sys.exit(main())
