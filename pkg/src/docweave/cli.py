"""Command line entry points.

Four subcommands:

  analyze    parse a repository and export its dependency graph and
             generation order, no backend involved
  generate   run the documentation loop, writing docs/ plus the memory
             and trajectory logs and a summary.json
  evaluate   score existing documentation and render the report table
             and figures
  inspect    print the contents of a memory log, read-only

Exit codes follow sysexits where one applies: 66 unusable input, 69 a
backend kept failing, 78 bad configuration, 70 an internal invariant
broke. generate exits with the number of flagged units, capped at 63,
so scripts can tell a clean run from a degraded one without parsing
output.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

from . import __version__, agent, depgraph, metrics, report
from .backends import MOCK_ENDPOINT, make_backends
from .config import RunConfig, build_config
from .errors import BackendError, ConfigError, DocweaveError, InputError
from .memory import PERSIST_FILENAME, MemoryStore
from .source_model import extract_dependencies, parse_repository

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 66
EXIT_BACKEND = 69
EXIT_INTERNAL = 70
EXIT_CONFIG = 78
MAX_FLAGGED_EXIT = 63

GRAPH_FILENAME = "graph_order.tsv"
TRAJECTORY_FILENAME = "trajectory.log"
SUMMARY_FILENAME = "summary.json"
DOCS_DIRNAME = "docs"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--repo", help="path to the repository to document")
    parser.add_argument("--out", help="output directory (default docweave_out)")
    parser.add_argument("--config", help="flat KEY=VALUE config file")
    parser.add_argument(
        "--ignore",
        action="append",
        help="directory name to skip during parsing; repeatable, comma-separated "
        "values allowed; replaces the built-in ignore list",
    )


def _add_loop_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-steps", type=int, help="agent turns per unit")
    parser.add_argument(
        "--max-revisions", type=int, help="failed-verification rewrites per unit"
    )
    parser.add_argument(
        "--verify-threshold", type=float, help="score a draft must reach to pass"
    )
    parser.add_argument(
        "--nli-threshold",
        type=float,
        help="entailment below this marks a claim as conflicting",
    )
    parser.add_argument(
        "--generator-endpoint",
        help=f"text generation endpoint URL, or {MOCK_ENDPOINT!r}",
    )
    parser.add_argument(
        "--entailment-endpoint",
        help=f"entailment scoring endpoint URL, or {MOCK_ENDPOINT!r}",
    )
    parser.add_argument(
        "--search-endpoint", help=f"web search endpoint URL, or {MOCK_ENDPOINT!r}"
    )
    parser.add_argument(
        "--offline",
        action="store_true",
        default=None,
        help="use deterministic built-in mocks, no network",
    )
    parser.add_argument(
        "--resume",
        action="store_true",
        default=None,
        help="continue from an existing memory log, skipping finished units",
    )
    parser.add_argument(
        "--strict-conflicts",
        action="store_true",
        default=None,
        help="flag a claim only when contradiction dominates against every reference",
    )
    parser.add_argument(
        "--no-memory",
        dest="memory_enabled",
        action="store_false",
        default=None,
        help="disable memory retrieval; every read goes back to the codebase",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docweave",
        description="Generate and score repository documentation bottom-up.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser(
        "analyze", help="export the dependency graph and generation order"
    )
    _add_common(p_analyze)

    p_generate = sub.add_parser("generate", help="run the documentation loop")
    _add_common(p_generate)
    _add_loop_flags(p_generate)

    p_evaluate = sub.add_parser("evaluate", help="score documentation completeness")
    _add_common(p_evaluate)
    p_evaluate.add_argument(
        "--docs", help="directory holding the documents (default <out>/docs)"
    )

    p_inspect = sub.add_parser("inspect", help="print a memory log")
    _add_common(p_inspect)
    p_inspect.add_argument(
        "--log", help=f"memory log path (default <out>/{PERSIST_FILENAME})"
    )
    return parser


def _cli_values(args: argparse.Namespace) -> dict[str, object]:
    values = dict(vars(args))
    values.pop("command", None)
    values.pop("config", None)
    values.pop("docs", None)
    values.pop("log", None)
    ignore = values.get("ignore")
    if ignore is not None:
        flattened: list[str] = []
        for chunk in ignore:
            flattened.extend(part.strip() for part in chunk.split(",") if part.strip())
        values["ignore"] = tuple(flattened)
    return values


def _require_repo(config: RunConfig) -> str:
    if not config.repo:
        raise ConfigError("no repository given; pass --repo or set DOCWEAVE_REPO")
    return config.repo


def _build_model(config: RunConfig):
    model = parse_repository(_require_repo(config), ignore=set(config.ignore))
    deps = extract_dependencies(model.components)
    graph = depgraph.build_graph(model.components, model.modules, model.repo, deps)
    order = depgraph.traversal_order(graph)
    problems = depgraph.validate_order(graph, order)
    if problems:
        raise DocweaveError(
            "computed order violates its own invariants: " + "; ".join(problems)
        )
    return model, graph, order


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(args: argparse.Namespace, config: RunConfig) -> int:
    model, graph, order = _build_model(config)
    _, scc = depgraph.condense_scc(graph)
    os.makedirs(config.out, exist_ok=True)
    table_path = os.path.join(config.out, GRAPH_FILENAME)
    with open(table_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(("position", "unit", "granularity", "scc", "dependencies"))
        for position, unit_id in enumerate(order.sequence):
            writer.writerow(
                (
                    position,
                    unit_id,
                    graph.granularity[unit_id],
                    scc.node_to_super[unit_id],
                    ",".join(graph.successors(unit_id)),
                )
            )
    print(f"repository: {os.path.abspath(_require_repo(config))}")
    print(f"components: {order.n_components}")
    print(f"modules: {order.n_modules}")
    print(f"units: {len(order.sequence)}")
    print(f"order: {table_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate


def _open_memory(config: RunConfig, log_path: str) -> MemoryStore:
    if os.path.exists(log_path) and os.path.getsize(log_path) > 0:
        if not config.resume:
            raise InputError(
                f"memory log already exists: {log_path}; pass --resume to "
                "continue it, or remove it for a fresh run"
            )
        return MemoryStore.restore(log_path, attach=True)
    return MemoryStore(log_path)


def cmd_generate(args: argparse.Namespace, config: RunConfig) -> int:
    model, graph, order = _build_model(config)
    os.makedirs(config.out, exist_ok=True)
    log_path = os.path.join(config.out, PERSIST_FILENAME)
    memory = _open_memory(config, log_path)
    backends = make_backends(
        config.generator_endpoint,
        config.entailment_endpoint,
        config.search_endpoint,
        offline=config.offline,
        timeout=config.timeout,
        retries=config.retries,
    )
    cfg = agent.LoopConfig(
        max_steps=config.max_steps,
        max_revisions=config.max_revisions,
        verify_threshold=config.verify_threshold,
        nli_threshold=config.nli_threshold,
        strict_conflicts=config.strict_conflicts,
        memory_enabled=config.memory_enabled,
        throttle=config.commit_delay,
    )
    trajectory = agent.TrajectoryLogger(os.path.join(config.out, TRAJECTORY_FILENAME))
    docs_dir = os.path.join(config.out, DOCS_DIRNAME)
    try:
        summary = agent.run_trajectory(
            model, graph, order, memory, backends, cfg,
            docs_dir=docs_dir, trajectory=trajectory,
        )
    finally:
        trajectory.close()
        memory.close()

    summary_path = os.path.join(config.out, SUMMARY_FILENAME)
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "total_units": summary.total_units,
                "n_components": order.n_components,
                "n_modules": order.n_modules,
                "generated": summary.generated,
                "resumed": summary.resumed,
                "flagged": list(summary.flagged),
                "codebase_reads": summary.codebase_reads,
                "memory_hits": summary.memory_hits,
                "codebase_read_targets": list(summary.codebase_read_targets),
            },
            fh,
            indent=2,
        )
        fh.write("\n")

    print(
        f"units: {summary.total_units} ({order.n_components} components, "
        f"{order.n_modules} modules, 1 repository)"
    )
    print(
        f"generated: {summary.generated}  resumed: {summary.resumed}  "
        f"flagged: {len(summary.flagged)}"
    )
    print(
        f"codebase reads: {summary.codebase_reads}  "
        f"memory hits: {summary.memory_hits}"
    )
    for unit_id in summary.flagged:
        print(f"flagged: {unit_id}")
    print(f"docs: {docs_dir}")
    print(f"memory log: {log_path}")
    print(f"summary: {summary_path}")
    return min(len(summary.flagged), MAX_FLAGGED_EXIT)


# ---------------------------------------------------------------------------
# evaluate


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    model, graph, order = _build_model(config)
    docs_dir = args.docs or os.path.join(config.out, DOCS_DIRNAME)
    if not os.path.isdir(docs_dir):
        raise InputError(f"documentation directory not found: {docs_dir}")

    scores = []
    missing = 0
    for unit_id in order.sequence:
        path = agent.doc_path(docs_dir, unit_id, graph.granularity[unit_id])
        if os.path.isfile(path):
            with open(path, encoding="utf-8") as fh:
                document = fh.read()
        else:
            missing += 1
            document = ""
        scores.append(metrics.completeness(document, unit_id, model))
    if missing:
        logger.warning("%d of %d documents missing, scored as empty", missing, len(scores))

    table_path = report.write_report(scores, config.out)
    figure_paths = report.render_figures(scores, config.out)

    overall = sum(s.combined for s in scores) / len(scores)
    sections = sum(s.section_score for s in scores) / len(scores)
    coverage = sum(s.coverage_score for s in scores) / len(scores)
    print(f"units scored: {len(scores)} ({missing} missing)")
    print(f"mean section score: {sections:.4f}")
    print(f"mean entity coverage: {coverage:.4f}")
    print(f"mean completeness: {overall:.4f}")
    print(f"report: {table_path}")
    for path in figure_paths:
        print(f"figure: {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect


def _print_store(title: str, records: dict) -> None:
    if not records:
        return
    print(f"{title} ({len(records)}):")
    for key in sorted(records):
        record = records[key]
        mark = "  FLAGGED" if record.below_threshold else ""
        print(
            f"  {key}  score={record.verification_score:.3f}  seq={record.seq}  "
            f"claims={len(record.claims)}  chars={len(record.document)}{mark}"
        )


def cmd_inspect(args: argparse.Namespace, config: RunConfig) -> int:
    log_path = args.log or os.path.join(config.out, PERSIST_FILENAME)
    if not os.path.isfile(log_path):
        raise InputError(f"memory log not found: {log_path}")
    store = MemoryStore.restore(log_path, attach=False)
    print(f"memory log: {log_path}")
    if len(store) == 0:
        print("no records")
    else:
        _print_store("components", store.components)
        _print_store("modules", store.modules)
        _print_store("repositories", store.repos)
        if store.search_cache:
            print(f"search cache entries: {len(store.search_cache)}")
        if store.source_cache:
            print(f"source notes: {len(store.source_cache)}")
    if store.restore_skipped:
        print(f"skipped corrupt lines: {store.restore_skipped}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


_COMMANDS = {
    "analyze": cmd_analyze,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "inspect": cmd_inspect,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = build_config(_cli_values(args), config_path=args.config)
        return _COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BackendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except DocweaveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
