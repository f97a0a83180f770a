#!/usr/bin/env python
"""Command-line interface of the gadget-chain miner.

Each subcommand runs the pipeline up to one stage and writes that stage's
dump, so later stages can be re-run from an earlier stage's output:

    ingest        class models          (--out ingest.json)
    graph         call graph            (inputs, or an ingest dump as input)
    find-chains   candidate chains      (--graph graph.json to skip rebuilding)
    gen-objects   object plans          (--graph graph.json, --chains chains.json)
    verify        verification results  (--graph graph.json, --chains chains.json)
    report        full pipeline report  (--format json|text)
    metrics       precision/recall      (--known known.yaml [--results results.json])
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import yaml

from src import __version__
from src.analysis.dacg import DaCg
from src.classmodel.model_ir import class_models_to_ir
from src.common.analysis_config import AnalysisConfig
from src.common.config import Config, get_config
from src.common.config_validator import ConfigValidator
from src.common.errors import EXIT_INPUT, EXIT_OK, EXIT_USAGE, AnalysisError, UsageError
from src.common.logger import set_package_level, setup_logger
from src.common.stage_dump import StageDumpWriter, load_dump
from src.search.chain_search import GadgetChain
from src.tools.pipeline import (
    build_graph,
    ingest_inputs,
    load_knowledge_base,
    run_pipeline,
    search_chains,
)
from src.tools.report import REPORT_FORMATS, emit_report
from src.verification.metrics import compute_metrics, load_known_chains
from src.verification.object_gen import assign_values, generate_initial_plan
from src.verification.verifier import VerificationResult, unverified, verify_chains

logger = setup_logger(__name__, "deserchain.log")


class ArgumentParser(argparse.ArgumentParser):
    """Parser that reports bad usage as UsageError instead of exiting."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "inputs", nargs="*", help="Classfiles, archives, IR documents (.yaml) or ingest dumps"
    )
    parser.add_argument("--config", help="Path to config.yaml (default: config/config.yaml)")
    parser.add_argument("--out", help="Write output to this file instead of stdout")
    parser.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")
    parser.add_argument("--no-timestamps", action="store_true", help="Omit timestamps")
    parser.add_argument(
        "--max-classfile-version", type=int, help="Highest accepted classfile major version"
    )
    parser.add_argument("--workers", type=int, help="Worker threads for every parallel stage")
    parser.add_argument(
        "--custom-deser-prefix",
        action="append",
        dest="custom_deser_prefixes",
        help="Treat classes under this package prefix as deserializable (repeatable)",
    )
    parser.add_argument(
        "--no-overrides", action="store_true", help="Build the call graph without OVERRIDES edges"
    )
    parser.add_argument("--kb", help="Knowledge base file")
    parser.add_argument("--kb-mode", choices=["merge", "replace"], help="How --kb is applied")
    parser.add_argument("--max-len", type=int, help="Maximum gadgets per chain")
    parser.add_argument("--max-chains", type=int, help="Maximum number of chains")
    parser.add_argument("--per-pair-cap", type=int, help="Maximum chains per (source, sink)")
    parser.add_argument("--seed", type=int, help="Base seed of the verification search")
    parser.add_argument("--max-iters", type=int, help="Verification iterations per chain")
    parser.add_argument(
        "--timeout-secs", type=float, help="Verification time per chain (0 disables)"
    )
    parser.add_argument("--skip-verify", action="store_true", help="Report chains unverified")
    parser.add_argument("--graph", help="Graph dump to use instead of rebuilding the graph")
    parser.add_argument("--chains", help="Chains dump to use instead of searching")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="deserchain",
        description="Mine and verify Java deserialization gadget chains",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", parser_class=ArgumentParser)
    subparsers.required = True

    commands: dict[str, tuple[str, Callable[[argparse.Namespace, AnalysisConfig], int]]] = {
        "ingest": ("Dump class models", cmd_ingest),
        "graph": ("Dump the call graph", cmd_graph),
        "find-chains": ("Dump candidate chains", cmd_find_chains),
        "gen-objects": ("Dump object plans for chains", cmd_gen_objects),
        "verify": ("Dump verification results", cmd_verify),
        "report": ("Run the full pipeline and print the report", cmd_report),
        "metrics": ("Compare verified chains with known chains", cmd_metrics),
    }
    for name, (help_text, handler) in commands.items():
        sub = subparsers.add_parser(name, help=help_text)
        _add_common_arguments(sub)
        sub.set_defaults(handler=handler)
        if name == "report":
            sub.add_argument("--format", choices=REPORT_FORMATS, dest="output_format")
            sub.add_argument("--known", help="Known chains file for precision/recall")
        if name == "metrics":
            sub.add_argument("--known", required=True, help="Known chains file (YAML)")
            sub.add_argument("--results", help="Results dump (default: run the pipeline)")
    return parser


def analysis_config(args: argparse.Namespace, settings: Config) -> AnalysisConfig:
    """
    Resolve run settings from the config file and command-line flags.

    Args:
        args: Parsed arguments
        settings: Loaded configuration

    Returns:
        Analysis configuration with flags taking precedence
    """
    workers = args.workers
    config = AnalysisConfig.from_config(
        settings,
        inputs=tuple(args.inputs),
        kb_path=args.kb,
        kb_mode=args.kb_mode,
        custom_deser_prefixes=(
            tuple(args.custom_deser_prefixes) if args.custom_deser_prefixes else None
        ),
        max_len=args.max_len,
        max_chains=args.max_chains,
        per_pair_cap=args.per_pair_cap,
        overrides_enabled=False if args.no_overrides else None,
        output_path=args.out,
        output_format=getattr(args, "output_format", None),
        max_classfile_version=args.max_classfile_version,
        ingest_workers=workers,
        search_workers=workers,
        verify_workers=workers,
        known_chains_path=getattr(args, "known", None),
        skip_verify=True if args.skip_verify else None,
        include_timestamps=False if args.no_timestamps else None,
    )
    budget: dict[str, Any] = {}
    if args.seed is not None:
        budget["seed"] = args.seed
    if args.max_iters is not None:
        budget["max_iterations"] = args.max_iters
    if args.timeout_secs is not None:
        budget["wall_clock_seconds"] = args.timeout_secs if args.timeout_secs > 0 else None
    return config.with_budget(**budget) if budget else config


def _load_settings(path: Optional[str]) -> Config:
    """Configuration from --config, or the shared instance."""
    if not path:
        return get_config()
    try:
        return Config(path)
    except (OSError, yaml.YAMLError) as e:
        raise UsageError(f"Cannot load configuration {path}: {e}") from e


def _require_inputs(config: AnalysisConfig, command: str) -> None:
    if not config.inputs:
        raise UsageError(f"{command} needs at least one input")


def _emit(text: str, config: AnalysisConfig) -> None:
    if config.output_path:
        out = Path(config.output_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(text)


def _dump(stage: str, data: Any, metadata: dict, config: AnalysisConfig) -> None:
    writer = StageDumpWriter(stage, include_timestamp=config.include_timestamps)
    _emit(writer.dumps(data, metadata), config)


def _load_graph(args: argparse.Namespace, config: AnalysisConfig):
    """(hierarchy or None, graph, warnings) from --graph or from the inputs."""
    if args.graph:
        envelope = load_dump(args.graph, expected_stage="graph")
        return None, DaCg.from_dict(envelope["data"]), []
    _require_inputs(config, args.command)
    ingest = ingest_inputs(config.inputs, config)
    graph = build_graph(ingest.classes, config)
    return graph.hierarchy, graph.graph, ingest.warnings + graph.warnings


def _load_chains(args: argparse.Namespace, config: AnalysisConfig, g: DaCg) -> list[GadgetChain]:
    if args.chains:
        envelope = load_dump(args.chains, expected_stage="chains")
        return [GadgetChain.from_dict(c) for c in envelope["data"]["chains"]]
    return search_chains(g, load_knowledge_base(config), config).chains


def cmd_ingest(args: argparse.Namespace, config: AnalysisConfig) -> int:
    _require_inputs(config, "ingest")
    ingest = ingest_inputs(config.inputs, config)
    metadata = {
        "inputs": list(config.inputs),
        "class_count": len(ingest.classes),
        "warnings": [w.to_dict() for w in ingest.warnings],
    }
    _dump("ingest", class_models_to_ir(ingest.classes), metadata, config)
    return EXIT_OK


def cmd_graph(args: argparse.Namespace, config: AnalysisConfig) -> int:
    _, g, warnings = _load_graph(args, config)
    metadata = {"stats": g.stats().to_dict(), "warnings": [w.to_dict() for w in warnings]}
    _dump("graph", g.to_dict(), metadata, config)
    return EXIT_OK


def cmd_find_chains(args: argparse.Namespace, config: AnalysisConfig) -> int:
    _, g, _ = _load_graph(args, config)
    result = search_chains(g, load_knowledge_base(config), config)
    data = {"chains": [c.to_dict() for c in result.chains], "truncated": result.truncated}
    _dump("chains", data, {"chain_count": len(result.chains)}, config)
    return EXIT_OK


def _hierarchy_and_chains(args: argparse.Namespace, config: AnalysisConfig):
    """Hierarchy from the inputs, graph from --graph if given, chains from --chains or a search."""
    _require_inputs(config, args.command)
    ingest = ingest_inputs(config.inputs, config)
    graph = build_graph(ingest.classes, config)
    g = graph.graph
    if args.graph:
        _, g, _ = _load_graph(args, config)
        logger.info(f"Using call graph from {args.graph}")
    return graph.hierarchy, g, _load_chains(args, config, g)


def cmd_gen_objects(args: argparse.Namespace, config: AnalysisConfig) -> int:
    h, _, chains = _hierarchy_and_chains(args, config)
    entries = []
    for index, chain in enumerate(chains):
        entry: dict[str, Any] = {"index": index, "chain": chain.to_dict()}
        try:
            plan = assign_values(generate_initial_plan(chain, h, config), chain, h, config, False)
            entry["plan"] = plan.to_dict()
            entry["error"] = None
        except AnalysisError as e:
            entry["plan"] = None
            entry["error"] = str(e)
        entries.append(entry)
    _dump("plans", entries, {"chain_count": len(chains)}, config)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, config: AnalysisConfig) -> int:
    h, g, chains = _hierarchy_and_chains(args, config)
    if config.skip_verify:
        results = [unverified(c) for c in chains]
    else:
        results = verify_chains(chains, g, h, config)
    _dump("results", [r.to_dict() for r in results], {"chain_count": len(results)}, config)
    return EXIT_OK


def cmd_report(args: argparse.Namespace, config: AnalysisConfig) -> int:
    _require_inputs(config, "report")
    report = run_pipeline(config)
    _emit(emit_report(report, config.output_format).decode("utf-8"), config)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace, config: AnalysisConfig) -> int:
    if args.results:
        envelope = load_dump(args.results, expected_stage="results")
        results = [VerificationResult.from_dict(r) for r in envelope["data"]]
        metrics = compute_metrics(results, load_known_chains(args.known))
    else:
        _require_inputs(config, "metrics")
        metrics = run_pipeline(config).metrics
    assert metrics is not None
    _emit(json.dumps(metrics.to_dict(), indent=2) + "\n", config)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point.

    Returns:
        0 when the run completed (whatever it found), 1 for usage or
        configuration errors, 2 for input or schema errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verbose:
            set_package_level("DEBUG")
        settings = _load_settings(args.config)
        config = analysis_config(args, settings)
        ConfigValidator.validate(config, check_inputs=False)
        return args.handler(args, config)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (AnalysisError, OSError) as e:
        logger.error(f"Analysis failed: {e}", exc_info=True)
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
