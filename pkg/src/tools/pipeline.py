"""Pipeline orchestration: ingest, hierarchy, call graph, chains, verification."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from src import __version__
from src.analysis.dacg import DaCg, EdgeKind, build_dacg
from src.analysis.hierarchy import Hierarchy, build_hierarchy
from src.classmodel.archive import parse_archive
from src.classmodel.classfile import parse_classfile
from src.classmodel.model import ClassModel
from src.classmodel.model_ir import class_models_from_dump, load_model_ir
from src.common.analysis_config import AnalysisConfig
from src.common.errors import AnalysisWarning, UsageError
from src.common.logger import setup_logger
from src.common.stage_dump import is_dump_file, load_dump
from src.knowledge.knowledge_base import (
    KnowledgeBase,
    default_kb,
    load_kb,
    locate_sink_sites,
    match_sources,
)
from src.search.chain_search import ChainLimits, ChainSearchResult, find_chains
from src.tools.report import Report
from src.verification.metrics import compute_metrics, load_known_chains
from src.verification.verifier import VerificationResult, unverified, verify_chains

logger = setup_logger(__name__)

CLASSFILE_SUFFIXES = {".class"}
ARCHIVE_SUFFIXES = {".jar", ".zip", ".war", ".ear"}
IR_SUFFIXES = {".yaml", ".yml"}


@dataclass
class IngestResult:
    classes: list[ClassModel] = field(default_factory=list)
    warnings: list[AnalysisWarning] = field(default_factory=list)


@dataclass
class GraphResult:
    hierarchy: Hierarchy
    graph: DaCg

    @property
    def warnings(self) -> list[AnalysisWarning]:
        return list(self.hierarchy.warnings) + list(self.graph.warnings)


def _expand_inputs(paths: Sequence[str]) -> list[Path]:
    expanded = []
    wanted = CLASSFILE_SUFFIXES | ARCHIVE_SUFFIXES | IR_SUFFIXES
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            expanded.extend(
                sorted(p for p in path.rglob("*") if p.is_file() and p.suffix.lower() in wanted)
            )
        else:
            expanded.append(path)
    return expanded


def ingest_inputs(paths: Sequence[str], config: Optional[AnalysisConfig] = None) -> IngestResult:
    """
    Load class models from classfiles, archives, IR documents or ingest dumps.

    Args:
        paths: Input files or directories (searched recursively)
        config: Settings (classfile version cap, ingest workers)

    Returns:
        Class models in input order plus ingest warnings

    Raises:
        UsageError: For an input with an unknown file type
        AnalysisError: For malformed inputs
    """
    config = config or AnalysisConfig()
    result = IngestResult()
    for path in _expand_inputs(paths):
        suffix = path.suffix.lower()
        if is_dump_file(str(path)):
            envelope = load_dump(str(path), expected_stage="ingest")
            result.classes.extend(class_models_from_dump(envelope["data"]))
            result.warnings.extend(
                AnalysisWarning.from_dict(w) for w in envelope["metadata"].get("warnings", [])
            )
        elif suffix in CLASSFILE_SUFFIXES:
            result.classes.append(
                parse_classfile(path.read_bytes(), max_version=config.max_classfile_version)
            )
        elif suffix in ARCHIVE_SUFFIXES:
            archive = parse_archive(
                str(path), max_version=config.max_classfile_version, workers=config.ingest_workers
            )
            result.classes.extend(archive.classes)
            result.warnings.extend(archive.warnings)
        elif suffix in IR_SUFFIXES:
            result.classes.extend(load_model_ir(path.read_text()))
        else:
            raise UsageError(f"Unsupported input type: {path}")
    logger.info(f"Ingested {len(result.classes)} classes from {len(paths)} inputs")
    return result


def build_graph(
    classes: Sequence[ClassModel], config: Optional[AnalysisConfig] = None
) -> GraphResult:
    """Class hierarchy and call graph for a set of class models."""
    config = config or AnalysisConfig()
    hierarchy = build_hierarchy(classes, config)
    return GraphResult(hierarchy, build_dacg(hierarchy, config))


def load_knowledge_base(config: Optional[AnalysisConfig] = None) -> KnowledgeBase:
    """
    Knowledge base for a run.

    Args:
        config: Settings; ``kb_path`` and ``kb_mode`` select a user file

    Returns:
        The shipped knowledge base, or the user file merged into or replacing it
    """
    config = config or AnalysisConfig()
    base = default_kb(config.base_kb_path)
    if not config.kb_path:
        return base
    return load_kb(Path(config.kb_path).read_text(), mode=config.kb_mode, base=base)


def search_chains(
    g: DaCg, kb: KnowledgeBase, config: Optional[AnalysisConfig] = None
) -> ChainSearchResult:
    """Enumerate candidate chains between knowledge-base sources and sinks."""
    config = config or AnalysisConfig()
    kinds = tuple(EdgeKind) if config.overrides_enabled else (EdgeKind.CALL,)
    limits = ChainLimits(
        max_len=config.max_len, max_chains=config.max_chains, per_pair_cap=config.per_pair_cap
    )
    return find_chains(
        g,
        match_sources(kb, g),
        locate_sink_sites(kb, g),
        limits=limits,
        workers=config.search_workers,
        edge_kinds=kinds,
    )


def run_pipeline(config: AnalysisConfig) -> Report:
    """
    Run every stage and assemble the report.

    Args:
        config: Validated analysis settings

    Returns:
        Report with graph statistics, chains and their verification results

    Raises:
        AnalysisError: On fatal input or schema errors
    """
    ingest = ingest_inputs(config.inputs, config)
    graph = build_graph(ingest.classes, config)
    kb = load_knowledge_base(config)
    search = search_chains(graph.graph, kb, config)

    results: list[VerificationResult]
    if config.skip_verify:
        results = [unverified(chain) for chain in search.chains]
    else:
        results = verify_chains(search.chains, graph.graph, graph.hierarchy, config)

    metrics = None
    if config.known_chains_path:
        metrics = compute_metrics(results, load_known_chains(config.known_chains_path))

    return Report.build(
        config=config,
        graph_stats=graph.graph.stats(),
        results=results,
        warnings=ingest.warnings + graph.warnings,
        metrics=metrics,
        truncated=search.truncated,
        tool_version=__version__,
    )
