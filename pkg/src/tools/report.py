"""Analysis report: JSON for machines, a chain-per-block listing for people."""

import datetime
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence, Union

from src.analysis.dacg import GraphStats
from src.common.analysis_config import AnalysisConfig
from src.common.errors import AnalysisWarning, DumpFormatError
from src.knowledge.knowledge_base import VULN_ORDER
from src.verification.metrics import Metrics
from src.verification.plan import ObjectPlan, PropertyAssignment
from src.verification.verifier import VerificationResult, VerificationStatus

REPORT_SCHEMA_VERSION = "1.0"
REPORT_FORMATS = ("json", "text")

# Verified means the model-level dispatch trace reaches the sink, not that an exploit ran
VERIFICATION_NOTE = "model-verified"


@dataclass
class Report:
    tool_version: str
    config: dict[str, Any]
    graph_stats: GraphStats
    results: list[VerificationResult] = field(default_factory=list)
    warnings: list[AnalysisWarning] = field(default_factory=list)
    metrics: Optional[Metrics] = None
    truncated: bool = False
    generated_at: Optional[str] = None
    schema_version: str = REPORT_SCHEMA_VERSION

    @classmethod
    def build(
        cls,
        config: AnalysisConfig,
        graph_stats: GraphStats,
        results: Sequence[VerificationResult],
        warnings: Sequence[AnalysisWarning],
        metrics: Optional[Metrics] = None,
        truncated: bool = False,
        tool_version: str = "",
    ) -> "Report":
        """
        Assemble a report from stage outputs.

        Duplicate warnings are dropped, keeping the first occurrence.
        """
        unique = list(dict.fromkeys(warnings))
        generated_at = None
        if config.include_timestamps:
            generated_at = datetime.datetime.now().isoformat()
        return cls(
            tool_version=tool_version,
            config=config.to_dict(),
            graph_stats=graph_stats,
            results=list(results),
            warnings=unique,
            metrics=metrics,
            truncated=truncated,
            generated_at=generated_at,
        )

    def status_counts(self) -> dict[str, int]:
        counts = {status.value: 0 for status in VerificationStatus}
        for result in self.results:
            counts[result.status.value] += 1
        return counts

    def vuln_counts(self) -> dict[str, dict[str, int]]:
        """Chains and verified chains per vulnerability type."""
        counts = {t.value: {"chains": 0, "verified": 0} for t in VULN_ORDER}
        for result in self.results:
            entry = counts[result.chain.vuln_type.value]
            entry["chains"] += 1
            if result.is_verified:
                entry["verified"] += 1
        return counts

    def to_dict(self) -> dict[str, Any]:
        chains = []
        for index, result in enumerate(self.results, start=1):
            entry: dict[str, Any] = {"index": index}
            entry.update(result.to_dict())
            entry["length"] = result.chain.length
            entry["dispatch_count"] = result.chain.dispatch_count
            entry["stack_trace"] = [str(frame) for frame in result.chain.stack_trace()]
            chains.append(entry)

        return {
            "schema_version": self.schema_version,
            "tool_version": self.tool_version,
            "generated_at": self.generated_at,
            "note": VERIFICATION_NOTE,
            "config": self.config,
            "graph_stats": self.graph_stats.to_dict(),
            "summary": {
                "chains": len(self.results),
                "truncated": self.truncated,
                "status": self.status_counts(),
                "vuln_types": self.vuln_counts(),
            },
            "chains": chains,
            "warnings": [w.to_dict() for w in self.warnings],
            "metrics": self.metrics.to_dict() if self.metrics else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Report":
        if data.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise DumpFormatError(
                f"Unsupported report schema version {data.get('schema_version')!r}"
            )
        metrics = data.get("metrics")
        return cls(
            tool_version=data["tool_version"],
            config=data["config"],
            graph_stats=GraphStats.from_dict(data["graph_stats"]),
            results=[VerificationResult.from_dict(c) for c in data["chains"]],
            warnings=[AnalysisWarning.from_dict(w) for w in data["warnings"]],
            metrics=Metrics.from_dict(metrics) if metrics else None,
            truncated=data["summary"]["truncated"],
            generated_at=data.get("generated_at"),
            schema_version=data["schema_version"],
        )


def _plan_lines(plan: ObjectPlan) -> list[str]:
    lines = [f"    root: {plan.root_class}"]
    bindings = plan.binding_map()

    def value_lines(path: tuple, indent: str) -> list[str]:
        return [
            f"{indent}{name} = {value.to_dict()['value']!r}"
            for (owner, name), value in sorted(bindings.items())
            if owner == path
        ]

    lines += value_lines((), "      ")

    def walk(node: PropertyAssignment, depth: int) -> None:
        indent = "    " + "  " * depth
        lines.append(f"{indent}{node.dotted}: {node.assigned_class}")
        lines.extend(value_lines(node.path, indent + "  "))
        for child in node.children:
            walk(child, depth + 1)

    for node in plan.assignments:
        walk(node, 1)
    return lines


def _ratio_text(value: Optional[Fraction]) -> str:
    return "undefined" if value is None else f"{value} ({float(value):.3f})"


def render_text(report: Report) -> str:
    """Human-readable report, one CHAIN block per chain."""
    stats = report.graph_stats
    counts = report.status_counts()
    lines = [
        f"deserchain {report.tool_version} report ({VERIFICATION_NOTE})",
    ]
    if report.generated_at:
        lines.append(f"Generated: {report.generated_at}")
    lines += [
        f"Graph: {stats.node_count} nodes, {stats.call_edge_count} call edges, "
        f"{stats.overrides_edge_count} overrides edges",
        f"Chains: {len(report.results)}"
        + (" (truncated)" if report.truncated else "")
        + " | "
        + ", ".join(f"{status} {count}" for status, count in counts.items()),
        "",
    ]

    for index, result in enumerate(report.results, start=1):
        chain = result.chain
        lines.append(
            f"CHAIN #{index} [{chain.vuln_type.value}] {result.status.value} "
            f"(coverage {result.coverage:.2f}, {result.iterations_used} iterations)"
        )
        lines.append(f"  source: {chain.source}")
        lines.append(f"  sink: {chain.sink_method}")
        if chain.sink_target is not None:
            lines.append(f"  sink call: {chain.sink_target}")
        lines.append(f"  gadgets: {chain.length}, dynamic bindings: {chain.dispatch_count}")
        for i, gadget in enumerate(chain.gadgets):
            edge = f"  --{chain.edge_kinds[i].value}-->" if i < len(chain.edge_kinds) else ""
            lines.append(f"    {i:2d} {gadget}{edge}")
        lines.append("  stack trace:")
        for frame in reversed(chain.stack_trace()):
            lines.append(f"    at {frame.owner.replace('/', '.')}.{frame.name}")
        if result.witness_plan is not None:
            lines.append("  witness:")
            lines.extend(_plan_lines(result.witness_plan))
        if result.reason:
            lines.append(f"  reason: {result.reason}")
        lines.append("")

    if report.warnings:
        lines.append("Warnings:")
        lines.extend(f"  [{w.code}] {w.message}" for w in report.warnings)
        lines.append("")

    if report.metrics is not None:
        m = report.metrics
        precision = _ratio_text(m.precision)
        recall = _ratio_text(m.recall)
        lines.append(f"Metrics: rep={m.rep} tp={m.tp} kgc={m.kgc} P={precision} R={recall}")
        lines.append("")

    return "\n".join(lines)


def emit_report(report: Report, fmt: str = "json") -> bytes:
    """
    Serialize a report.

    Args:
        report: Report to render
        fmt: ``json`` (stable schema and key order) or ``text``

    Returns:
        UTF-8 encoded report

    Raises:
        ValueError: For an unknown format
    """
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2) + "\n").encode("utf-8")
    if fmt == "text":
        return render_text(report).encode("utf-8")
    raise ValueError(f"Unknown report format {fmt!r}, expected one of {REPORT_FORMATS}")


def parse_report(data: Union[bytes, str]) -> Report:
    """
    Read back a JSON report.

    Raises:
        DumpFormatError: If the data is not a report of the supported schema
    """
    try:
        document = json.loads(data)
    except json.JSONDecodeError as e:
        raise DumpFormatError(f"Report is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise DumpFormatError("Report must be a JSON object")
    try:
        return Report.from_dict(document)
    except (KeyError, TypeError, ValueError) as e:
        raise DumpFormatError(f"Malformed report: {e}") from e
