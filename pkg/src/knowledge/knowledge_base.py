"""Knowledge base of chain sources and sinks, and matching against the call graph."""

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Optional

import yaml

from src.analysis.dacg import DaCg
from src.classmodel.model import InvokeSite, MethodId
from src.common.config import PROJECT_ROOT
from src.common.errors import KbSchemaError
from src.common.logger import setup_logger

logger = setup_logger(__name__)

DEFAULT_KB_PATH = PROJECT_ROOT / "config" / "knowledge_base.yaml"


class VulnType(Enum):
    """Vulnerability types, in the precedence order used when a method matches several."""

    RCE = "RCE"
    JNDII = "JNDIi"
    SRA = "SRA"
    SSRF = "SSRF"


VULN_ORDER = tuple(VulnType)


@lru_cache(maxsize=512)
def _glob_regex(pattern: str) -> "re.Pattern[str]":
    # Only '*' and '?' are special; '[' appears literally in descriptors
    parts = []
    for ch in pattern:
        if ch == "*":
            parts.append(".*")
        elif ch == "?":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts) + r"\Z", re.DOTALL)


def glob_match(pattern: str, text: str) -> bool:
    return _glob_regex(pattern).match(text) is not None


@dataclass(frozen=True)
class MethodPattern:
    """Method name with optional owner and descriptor globs."""

    name: str
    owner: Optional[str] = None
    descriptor: Optional[str] = None

    def matches(self, method: MethodId) -> bool:
        if method.name != self.name:
            return False
        if self.owner is not None and not glob_match(self.owner, method.owner):
            return False
        if self.descriptor is not None and not glob_match(self.descriptor, method.descriptor):
            return False
        return True

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"name": self.name}
        if self.owner is not None:
            data["owner"] = self.owner
        if self.descriptor is not None:
            data["descriptor"] = self.descriptor
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MethodPattern":
        return cls(data["name"], data.get("owner"), data.get("descriptor"))

    def __str__(self) -> str:
        owner = self.owner or "*"
        return f"{owner}.{self.name}{self.descriptor or ''}"


@dataclass(frozen=True)
class SinkSite:
    """A call inside a graph node that matches a sink pattern."""

    method: MethodId
    vuln_type: VulnType
    pattern: MethodPattern
    target: MethodId


@dataclass(frozen=True)
class KnowledgeBase:
    sources: tuple[MethodPattern, ...] = ()
    sinks: dict[VulnType, tuple[MethodPattern, ...]] = field(default_factory=dict)

    def sinks_of(self, vuln_type: VulnType) -> tuple[MethodPattern, ...]:
        return self.sinks.get(vuln_type, ())

    def without(self, name: str) -> "KnowledgeBase":
        """Copy with every source and sink pattern of the given method name removed."""
        return KnowledgeBase(
            sources=tuple(p for p in self.sources if p.name != name),
            sinks={
                t: tuple(p for p in patterns if p.name != name)
                for t, patterns in self.sinks.items()
            },
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "sources": [p.to_dict() for p in self.sources],
            "sinks": {t.value: [p.to_dict() for p in self.sinks_of(t)] for t in VULN_ORDER},
        }


def _parse_pattern(raw: Any, path: str) -> MethodPattern:
    if isinstance(raw, str):
        raw = {"name": raw}
    if not isinstance(raw, dict):
        raise KbSchemaError(path, "pattern must be a method name or a mapping")
    unknown = set(raw) - {"name", "owner", "descriptor"}
    if unknown:
        raise KbSchemaError(path, f"unknown keys {sorted(unknown)}")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise KbSchemaError(f"{path}.name", "missing method name")
    for key in ("owner", "descriptor"):
        if raw.get(key) is not None and not isinstance(raw[key], str):
            raise KbSchemaError(f"{path}.{key}", "expected string")
    return MethodPattern(name, raw.get("owner"), raw.get("descriptor"))


def _parse_patterns(raw: Any, path: str) -> tuple[MethodPattern, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise KbSchemaError(path, "expected list")
    patterns = []
    for i, entry in enumerate(raw):
        pattern = _parse_pattern(entry, f"{path}[{i}]")
        if pattern in patterns:
            raise KbSchemaError(f"{path}[{i}]", f"duplicate entry {pattern}")
        patterns.append(pattern)
    return tuple(patterns)


def _parse_document(document: Any) -> KnowledgeBase:
    if document is None:
        return KnowledgeBase()
    if not isinstance(document, dict):
        raise KbSchemaError("$", "knowledge base must be a mapping")
    unknown = set(document) - {"sources", "sinks"}
    if unknown:
        raise KbSchemaError("$", f"unknown keys {sorted(unknown)}")

    sinks_raw = document.get("sinks") or {}
    if not isinstance(sinks_raw, dict):
        raise KbSchemaError("sinks", "expected mapping of vulnerability type to patterns")
    sinks = {}
    for key, patterns in sinks_raw.items():
        try:
            vuln_type = VulnType(key)
        except ValueError as e:
            raise KbSchemaError(f"sinks.{key}", "unknown vulnerability type") from e
        sinks[vuln_type] = _parse_patterns(patterns, f"sinks.{key}")

    return KnowledgeBase(sources=_parse_patterns(document.get("sources"), "sources"), sinks=sinks)


def _merge(base: KnowledgeBase, extra: KnowledgeBase) -> KnowledgeBase:
    sources = base.sources + tuple(p for p in extra.sources if p not in base.sources)
    sinks = {}
    for vuln_type in VULN_ORDER:
        existing = base.sinks_of(vuln_type)
        added = tuple(p for p in extra.sinks_of(vuln_type) if p not in existing)
        if existing or added:
            sinks[vuln_type] = existing + added
    return KnowledgeBase(sources=sources, sinks=sinks)


def load_kb(
    text: str, mode: str = "merge", base: Optional[KnowledgeBase] = None
) -> KnowledgeBase:
    """
    Load a knowledge base document.

    Args:
        text: YAML document with ``sources`` and ``sinks``
        mode: ``merge`` adds the entries to ``base``; ``replace`` uses them alone
        base: Knowledge base to merge into (default: the shipped one)

    Returns:
        The resulting knowledge base

    Raises:
        KbSchemaError: If the document is malformed or the mode is unknown
    """
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise KbSchemaError("$", f"invalid YAML: {e}") from e
    loaded = _parse_document(document)

    if mode == "replace":
        return loaded
    if mode != "merge":
        raise KbSchemaError("$", f"unknown knowledge base mode {mode!r}")
    return _merge(base if base is not None else default_kb(), loaded)


@lru_cache(maxsize=4)
def _load_default(path: str) -> KnowledgeBase:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise KbSchemaError(path, f"cannot read knowledge base: {e}") from e
    return _parse_document(yaml.safe_load(text))


def default_kb(path: Optional[str] = None) -> KnowledgeBase:
    """The shipped knowledge base (or the one at ``path``)."""
    return _load_default(str(path or DEFAULT_KB_PATH))


def match_sources(kb: KnowledgeBase, g: DaCg) -> set[MethodId]:
    """
    Graph nodes that match a source pattern.

    Args:
        kb: Knowledge base
        g: Call graph

    Returns:
        Matching nodes
    """
    return {node for node in g.nodes if any(p.matches(node) for p in kb.sources)}


def _site_matches(kb: KnowledgeBase, site: InvokeSite) -> list[tuple[VulnType, MethodPattern]]:
    if site.target is None:
        return []
    matches = []
    for vuln_type in VULN_ORDER:
        for pattern in kb.sinks_of(vuln_type):
            if pattern.matches(site.target):
                matches.append((vuln_type, pattern))
    return matches


def locate_sink_sites(kb: KnowledgeBase, g: DaCg) -> dict[MethodId, list[SinkSite]]:
    """
    Sink-matching calls per graph node.

    Args:
        kb: Knowledge base
        g: Call graph

    Returns:
        For each node with at least one match, its matches ordered by
        vulnerability type precedence and then by call order
    """
    located: dict[MethodId, list[SinkSite]] = {}
    for node in g.nodes:
        found = []
        for site in g.node_sites(node):
            for vuln_type, pattern in _site_matches(kb, site):
                assert site.target is not None
                found.append(SinkSite(node, vuln_type, pattern, site.target))
        if found:
            found.sort(key=lambda s: VULN_ORDER.index(s.vuln_type))
            located[node] = found
    return located


def match_sinks(kb: KnowledgeBase, g: DaCg) -> set[tuple[MethodId, VulnType]]:
    """
    Graph nodes containing a call that matches a sink pattern.

    Args:
        kb: Knowledge base
        g: Call graph

    Returns:
        (node, vulnerability type) pairs; a node may appear with several types
    """
    return {
        (sink.method, sink.vuln_type)
        for sites in locate_sink_sites(kb, g).values()
        for sink in sites
    }
