"""Deserialization-aware call graph.

Nodes are methods of classes that can appear in a deserialized object graph,
plus the methods those call into ("boundary" nodes, which have no outgoing
CALL edges). CALL edges follow invoke instructions to their declared target.
OVERRIDES edges connect a method to each method that overrides it, standing in
for the dynamic dispatch an attacker controls through property values.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Optional

import networkx as nx

from src.analysis.hierarchy import Hierarchy
from src.classmodel.model import InvokeKind, InvokeSite, MethodId
from src.common.analysis_config import AnalysisConfig
from src.common.errors import AnalysisWarning, UnknownNode
from src.common.logger import setup_logger

logger = setup_logger(__name__)


class EdgeKind(Enum):
    CALL = "CALL"
    OVERRIDES = "OVERRIDES"


ALL_EDGE_KINDS = frozenset(EdgeKind)


@dataclass(frozen=True)
class NodeMeta:
    serializable: bool
    is_concrete: bool
    boundary: bool = False


@dataclass(frozen=True, order=True)
class Edge:
    source: MethodId
    kind_name: str
    target: MethodId

    @property
    def kind(self) -> EdgeKind:
        return EdgeKind(self.kind_name)


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    call_edge_count: int
    overrides_edge_count: int

    def to_dict(self) -> dict[str, int]:
        return {
            "node_count": self.node_count,
            "call_edge_count": self.call_edge_count,
            "overrides_edge_count": self.overrides_edge_count,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GraphStats":
        return cls(data["node_count"], data["call_edge_count"], data["overrides_edge_count"])


@dataclass
class DaCg:
    """Immutable deserialization-aware call graph over a networkx MultiDiGraph.

    Edges are keyed by their EdgeKind value, so at most one edge of each
    kind connects an ordered pair of nodes.
    """

    graph: "nx.MultiDiGraph"
    sites: dict[MethodId, tuple[InvokeSite, ...]] = field(default_factory=dict)
    warnings: list[AnalysisWarning] = field(default_factory=list)

    @property
    def nodes(self) -> list[MethodId]:
        return sorted(self.graph.nodes)

    def meta(self, node: MethodId) -> NodeMeta:
        if node not in self.graph:
            raise UnknownNode(node)
        return self.graph.nodes[node]["meta"]

    def has_node(self, node: MethodId) -> bool:
        return node in self.graph

    def has_edge(self, source: MethodId, kind: EdgeKind, target: MethodId) -> bool:
        return self.graph.has_edge(source, target, key=kind.value)

    def edges(self) -> list[Edge]:
        return sorted(Edge(a, key, b) for a, b, key in self.graph.edges(keys=True))

    def out_edges(
        self, node: MethodId, kinds: Iterable[EdgeKind] = ALL_EDGE_KINDS
    ) -> list[tuple[EdgeKind, MethodId]]:
        """
        Outgoing edges of a node, sorted by target then kind.

        Args:
            node: Source method
            kinds: Edge kinds to follow

        Returns:
            (edge kind, target) pairs; a target reached over both kinds appears twice

        Raises:
            UnknownNode: If ``node`` is not in the graph
        """
        if node not in self.graph:
            raise UnknownNode(node)
        wanted = {k.value for k in kinds}
        out = [
            (EdgeKind(key), target)
            for _, target, key in self.graph.out_edges(node, keys=True)
            if key in wanted
        ]
        return sorted(out, key=lambda pair: (pair[1], pair[0].value))

    def successors(
        self, node: MethodId, kinds: Iterable[EdgeKind] = ALL_EDGE_KINDS
    ) -> list[MethodId]:
        """Sorted, deduplicated targets of the node's edges of the given kinds."""
        return sorted({target for _, target in self.out_edges(node, kinds)})

    def node_sites(self, node: MethodId) -> tuple[InvokeSite, ...]:
        """Invoke sites of a node's body; boundary nodes have none."""
        return self.sites.get(node, ())

    def stats(self) -> GraphStats:
        call = overrides = 0
        for _, _, key in self.graph.edges(keys=True):
            if key == EdgeKind.CALL.value:
                call += 1
            else:
                overrides += 1
        return GraphStats(self.graph.number_of_nodes(), call, overrides)

    def to_dict(self) -> dict[str, Any]:
        """Serializable form used by graph dumps."""
        nodes = []
        for node in self.nodes:
            meta = self.meta(node)
            nodes.append(
                {
                    "id": str(node),
                    "serializable": meta.serializable,
                    "concrete": meta.is_concrete,
                    "boundary": meta.boundary,
                    "sites": [_site_to_dict(s) for s in self.node_sites(node)],
                }
            )
        return {
            "nodes": nodes,
            "edges": [
                {"from": str(e.source), "kind": e.kind_name, "to": str(e.target)}
                for e in self.edges()
            ],
            "warnings": [w.to_dict() for w in self.warnings],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DaCg":
        graph = nx.MultiDiGraph()
        sites: dict[MethodId, tuple[InvokeSite, ...]] = {}
        for entry in data["nodes"]:
            node = MethodId.parse(entry["id"])
            graph.add_node(
                node,
                meta=NodeMeta(entry["serializable"], entry["concrete"], entry["boundary"]),
            )
            node_sites = tuple(_site_from_dict(s) for s in entry.get("sites", []))
            if node_sites:
                sites[node] = node_sites
        for entry in data["edges"]:
            kind = EdgeKind(entry["kind"])
            graph.add_edge(
                MethodId.parse(entry["from"]), MethodId.parse(entry["to"]), key=kind.value
            )
        warnings = [AnalysisWarning.from_dict(w) for w in data.get("warnings", [])]
        return cls(graph=graph, sites=sites, warnings=warnings)


def _site_to_dict(site: InvokeSite) -> dict[str, Any]:
    return {
        "kind": site.kind.value,
        "target": str(site.target) if site.target is not None else None,
        "offset": site.bytecode_offset,
        "dynamic_name": site.dynamic_name,
        "dynamic_descriptor": site.dynamic_descriptor,
    }


def _site_from_dict(data: dict[str, Any]) -> InvokeSite:
    target = MethodId.parse(data["target"]) if data.get("target") else None
    return InvokeSite(
        InvokeKind(data["kind"]),
        target,
        data["offset"],
        dynamic_name=data.get("dynamic_name"),
        dynamic_descriptor=data.get("dynamic_descriptor"),
    )


def build_dacg(h: Hierarchy, config: Optional[AnalysisConfig] = None) -> DaCg:
    """
    Build the deserialization-aware call graph.

    Args:
        h: Class hierarchy
        config: Settings (custom prefixes, whether OVERRIDES edges are added)

    Returns:
        The call graph with its warnings
    """
    config = config or AnalysisConfig()
    prefixes = config.custom_deser_prefixes or None
    graph = nx.MultiDiGraph()
    sites: dict[MethodId, tuple[InvokeSite, ...]] = {}
    warnings: list[AnalysisWarning] = []

    def relevant(name: str) -> bool:
        return h.is_deserialization_relevant(name, prefixes)

    for name in sorted(h.ingested):
        if not relevant(name):
            continue
        for method in sorted(h.classes[name].methods, key=lambda m: m.id):
            graph.add_node(
                method.id, meta=NodeMeta(True, method.is_concrete, boundary=False)
            )
            if method.invoke_sites:
                sites[method.id] = method.invoke_sites

    unresolved_owners: dict[str, int] = {}
    dynamic_sites = 0
    for caller in sorted(sites):
        for site in sites[caller]:
            if site.kind is InvokeKind.DYNAMIC or site.target is None:
                dynamic_sites += 1
                continue
            target = h.resolve_method(site.target)
            if target is None:
                owner = site.target.owner
                unresolved_owners[owner] = unresolved_owners.get(owner, 0) + 1
                continue
            if target not in graph:
                declared = h.method(target)
                concrete = declared.is_concrete if declared is not None else False
                graph.add_node(
                    target, meta=NodeMeta(relevant(target.owner), concrete, boundary=True)
                )
            graph.add_edge(caller, target, key=EdgeKind.CALL.value)

    for owner, count in sorted(unresolved_owners.items()):
        warnings.append(
            AnalysisWarning(
                "unresolved-call",
                f"{count} call(s) into {owner} could not be resolved",
                owner,
            )
        )
    if dynamic_sites:
        logger.debug(f"{dynamic_sites} invokedynamic sites contribute no CALL edge")

    if config.overrides_enabled:
        for node in sorted(graph.nodes):
            for overrider in sorted(h.overriders(node)):
                if overrider in graph:
                    graph.add_edge(node, overrider, key=EdgeKind.OVERRIDES.value)

    g = DaCg(graph=graph, sites=sites, warnings=warnings)
    stats = g.stats()
    logger.info(
        f"Call graph built: {stats.node_count} nodes, {stats.call_edge_count} CALL edges, "
        f"{stats.overrides_edge_count} OVERRIDES edges"
    )
    return g


def successors(
    g: DaCg, node: MethodId, kinds: Iterable[EdgeKind] = ALL_EDGE_KINDS
) -> list[MethodId]:
    return g.successors(node, kinds)


def graph_stats(g: DaCg) -> GraphStats:
    return g.stats()
