"""Enumeration of candidate gadget chains.

A chain is a simple path in the call graph from a source node to a node
that contains a sink call. Paths are enumerated depth-first with caps on
length, on chains per (source, sink) pair and on the total.
"""

from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Union

from src.analysis.dacg import DaCg, EdgeKind
from src.classmodel.model import MethodId
from src.common.logger import setup_logger
from src.knowledge.knowledge_base import VULN_ORDER, MethodPattern, SinkSite, VulnType

logger = setup_logger(__name__)


@dataclass(frozen=True)
class ChainLimits:
    max_len: int = 15
    max_chains: int = 10000
    per_pair_cap: int = 500
    # Nodes expanded per source before the search for that source gives up
    max_expansions: int = 2_000_000


@dataclass(frozen=True)
class GadgetChain:
    """A candidate chain.

    ``edge_kinds[i]`` is the kind of the edge from ``gadgets[i]`` to
    ``gadgets[i + 1]``. ``sink_target`` is the dangerous call made by the
    last gadget, when known.
    """

    gadgets: tuple[MethodId, ...]
    edge_kinds: tuple[EdgeKind, ...]
    vuln_type: VulnType
    sink_pattern: Optional[MethodPattern] = None
    sink_target: Optional[MethodId] = None

    @property
    def source(self) -> MethodId:
        return self.gadgets[0]

    @property
    def sink_method(self) -> MethodId:
        return self.gadgets[-1]

    @property
    def length(self) -> int:
        return len(self.gadgets)

    @property
    def dispatch_count(self) -> int:
        """Number of OVERRIDES edges, i.e. dynamic bindings the object must set up."""
        return sum(1 for k in self.edge_kinds if k is EdgeKind.OVERRIDES)

    @property
    def key(self) -> tuple:
        return (self.gadgets, tuple(k.value for k in self.edge_kinds))

    def sort_key(self) -> tuple:
        return (self.source, self.sink_method, self.length) + self.key

    def stack_trace(self) -> list[MethodId]:
        """
        Frames as a runtime stack trace would show them, outermost first.

        A method that dispatches through an OVERRIDES edge never runs itself,
        so it is folded into its overrider; the sink call is appended.
        """
        frames = [
            gadget
            for i, gadget in enumerate(self.gadgets)
            if i >= len(self.edge_kinds) or self.edge_kinds[i] is not EdgeKind.OVERRIDES
        ]
        if self.sink_target is not None:
            frames.append(self.sink_target)
        return frames

    def to_dict(self) -> dict[str, Any]:
        return {
            "gadgets": [str(g) for g in self.gadgets],
            "edge_kinds": [k.value for k in self.edge_kinds],
            "vuln_type": self.vuln_type.value,
            "sink_pattern": self.sink_pattern.to_dict() if self.sink_pattern else None,
            "sink_target": str(self.sink_target) if self.sink_target else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GadgetChain":
        pattern = data.get("sink_pattern")
        target = data.get("sink_target")
        return cls(
            gadgets=tuple(MethodId.parse(g) for g in data["gadgets"]),
            edge_kinds=tuple(EdgeKind(k) for k in data["edge_kinds"]),
            vuln_type=VulnType(data["vuln_type"]),
            sink_pattern=MethodPattern.from_dict(pattern) if pattern else None,
            sink_target=MethodId.parse(target) if target else None,
        )


@dataclass
class ChainSearchResult:
    chains: list[GadgetChain] = field(default_factory=list)
    truncated: bool = False


SinkSpec = Union[Mapping[MethodId, list[SinkSite]], Iterable[tuple[MethodId, VulnType]]]


def _normalize_sinks(sinks: SinkSpec) -> dict[MethodId, SinkSite]:
    """Pick, per sink node, the match that names the chain's vulnerability."""
    by_node: dict[MethodId, list[SinkSite]] = defaultdict(list)
    if isinstance(sinks, Mapping):
        for node, sites in sinks.items():
            by_node[node].extend(sites)
    else:
        for node, vuln_type in sinks:
            by_node[node].append(SinkSite(node, vuln_type, None, None))  # type: ignore[arg-type]

    chosen = {}
    for node, sites in by_node.items():
        ordered = sorted(sites, key=lambda s: VULN_ORDER.index(s.vuln_type))
        chosen[node] = ordered[0]
    return chosen


def _search_from(
    g: DaCg,
    source: MethodId,
    sinks: dict[MethodId, SinkSite],
    limits: ChainLimits,
    kinds: frozenset,
) -> tuple[list[GadgetChain], bool]:
    """Iterative DFS over simple paths starting at one source."""
    chains: list[GadgetChain] = []
    per_pair: dict[MethodId, int] = defaultdict(int)
    truncated = False
    expansions = 0

    path = [source]
    edge_kinds: list[EdgeKind] = []
    on_path = {source}
    stack = [iter(g.out_edges(source, kinds))]

    while stack:
        step = next(stack[-1], None)
        if step is None:
            stack.pop()
            on_path.discard(path.pop())
            if edge_kinds:
                edge_kinds.pop()
            continue

        kind, target = step
        if target in on_path:
            continue
        expansions += 1
        if expansions > limits.max_expansions:
            logger.warning(f"Search from {source} stopped after {limits.max_expansions} steps")
            truncated = True
            break

        path.append(target)
        edge_kinds.append(kind)
        on_path.add(target)

        sink = sinks.get(target)
        if sink is not None:
            if per_pair[target] >= limits.per_pair_cap:
                truncated = True
            elif len(chains) >= limits.max_chains:
                # A chain beyond the global cap
                truncated = True
                break
            else:
                per_pair[target] += 1
                chains.append(
                    GadgetChain(
                        gadgets=tuple(path),
                        edge_kinds=tuple(edge_kinds),
                        vuln_type=sink.vuln_type,
                        sink_pattern=sink.pattern,
                        sink_target=sink.target,
                    )
                )

        if len(path) < limits.max_len:
            stack.append(iter(g.out_edges(target, kinds)))
        else:
            path.pop()
            edge_kinds.pop()
            on_path.discard(target)

    return chains, truncated


def find_chains(
    g: DaCg,
    sources: Iterable[MethodId],
    sinks: SinkSpec,
    limits: Optional[ChainLimits] = None,
    workers: int = 1,
    edge_kinds: Iterable[EdgeKind] = tuple(EdgeKind),
) -> ChainSearchResult:
    """
    Enumerate candidate gadget chains.

    Args:
        g: Call graph
        sources: Source nodes
        sinks: Sink sites per node, or plain (node, vulnerability type) pairs
        limits: Length and count caps
        workers: Threads used to search from different sources in parallel
        edge_kinds: Edge kinds the search may follow

    Returns:
        Chains sorted by (source, sink, length, path) and whether any cap was hit
    """
    limits = limits or ChainLimits()
    sink_sites = _normalize_sinks(sinks)
    kinds = frozenset(edge_kinds)
    ordered_sources = sorted(s for s in set(sources) if g.has_node(s))

    def run(source: MethodId) -> tuple[list[GadgetChain], bool]:
        return _search_from(g, source, sink_sites, limits, kinds)

    if workers > 1 and len(ordered_sources) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, ordered_sources))
    else:
        outcomes = [run(s) for s in ordered_sources]

    result = ChainSearchResult()
    for chains, truncated in outcomes:
        result.chains.extend(chains)
        result.truncated = result.truncated or truncated

    result.chains.sort(key=GadgetChain.sort_key)
    if len(result.chains) > limits.max_chains:
        result.chains = result.chains[: limits.max_chains]
        result.truncated = True

    logger.info(
        f"Chain search: {len(result.chains)} chains from {len(ordered_sources)} sources"
        + (" (truncated)" if result.truncated else "")
    )
    return result


def dedup_chains(chains: Iterable[GadgetChain]) -> list[GadgetChain]:
    """Drop chains with an already-seen (gadgets, edge kinds) pair, keeping order."""
    seen = set()
    unique = []
    for chain in chains:
        if chain.key in seen:
            continue
        seen.add(chain.key)
        unique.append(chain)
    return unique


def validate_chain(
    chain: GadgetChain,
    g: DaCg,
    sources: Optional[set[MethodId]] = None,
    sinks: Optional[Iterable[tuple[MethodId, VulnType]]] = None,
) -> list[str]:
    """
    Check a chain's structural invariants against a graph.

    Returns:
        Problems found, empty when the chain is well-formed
    """
    problems = []
    if chain.length < 2:
        problems.append("chain has fewer than two gadgets")
    if len(chain.edge_kinds) != chain.length - 1:
        problems.append("edge kind count does not match gadget count")
    if len(set(chain.gadgets)) != chain.length:
        problems.append("chain repeats a gadget")
    for i, kind in enumerate(chain.edge_kinds[: chain.length - 1]):
        if not g.has_edge(chain.gadgets[i], kind, chain.gadgets[i + 1]):
            problems.append(f"edge {i} ({kind.value}) is not in the graph")
    if sources is not None and chain.source not in sources:
        problems.append("first gadget is not a source")
    if sinks is not None and (chain.sink_method, chain.vuln_type) not in set(sinks):
        problems.append("last gadget is not a sink of the chain's type")
    return problems
