"""Class hierarchy analysis over ingested classes and platform stubs.

The hierarchy answers subtype, overriding and dispatch questions and decides
which classes can take part in deserialization. It is immutable once built
and safe to share between worker threads.
"""

from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import networkx as nx

from src.analysis.stubs import load_platform_stubs
from src.classmodel.descriptors import to_internal_name
from src.classmodel.model import (
    ClassModel,
    FieldModel,
    InvokeKind,
    InvokeSite,
    MethodId,
    MethodModel,
)
from src.common.analysis_config import AnalysisConfig
from src.common.errors import AnalysisWarning, CyclicHierarchy
from src.common.logger import setup_logger

logger = setup_logger(__name__)

OBJECT = "java/lang/Object"
SERIALIZABLE = "java/io/Serializable"
EXTERNALIZABLE = "java/io/Externalizable"


@dataclass
class Hierarchy:
    """Resolved class hierarchy.

    Attributes:
        classes: Every known class by name (ingested first, then stubs)
        ingested: Names of classes that came from the analysed inputs
        supertypes: Reflexive transitive supertype closure per known class
        overriding: Methods that override each known method (transitively)
        serializable: Known classes with Serializable or Externalizable in their closure
        custom_prefixes: Name prefixes treated as deserializable regardless
        warnings: Problems found while building
    """

    classes: dict[str, ClassModel]
    ingested: frozenset[str]
    supertypes: dict[str, frozenset[str]]
    overriding: dict[MethodId, frozenset[MethodId]]
    serializable: frozenset[str]
    custom_prefixes: tuple[str, ...] = ()
    warnings: list[AnalysisWarning] = field(default_factory=list)
    _subtypes: dict[str, frozenset[str]] = field(default_factory=dict, repr=False)

    def is_known(self, name: str) -> bool:
        return name in self.classes

    def method(self, method_id: MethodId) -> Optional[MethodModel]:
        """The declared method with this identity, if its class is known."""
        model = self.classes.get(method_id.owner)
        if model is None:
            return None
        return model.find_method(method_id.name, method_id.descriptor)

    def closure(self, name: str) -> frozenset[str]:
        """Reflexive supertype closure; unknown names only contain themselves."""
        return self.supertypes.get(name, frozenset({name}))

    def is_subtype(self, a: str, b: str) -> bool:
        """
        Whether class ``a`` is ``b`` or inherits from it.

        Args:
            a: Candidate subtype
            b: Candidate supertype

        Returns:
            False (with a logged warning) when ``a`` is not a known class
        """
        if a not in self.classes:
            logger.warning(f"Subtype query on unknown class {a}")
            return False
        return b in self.supertypes[a]

    def subtypes(self, name: str) -> frozenset[str]:
        """Known classes that are strict subtypes of ``name``."""
        return self._subtypes.get(name, frozenset())

    def overriders(self, method_id: MethodId) -> frozenset[MethodId]:
        return self.overriding.get(method_id, frozenset())

    def is_deserialization_relevant(
        self, name: str, prefixes: Optional[Sequence[str]] = None
    ) -> bool:
        """
        Whether instances of a class can appear in a deserialized object graph.

        Args:
            name: Internal class name
            prefixes: Custom-protocol prefixes (default: those the hierarchy was built with)

        Returns:
            True for serializable classes and classes under a custom prefix
        """
        if name in self.serializable:
            return True
        active = self.custom_prefixes if prefixes is None else _normalize_prefixes(prefixes)
        return any(name.startswith(p) for p in active)

    def resolve_method(self, method_id: MethodId) -> Optional[MethodId]:
        """
        Find the declaration a symbolic reference resolves to.

        Searches the named class, then its superclasses, then superinterfaces
        breadth-first.

        Args:
            method_id: Symbolic reference from an invoke site

        Returns:
            The declaring method, or None if no known class declares it
        """
        owner = OBJECT if method_id.owner.startswith("[") else method_id.owner
        name, descriptor = method_id.signature

        current: Optional[str] = owner
        while current is not None and current in self.classes:
            model = self.classes[current]
            found = model.find_method(name, descriptor)
            if found is not None:
                return found.id
            current = model.super_name

        queue = deque([owner])
        visited = {owner}
        while queue:
            model = self.classes.get(queue.popleft())
            if model is None:
                continue
            chain = [model.super_name] if model.super_name else []
            for parent in list(model.interfaces) + chain:
                if parent in visited:
                    continue
                visited.add(parent)
                parent_model = self.classes.get(parent)
                if parent_model is not None and parent_model.is_interface:
                    found = parent_model.find_method(name, descriptor)
                    if found is not None:
                        return found.id
                queue.append(parent)
        return None

    def dispatch_candidates(self, site: InvokeSite) -> frozenset[MethodId]:
        """
        Possible runtime targets of an invoke site.

        Args:
            site: Invoke site to resolve

        Returns:
            Static and special sites give at most one target; virtual and
            interface sites give the resolved declaration plus every
            overrider. Dynamic and unresolvable sites give an empty set.
        """
        if site.kind is InvokeKind.DYNAMIC or site.target is None:
            return frozenset()
        resolved = self.resolve_method(site.target)
        if resolved is None:
            logger.warning(f"Cannot resolve call target {site.target}")
            return frozenset()
        if site.kind in (InvokeKind.STATIC, InvokeKind.SPECIAL):
            return frozenset({resolved})
        return frozenset({resolved}) | self.overriders(resolved)

    def most_derived(self, method_id: MethodId, runtime_class: str) -> Optional[MethodId]:
        """
        The method a virtual call of ``method_id`` runs on an instance of ``runtime_class``.

        Args:
            method_id: Statically resolved method
            runtime_class: Class of the receiver object

        Returns:
            ``method_id`` itself or one of its overriders, or None if the
            runtime class does not inherit any of them
        """
        candidates = self.overriders(method_id) | {method_id}
        name, descriptor = method_id.signature

        current: Optional[str] = runtime_class
        while current is not None and current in self.classes:
            model = self.classes[current]
            found = model.find_method(name, descriptor)
            if found is not None and found.id in candidates:
                return found.id
            current = model.super_name

        # Default methods inherited through interfaces
        defaults = []
        for iface in self.closure(runtime_class):
            model = self.classes.get(iface)
            if model is None or not model.is_interface:
                continue
            found = model.find_method(name, descriptor)
            if found is not None and found.is_concrete and found.id in candidates:
                defaults.append(found.id)
        if not defaults:
            return None
        most_specific = [
            d
            for d in defaults
            if not any(o != d and d.owner in self.closure(o.owner) for o in defaults)
        ]
        return min(most_specific or defaults)

    def instance_fields(self, name: str) -> list[tuple[str, FieldModel]]:
        """
        Non-static fields of a class including inherited ones.

        Shadowed superclass fields are dropped.

        Args:
            name: Class name

        Returns:
            (declaring class, field) pairs, most-derived class first
        """
        result = []
        seen: set[str] = set()
        current: Optional[str] = name
        while current is not None and current in self.classes:
            model = self.classes[current]
            for f in model.fields:
                if f.is_static or f.name in seen:
                    continue
                seen.add(f.name)
                result.append((current, f))
            current = model.super_name
        return result

    def concrete_subtypes(
        self, name: str, prefixes: Optional[Sequence[str]] = None
    ) -> list[str]:
        """
        Deserialization-relevant concrete classes assignable to ``name``, sorted.

        Args:
            name: Declared type
            prefixes: Custom-protocol prefixes override

        Returns:
            Class names including ``name`` itself when it qualifies
        """
        candidates = set(self.subtypes(name))
        if name in self.classes:
            candidates.add(name)
        return sorted(
            c
            for c in candidates
            if self.classes[c].is_concrete and self.is_deserialization_relevant(c, prefixes)
        )

    def depth(self, name: str) -> int:
        """Number of supertypes of a class, used to rank "more derived"."""
        return len(self.closure(name))


def _normalize_prefixes(prefixes: Iterable[str]) -> tuple[str, ...]:
    return tuple(to_internal_name(p) for p in prefixes if p)


def _supertype_graph(classes: dict[str, ClassModel]) -> "nx.DiGraph":
    graph = nx.DiGraph()
    for name, model in classes.items():
        graph.add_node(name)
        for parent in model.direct_supertypes:
            graph.add_edge(name, parent)
    return graph


def _compute_overriding(
    classes: dict[str, ClassModel], subtypes: dict[str, frozenset[str]]
) -> dict[MethodId, frozenset[MethodId]]:
    overriding: dict[MethodId, frozenset[MethodId]] = {}
    for name, model in classes.items():
        below = sorted(subtypes.get(name, ()))
        for method in model.methods:
            if not method.can_be_overridden:
                continue
            found = set()
            for sub in below:
                candidate = classes[sub].find_method(method.id.name, method.id.descriptor)
                if candidate is not None and candidate.can_override:
                    found.add(candidate.id)
            if found:
                overriding[method.id] = frozenset(found)
    return overriding


def build_hierarchy(
    classes: Sequence[ClassModel],
    config: Optional[AnalysisConfig] = None,
    stubs: Optional[Sequence[ClassModel]] = None,
) -> Hierarchy:
    """
    Build the class hierarchy.

    Args:
        classes: Ingested classes; the first definition of a name wins
        config: Analysis settings (custom prefixes, stub table path)
        stubs: Platform stubs (default: loaded from the configured stub table)

    Returns:
        The resolved hierarchy

    Raises:
        CyclicHierarchy: If the supertype graph has a cycle
        StubTableError: If the stub table cannot be loaded
    """
    config = config or AnalysisConfig()
    if stubs is None:
        stubs = load_platform_stubs(config.stubs_path)

    warnings: list[AnalysisWarning] = []
    known: dict[str, ClassModel] = {}
    for model in classes:
        if model.name in known:
            warnings.append(
                AnalysisWarning(
                    "duplicate-class",
                    f"Class {model.name} ingested more than once; first definition kept",
                    model.name,
                )
            )
            continue
        known[model.name] = model
    ingested = frozenset(known)
    for stub in stubs:
        known.setdefault(stub.name, stub)

    graph = _supertype_graph(known)
    try:
        cycle = nx.find_cycle(graph)
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle:
        names = [edge[0] for edge in cycle] + [cycle[0][0]]
        raise CyclicHierarchy(names)

    for missing in sorted(set(graph.nodes) - set(known)):
        referrers = sorted(graph.predecessors(missing))
        warnings.append(
            AnalysisWarning(
                "missing-supertype",
                f"Supertype {missing} of {', '.join(referrers)} is not ingested",
                missing,
            )
        )

    closure: dict[str, frozenset[str]] = {}
    for name in reversed(list(nx.topological_sort(graph))):
        parents = graph.successors(name)
        closure[name] = frozenset({name}).union(*(closure[p] for p in parents))

    below: dict[str, set[str]] = defaultdict(set)
    for name in known:
        for parent in closure[name]:
            if parent != name:
                below[parent].add(name)
    subtypes = {name: frozenset(subs) for name, subs in below.items()}

    serializable = frozenset(
        name
        for name in known
        if SERIALIZABLE in closure[name] or EXTERNALIZABLE in closure[name]
    )

    hierarchy = Hierarchy(
        classes=known,
        ingested=ingested,
        supertypes={name: closure[name] for name in known},
        overriding=_compute_overriding(known, subtypes),
        serializable=serializable,
        custom_prefixes=_normalize_prefixes(config.custom_deser_prefixes),
        warnings=warnings,
        _subtypes=subtypes,
    )
    for warning in warnings:
        logger.warning(warning.message)
    logger.info(
        f"Hierarchy built: {len(ingested)} ingested classes, {len(known) - len(ingested)} stubs, "
        f"{len(serializable)} serializable, {len(hierarchy.overriding)} overridden methods"
    )
    return hierarchy


def is_subtype(h: Hierarchy, a: str, b: str) -> bool:
    return h.is_subtype(a, b)


def dispatch_candidates(h: Hierarchy, site: InvokeSite) -> frozenset[MethodId]:
    return h.dispatch_candidates(site)


def is_deserialization_relevant(
    h: Hierarchy, name: str, config: Optional[AnalysisConfig] = None
) -> bool:
    prefixes = None if config is None else config.custom_deser_prefixes
    return h.is_deserialization_relevant(name, prefixes)
