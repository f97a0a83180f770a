"""Injection-object generation for gadget chains.

Every OVERRIDES edge m -> m' in a chain needs the object executing the
previous gadget to hold, in one of its class-typed properties, an instance
of a class whose virtual dispatch of m lands on m'. Object generation picks
those properties and classes; mutation perturbs a plan during verification.
"""

from dataclasses import dataclass, replace
from typing import Iterator, Optional

import numpy as np

from src.analysis.dacg import EdgeKind
from src.analysis.hierarchy import Hierarchy
from src.classmodel.descriptors import parse_field_descriptor
from src.classmodel.model import FieldModel, MethodId
from src.common.analysis_config import AnalysisConfig
from src.common.errors import NoFeasibleAssignment, NonInstantiable
from src.common.logger import setup_logger
from src.search.chain_search import GadgetChain
from src.verification.plan import (
    Binding,
    ObjectPath,
    ObjectPlan,
    PrimitiveKind,
    PrimitiveValue,
    PropertyAssignment,
    default_value,
    is_value_type,
    primitive_code,
    with_assignment,
    with_bindings,
    with_replaced_assignment,
)

logger = setup_logger(__name__)

# Values drawn when a primitive is re-randomized
INT_RANGES = {
    "B": (-(2**7), 2**7 - 1),
    "C": (0, 2**16 - 1),
    "S": (-(2**15), 2**15 - 1),
    "I": (-(2**31), 2**31 - 1),
}
INT_POOL = (0, 1, -1, 2, 7, 42, 255, 1024)
LONG_POOL = (0, 1, -1, 42, 2**32, -(2**63), 2**63 - 1)
FLOAT_POOL = (0.0, 1.0, -1.0, 0.5, 3.4028234663852886e38, float("inf"), float("-inf"))
STRING_POOL = (
    "",
    "a",
    "calc",
    "java.lang.Runtime",
    "getRuntime",
    "exec",
    "ldap://127.0.0.1:1389/obj",
    "http://127.0.0.1/",
    "/etc/passwd",
)


@dataclass(frozen=True)
class Candidate:
    """A class-typed property that could hold an assigned object."""

    owner_path: ObjectPath
    holder: str
    field: FieldModel

    @property
    def path(self) -> ObjectPath:
        return self.owner_path + (self.field.name,)

    @property
    def declared_class(self) -> str:
        assert self.field.declared_type.class_name is not None
        return self.field.declared_type.class_name


def candidate_fields(h: Hierarchy, cls: str) -> list[tuple[str, FieldModel]]:
    """Serialized, class-typed instance fields of a class (inherited included)."""
    return [
        (holder, f)
        for holder, f in h.instance_fields(cls)
        if not f.is_transient
        and f.declared_type.is_reference
        and not is_value_type(f.declared_type)
    ]


def value_fields(h: Hierarchy, cls: str) -> list[tuple[str, FieldModel]]:
    """Serialized, value-typed instance fields of a class."""
    return [
        (holder, f)
        for holder, f in h.instance_fields(cls)
        if not f.is_transient and is_value_type(f.declared_type)
    ]


def default_bindings(
    h: Hierarchy, cls: str, path: ObjectPath
) -> dict[tuple[ObjectPath, str], PrimitiveValue]:
    return {(path, f.name): default_value(f.declared_type) for _, f in value_fields(h, cls)}


def select_properties(
    plan: ObjectPlan, h: Hierarchy, config: Optional[AnalysisConfig] = None
) -> list[Candidate]:
    """
    Class-typed properties reachable in the current plan tree.

    Args:
        plan: Current plan
        h: Class hierarchy
        config: Settings (depth bound)

    Returns:
        Candidates ordered by path length, then path
    """
    config = config or AnalysisConfig()
    found = []
    for path, cls in plan.objects():
        if len(path) >= config.plan_depth_bound:
            continue
        for holder, f in candidate_fields(h, cls):
            found.append(Candidate(path, holder, f))
    return sorted(found, key=lambda c: (len(c.path), c.path))


def _source_runs_on(h: Hierarchy, source: MethodId, cls: str) -> bool:
    method = h.method(source)
    if method is None or method.is_static or method.id.is_constructor:
        return h.is_subtype(cls, source.owner)
    return h.most_derived(source, cls) == source


def root_candidates(
    chain: GadgetChain, h: Hierarchy, config: Optional[AnalysisConfig] = None
) -> list[str]:
    """
    Classes the root object may have.

    The source's own class comes first when it is concrete and
    deserializable; after it come its concrete deserializable subtypes that
    still run the source gadget, most-derived first.

    Raises:
        NonInstantiable: If no such class exists
    """
    config = config or AnalysisConfig()
    prefixes = config.custom_deser_prefixes or None
    owner = chain.source.owner
    model = h.classes.get(owner)
    if model is None:
        raise NonInstantiable(owner)

    roots = []
    if model.is_concrete and h.is_deserialization_relevant(owner, prefixes):
        roots.append(owner)
    inheriting = [
        c
        for c in h.concrete_subtypes(owner, prefixes)
        if c != owner and _source_runs_on(h, chain.source, c)
    ]
    roots.extend(sorted(inheriting, key=lambda c: (-h.depth(c), c)))
    if not roots:
        raise NonInstantiable(owner)
    return roots


def choose_root(
    chain: GadgetChain, h: Hierarchy, config: Optional[AnalysisConfig] = None
) -> str:
    """Default root class: the first of root_candidates."""
    return root_candidates(chain, h, config)[0]


def _root_plan(h: Hierarchy, root: str) -> ObjectPlan:
    return with_bindings(ObjectPlan(root_class=root), default_bindings(h, root, ()))


def generate_initial_plan(
    chain: GadgetChain, h: Hierarchy, config: Optional[AnalysisConfig] = None
) -> ObjectPlan:
    """
    Root-only plan for a chain, with default primitive bindings.

    Raises:
        NonInstantiable: If the chain's source cannot be hosted by any concrete class
    """
    return _root_plan(h, choose_root(chain, h, config))


def admissible_classes(
    h: Hierarchy,
    method: MethodId,
    overrider: MethodId,
    config: Optional[AnalysisConfig] = None,
) -> list[str]:
    """
    Concrete deserializable classes whose dispatch of ``method`` runs ``overrider``.

    Returns:
        The overrider's own class first (when admissible), then the rest sorted
    """
    config = config or AnalysisConfig()
    prefixes = config.custom_deser_prefixes or None
    admissible = [
        c
        for c in h.concrete_subtypes(overrider.owner, prefixes)
        if h.most_derived(method, c) == overrider
    ]
    return sorted(admissible, key=lambda c: (c != overrider.owner, c))


def host_candidates(
    plan: ObjectPlan,
    h: Hierarchy,
    receiver: ObjectPath,
    cls: str,
    config: Optional[AnalysisConfig] = None,
) -> list[Candidate]:
    """
    Unassigned properties of the receiver object able to hold an instance of ``cls``.

    Returns:
        Candidates ordered by field name
    """
    config = config or AnalysisConfig()
    if len(receiver) >= config.plan_depth_bound:
        return []
    receiver_class = plan.class_at(receiver)
    if receiver_class is None:
        return []
    taken = {a.path for a in plan.children_of(receiver)}
    hosts = [
        Candidate(receiver, holder, f)
        for holder, f in candidate_fields(h, receiver_class)
        if receiver + (f.name,) not in taken
    ]
    return sorted(
        (c for c in hosts if h.is_subtype(cls, c.declared_class)), key=lambda c: c.field.name
    )


def _dispatch_options(
    plan: ObjectPlan,
    chain: GadgetChain,
    h: Hierarchy,
    receiver: ObjectPath,
    edge: int,
    config: AnalysisConfig,
) -> list[tuple[Candidate, str]]:
    method, overrider = chain.gadgets[edge], chain.gadgets[edge + 1]
    options = []
    for cls in admissible_classes(h, method, overrider, config):
        for host in host_candidates(plan, h, receiver, cls, config):
            options.append((host, cls))
    return options


def _apply_option(
    plan: ObjectPlan, h: Hierarchy, receiver: ObjectPath, host: Candidate, cls: str
) -> ObjectPlan:
    assignment = PropertyAssignment(
        path=host.path, field=host.field, holder=host.holder, assigned_class=cls
    )
    plan = with_assignment(plan, receiver, assignment)
    return with_bindings(plan, default_bindings(h, cls, host.path))


def _dispatch_edges(chain: GadgetChain) -> list[int]:
    return [i for i, k in enumerate(chain.edge_kinds) if k is EdgeKind.OVERRIDES]


def assign_values(
    plan: ObjectPlan,
    chain: GadgetChain,
    h: Hierarchy,
    config: Optional[AnalysisConfig] = None,
    strict: bool = True,
) -> ObjectPlan:
    """
    Satisfy every OVERRIDES edge of a chain with the first feasible option.

    The receiver starts at the root object and moves to each newly assigned
    object; CALL edges keep it.

    Args:
        plan: Starting plan (normally from generate_initial_plan)
        chain: Chain being prepared
        h: Class hierarchy
        config: Settings
        strict: Raise on an unsatisfiable edge instead of returning a partial plan

    Returns:
        Completed plan, or a partial plan with ``complete=False``

    Raises:
        NoFeasibleAssignment: In strict mode, for the first edge with no option
    """
    config = config or AnalysisConfig()
    receiver: ObjectPath = ()
    for edge in _dispatch_edges(chain):
        options = _dispatch_options(plan, chain, h, receiver, edge, config)
        if not options:
            if strict:
                raise NoFeasibleAssignment(
                    edge, f"no class-typed property can dispatch to {chain.gadgets[edge + 1]}"
                )
            return replace(plan, complete=False, blocked_edge=edge)
        host, cls = options[0]
        plan = _apply_option(plan, h, receiver, host, cls)
        receiver = host.path
    return plan


class PlanSpace:
    """Systematic enumeration of complete plans for one chain.

    Plans come out in the order of a depth-first walk over the root classes
    and then the options of each OVERRIDES edge; the first one is what
    assign_values would return when that succeeds.
    ``exhausted`` is True once the walk finished without hitting its step cap.
    """

    def __init__(
        self, chain: GadgetChain, h: Hierarchy, config: Optional[AnalysisConfig] = None
    ):
        self.chain = chain
        self.h = h
        self.config = config or AnalysisConfig()
        self.steps = 0
        self.exhausted = False
        self._halted = False
        self._edges = _dispatch_edges(chain)

    def iter_plans(self, max_steps: Optional[int] = None) -> Iterator[ObjectPlan]:
        """
        Yield distinct complete plans.

        Args:
            max_steps: Cap on options tried; None walks the whole space

        Raises:
            NonInstantiable: If the chain has no root class
        """
        self.steps = 0
        self.exhausted = False
        self._halted = False
        for root in root_candidates(self.chain, self.h, self.config):
            if max_steps is not None and self.steps >= max_steps:
                self._halted = True
                break
            self.steps += 1
            yield from self._expand(_root_plan(self.h, root), (), 0, max_steps)
            if self._halted:
                break
        if not self._halted:
            self.exhausted = True

    def _expand(
        self, plan: ObjectPlan, receiver: ObjectPath, k: int, max_steps: Optional[int]
    ) -> Iterator[ObjectPlan]:
        if k == len(self._edges):
            yield plan
            return
        edge = self._edges[k]
        for host, cls in _dispatch_options(plan, self.chain, self.h, receiver, edge, self.config):
            if max_steps is not None and self.steps >= max_steps:
                self._halted = True
                return
            self.steps += 1
            next_plan = _apply_option(plan, self.h, receiver, host, cls)
            yield from self._expand(next_plan, host.path, k + 1, max_steps)
            if self._halted:
                return


def enumerate_plans(
    chain: GadgetChain,
    h: Hierarchy,
    config: Optional[AnalysisConfig] = None,
    budget: Optional[int] = None,
) -> Iterator[ObjectPlan]:
    """Stream of distinct complete plans, capped at ``budget`` enumeration steps."""
    yield from PlanSpace(chain, h, config).iter_plans(budget)


def _pick(rng: np.random.Generator, count: int) -> int:
    return int(rng.integers(count))


def random_value(
    descriptor: str, rng: np.random.Generator, array_size_max: int = 16
) -> PrimitiveValue:
    """
    Draw a value for a value-typed field.

    Args:
        descriptor: Field descriptor
        rng: Seeded generator
        array_size_max: Largest array length drawn

    Returns:
        A value of the descriptor's type
    """
    declared = parse_field_descriptor(descriptor)
    if declared.is_array:
        size = _pick(rng, array_size_max + 1)
        if declared.dims == 1 and declared.element and declared.element.primitive == "B":
            return PrimitiveValue(PrimitiveKind.BYTES, rng.bytes(size), descriptor)
        component = declared.component()
        if is_value_type(component):
            elements = tuple(
                random_value(str(component), rng, array_size_max) for _ in range(size)
            )
        else:
            elements = tuple(default_value(component) for _ in range(size))
        return PrimitiveValue(PrimitiveKind.ARRAY, elements, descriptor)

    kind = default_value(declared).kind
    if kind is PrimitiveKind.STRING:
        return PrimitiveValue(kind, STRING_POOL[_pick(rng, len(STRING_POOL))], descriptor)
    if kind is PrimitiveKind.BOOLEAN:
        return PrimitiveValue(kind, bool(_pick(rng, 2)), descriptor)
    if kind in (PrimitiveKind.FLOAT, PrimitiveKind.DOUBLE):
        return PrimitiveValue(kind, FLOAT_POOL[_pick(rng, len(FLOAT_POOL))], descriptor)
    if kind is PrimitiveKind.LONG:
        return PrimitiveValue(kind, LONG_POOL[_pick(rng, len(LONG_POOL))], descriptor)
    if kind is PrimitiveKind.INT:
        code = primitive_code(descriptor) or "I"
        low, high = INT_RANGES[code]
        pool = sorted({v for v in INT_POOL if low <= v <= high} | {low, high})
        return PrimitiveValue(kind, pool[_pick(rng, len(pool))], descriptor)
    return default_value(declared)


def _mutation_sites(
    plan: ObjectPlan, h: Hierarchy, config: AnalysisConfig
) -> list[tuple[str, object]]:
    prefixes = config.custom_deser_prefixes or None
    sites: list[tuple[str, object]] = []
    for binding in plan.primitive_bindings:
        if binding.value.kind is not PrimitiveKind.NULL:
            sites.append(("value", binding))
    assigned = set()
    for assignment in plan.iter_assignments():
        assigned.add(assignment.path)
        sites.append(("class", assignment))
    for candidate in select_properties(plan, h, config):
        if candidate.path in assigned:
            continue
        if h.concrete_subtypes(candidate.declared_class, prefixes):
            sites.append(("populate", candidate))
    return sites


def _reassign_class(
    plan: ObjectPlan, h: Hierarchy, assignment: PropertyAssignment, cls: str
) -> ObjectPlan:
    if cls == assignment.assigned_class:
        return plan
    fields = {f.name: f for _, f in candidate_fields(h, cls)}
    kept = []
    for child in assignment.children:
        f = fields.get(child.field.name)
        if f is not None and f.declared_type.class_name is not None:
            if h.is_subtype(child.assigned_class, f.declared_type.class_name):
                kept.append(child)

    old = plan.binding_map()
    bindings = default_bindings(h, cls, assignment.path)
    for (path, name), value in old.items():
        if any(path[: len(c.path)] == c.path for c in kept):
            bindings[(path, name)] = value

    plan = with_replaced_assignment(
        plan, replace(assignment, assigned_class=cls, children=tuple(kept))
    )
    return with_bindings(plan, bindings, drop_under=assignment.path)


def mutate_plan(
    plan: ObjectPlan,
    h: Hierarchy,
    rng: np.random.Generator,
    config: Optional[AnalysisConfig] = None,
) -> ObjectPlan:
    """
    Apply one random mutation.

    The mutation site is drawn uniformly from: re-randomizing a primitive or
    array binding, re-choosing the class of an assigned property among its
    deserializable concrete subtypes, and populating an empty class-typed property.

    Args:
        plan: Plan to mutate
        h: Class hierarchy
        rng: Seeded generator; equal seeds give equal mutation sequences
        config: Settings (depth bound, array size cap, prefixes)

    Returns:
        The mutated plan (the same plan when it has nothing to mutate)
    """
    config = config or AnalysisConfig()
    prefixes = config.custom_deser_prefixes or None
    sites = _mutation_sites(plan, h, config)
    if not sites:
        return plan

    action, target = sites[_pick(rng, len(sites))]
    if action == "value":
        binding = target
        assert isinstance(binding, Binding)
        value = random_value(binding.value.descriptor, rng, config.array_size_max)
        return with_bindings(plan, {(binding.owner_path, binding.field_name): value})

    if action == "class":
        assignment = target
        assert isinstance(assignment, PropertyAssignment)
        declared = assignment.field.declared_type.class_name or assignment.assigned_class
        choices = h.concrete_subtypes(declared, prefixes)
        if not choices:
            return plan
        return _reassign_class(plan, h, assignment, choices[_pick(rng, len(choices))])

    candidate = target
    assert isinstance(candidate, Candidate)
    choices = h.concrete_subtypes(candidate.declared_class, prefixes)
    cls = choices[_pick(rng, len(choices))]
    return _apply_option(plan, h, candidate.owner_path, candidate, cls)
