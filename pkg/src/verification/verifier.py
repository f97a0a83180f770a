"""Model-level verification of gadget chains.

A plan is checked by walking the chain edge by edge and resolving every
dynamic dispatch against the classes the plan puts into the receiver's
properties. The search first tries plans from the systematic enumerator and
then falls back to seeded, coverage-guided mutation of the best plan found.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np

from src.analysis.dacg import DaCg, EdgeKind
from src.analysis.hierarchy import Hierarchy
from src.classmodel.model import InvokeSite, MethodId
from src.common.analysis_config import AnalysisConfig, SearchBudget
from src.common.errors import NonInstantiable
from src.common.logger import setup_logger
from src.search.chain_search import GadgetChain
from src.verification.object_gen import (
    PlanSpace,
    assign_values,
    generate_initial_plan,
    mutate_plan,
)
from src.verification.plan import ObjectPath, ObjectPlan, PropertyAssignment

logger = setup_logger(__name__)


class StepKind(Enum):
    ENTRY = "ENTRY"
    CALL = "CALL"
    OVERRIDES = "OVERRIDES"


@dataclass(frozen=True)
class TraceStep:
    """One resolved step of a dispatch trace.

    Step 0 is the deserializer entering the chain's first gadget on the root
    object; step i (i >= 1) follows chain edge i - 1 into gadget i.
    """

    index: int
    kind: StepKind
    resolved: MethodId
    ok: bool
    receiver: ObjectPath = ()
    site: Optional[InvokeSite] = None
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "kind": self.kind.value,
            "resolved": str(self.resolved),
            "ok": self.ok,
            "receiver": list(self.receiver),
            "site_offset": self.site.bytecode_offset if self.site else None,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class DispatchTrace:
    steps: tuple[TraceStep, ...]
    chain_length: int

    @property
    def reached_sink(self) -> bool:
        return len(self.steps) == self.chain_length and all(s.ok for s in self.steps)

    @property
    def failed_step(self) -> Optional[int]:
        for step in self.steps:
            if not step.ok:
                return step.index
        return None

    @property
    def reached_gadgets(self) -> int:
        return sum(1 for s in self.steps if s.ok)

    @property
    def coverage(self) -> float:
        return self.reached_gadgets / self.chain_length if self.chain_length else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "reached_sink": self.reached_sink,
            "coverage": self.coverage,
            "steps": [s.to_dict() for s in self.steps],
        }


class VerificationStatus(Enum):
    VERIFIED = "Verified"
    INFEASIBLE = "Infeasible"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    NOT_VERIFIED = "NotVerified"


@dataclass(frozen=True)
class VerificationResult:
    """Outcome of verifying one chain.

    ``coverage`` is the best gadget coverage seen during the search; it is
    1.0 exactly when the chain was verified.
    """

    chain: GadgetChain
    status: VerificationStatus
    witness_plan: Optional[ObjectPlan] = None
    coverage: float = 0.0
    iterations_used: int = 0
    reason: Optional[str] = None
    # Coverage of each plan the mutation phase kept; not serialized
    coverage_history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    @property
    def is_verified(self) -> bool:
        return self.status is VerificationStatus.VERIFIED

    def to_dict(self) -> dict[str, Any]:
        return {
            "chain": self.chain.to_dict(),
            "status": self.status.value,
            "witness_plan": self.witness_plan.to_dict() if self.witness_plan else None,
            "coverage": self.coverage,
            "iterations_used": self.iterations_used,
            "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "VerificationResult":
        plan = data.get("witness_plan")
        return cls(
            chain=GadgetChain.from_dict(data["chain"]),
            status=VerificationStatus(data["status"]),
            witness_plan=ObjectPlan.from_dict(plan) if plan else None,
            coverage=float(data.get("coverage", 0.0)),
            iterations_used=int(data.get("iterations_used", 0)),
            reason=data.get("reason"),
        )


def unverified(chain: GadgetChain) -> VerificationResult:
    """Result for a chain reported without verification."""
    return VerificationResult(chain, VerificationStatus.NOT_VERIFIED, reason="verification skipped")


def _entry_ok(plan: ObjectPlan, source: MethodId, h: Hierarchy) -> bool:
    root = plan.root_class
    if not h.is_known(root) or not h.is_subtype(root, source.owner):
        return False
    method = h.method(source)
    if method is None or method.is_static or source.is_constructor:
        return True
    return h.most_derived(source, root) == source


def _call_site(g: DaCg, h: Hierarchy, caller: MethodId, callee: MethodId) -> Optional[InvokeSite]:
    if not g.has_node(caller):
        return None
    for site in g.node_sites(caller):
        if site.target is not None and h.resolve_method(site.target) == callee:
            return site
    return None


def _hosts(
    plan: ObjectPlan,
    receiver: ObjectPath,
    consumed: frozenset[ObjectPath],
    caller: MethodId,
    callee: MethodId,
    h: Hierarchy,
) -> list[PropertyAssignment]:
    hosts = []
    for child in plan.children_of(receiver):
        if child.path in consumed:
            continue
        declared = child.field.declared_type.class_name
        cls = child.assigned_class
        if declared is None or not h.is_known(cls) or not h.is_subtype(cls, declared):
            continue
        if h.most_derived(caller, cls) == callee:
            hosts.append(child)
    return hosts


def resolve_plan_trace(
    plan: ObjectPlan, chain: GadgetChain, g: DaCg, h: Hierarchy
) -> DispatchTrace:
    """
    Replay a chain on a plan.

    CALL edges succeed when the graph has the edge. An OVERRIDES edge m -> m'
    succeeds when an unconsumed property of the current receiver holds a
    class C that fits the property's declared type and whose most-derived
    version of m is m'; C's object then becomes the receiver. When several
    properties qualify they are tried in field order, backtracking until one
    of them lets the rest of the chain resolve. A failed replay reports the
    attempt that got furthest, the first one on ties.

    Args:
        plan: Object plan to check
        chain: Chain to replay
        g: Call graph
        h: Class hierarchy

    Returns:
        The steps taken, ending at the first failure if any
    """
    source = chain.source
    ok = _entry_ok(plan, source, h)
    detail = "" if ok else "root cannot run source"
    entry = TraceStep(0, StepKind.ENTRY, source, ok, (), None, detail)
    if not ok:
        return DispatchTrace((entry,), chain.length)

    def replay(
        i: int, receiver: ObjectPath, consumed: frozenset[ObjectPath]
    ) -> tuple[TraceStep, ...]:
        if i == len(chain.edge_kinds):
            return ()
        kind = chain.edge_kinds[i]
        caller, callee = chain.gadgets[i], chain.gadgets[i + 1]
        if not g.has_edge(caller, kind, callee):
            return (
                TraceStep(
                    i + 1, StepKind(kind.value), callee, False, receiver, None, "no such edge"
                ),
            )

        if kind is EdgeKind.CALL:
            site = _call_site(g, h, caller, callee)
            step = TraceStep(i + 1, StepKind.CALL, callee, True, receiver, site)
            return (step,) + replay(i + 1, receiver, consumed)

        best: Optional[tuple[TraceStep, ...]] = None
        for host in _hosts(plan, receiver, consumed, caller, callee, h):
            step = TraceStep(i + 1, StepKind.OVERRIDES, callee, True, host.path, None, host.dotted)
            steps = (step,) + replay(i + 1, host.path, consumed | {host.path})
            if steps[-1].ok:
                return steps
            if best is None or len(steps) > len(best):
                best = steps
        if best is not None:
            return best
        return (
            TraceStep(
                i + 1,
                StepKind.OVERRIDES,
                callee,
                False,
                receiver,
                None,
                f"no property dispatches {caller.name} to {callee.owner}",
            ),
        )

    return DispatchTrace((entry,) + replay(0, (), frozenset()), chain.length)

    receiver: ObjectPath = ()
    consumed: set[ObjectPath] = set()
    for i, kind in enumerate(chain.edge_kinds):
        caller, callee = chain.gadgets[i], chain.gadgets[i + 1]
        if not g.has_edge(caller, kind, callee):
            steps.append(
                TraceStep(
                    i + 1, StepKind(kind.value), callee, False, receiver, None, "no such edge"
                )
            )
            break

        if kind is EdgeKind.CALL:
            site = _call_site(g, h, caller, callee)
            steps.append(TraceStep(i + 1, StepKind.CALL, callee, True, receiver, site))
            continue

        host = None
        for child in plan.children_of(receiver):
            if child.path in consumed:
                continue
            declared = child.field.declared_type.class_name
            cls = child.assigned_class
            if declared is None or not h.is_known(cls) or not h.is_subtype(cls, declared):
                continue
            if h.most_derived(caller, cls) == callee:
                host = child
                break
        if host is None:
            steps.append(
                TraceStep(
                    i + 1,
                    StepKind.OVERRIDES,
                    callee,
                    False,
                    receiver,
                    None,
                    f"no property dispatches {caller.name} to {callee.owner}",
                )
            )
            break
        consumed.add(host.path)
        receiver = host.path
        steps.append(
            TraceStep(i + 1, StepKind.OVERRIDES, callee, True, receiver, None, host.dotted)
        )

    return DispatchTrace(tuple(steps), chain.length)


@dataclass
class _SearchState:
    deadline: Optional[float]
    max_iterations: int
    iterations: int = 0
    best_plan: Optional[ObjectPlan] = None
    best_coverage: float = -1.0
    history: list[float] = field(default_factory=list)

    def out_of_budget(self) -> bool:
        if self.iterations >= self.max_iterations:
            return True
        return self.deadline is not None and time.monotonic() >= self.deadline

    def record(self, plan: ObjectPlan, trace: DispatchTrace) -> None:
        self.iterations += 1
        if trace.coverage > self.best_coverage:
            self.best_plan = plan
            self.best_coverage = trace.coverage


def chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    """Private generator of one chain's search, derived from (seed, chain index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, chain_index]))


def verify_chain(
    chain: GadgetChain,
    g: DaCg,
    h: Hierarchy,
    budget: Optional[SearchBudget] = None,
    config: Optional[AnalysisConfig] = None,
    chain_index: int = 0,
) -> VerificationResult:
    """
    Search for an object plan that drives a chain to its sink.

    Args:
        chain: Chain to verify
        g: Call graph
        h: Class hierarchy
        budget: Iteration, time and seed settings (default: the config's)
        config: Depth bound, array size cap and prefixes
        chain_index: Position of the chain, mixed into the seed

    Returns:
        Verified with a witness, Infeasible when the plan space was
        exhausted without one, or BudgetExhausted
    """
    config = config or AnalysisConfig()
    budget = budget or config.budget
    deadline = None
    if budget.wall_clock_seconds:
        deadline = time.monotonic() + budget.wall_clock_seconds
    state = _SearchState(deadline=deadline, max_iterations=budget.max_iterations)

    def verified(plan: ObjectPlan) -> VerificationResult:
        logger.debug(f"Chain {chain_index} verified after {state.iterations} iterations")
        return VerificationResult(
            chain,
            VerificationStatus.VERIFIED,
            plan,
            1.0,
            state.iterations,
            coverage_history=tuple(state.history),
        )

    space = PlanSpace(chain, h, config)
    try:
        for plan in space.iter_plans(max_steps=budget.max_iterations):
            if state.out_of_budget():
                break
            trace = resolve_plan_trace(plan, chain, g, h)
            state.record(plan, trace)
            if trace.reached_sink:
                return verified(plan)
    except NonInstantiable as e:
        return VerificationResult(
            chain, VerificationStatus.INFEASIBLE, None, 0.0, state.iterations, str(e)
        )

    coverage = max(state.best_coverage, 0.0)
    if space.exhausted:
        return VerificationResult(
            chain,
            VerificationStatus.INFEASIBLE,
            None,
            coverage,
            state.iterations,
            "plan space exhausted without reaching the sink",
        )

    # Coverage-guided mutation from the best plan seen so far
    rng = chain_rng(budget.seed, chain_index)
    current = state.best_plan
    if current is None:
        current = assign_values(generate_initial_plan(chain, h, config), chain, h, config, False)
    current_coverage = resolve_plan_trace(current, chain, g, h).coverage
    state.history.append(current_coverage)

    while not state.out_of_budget():
        candidate = mutate_plan(current, h, rng, config)
        trace = resolve_plan_trace(candidate, chain, g, h)
        state.record(candidate, trace)
        if trace.reached_sink:
            return verified(candidate)
        if trace.coverage >= current_coverage:
            current, current_coverage = candidate, trace.coverage
            state.history.append(current_coverage)

    return VerificationResult(
        chain,
        VerificationStatus.BUDGET_EXHAUSTED,
        None,
        max(state.best_coverage, 0.0),
        state.iterations,
        "search budget spent",
        coverage_history=tuple(state.history),
    )


def verify_chains(
    chains: Sequence[GadgetChain],
    g: DaCg,
    h: Hierarchy,
    config: Optional[AnalysisConfig] = None,
    workers: Optional[int] = None,
) -> list[VerificationResult]:
    """
    Verify chains independently.

    Args:
        chains: Chains in report order; a chain's index seeds its search
        g: Call graph
        h: Class hierarchy
        config: Analysis settings
        workers: Thread count (default: config.verify_workers)

    Returns:
        Results in the order of ``chains``
    """
    config = config or AnalysisConfig()
    workers = workers or config.verify_workers

    def run(indexed: tuple[int, GadgetChain]) -> VerificationResult:
        index, chain = indexed
        return verify_chain(chain, g, h, config.budget, config, index)

    if workers > 1 and len(chains) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, enumerate(chains)))
    else:
        results = [run(item) for item in enumerate(chains)]

    counts: dict[str, int] = {}
    for result in results:
        counts[result.status.value] = counts.get(result.status.value, 0) + 1
    logger.info(f"Verified {len(results)} chains: {counts}")
    return results
