"""Unit tests for chain verification."""

from dataclasses import replace
from functools import lru_cache
from itertools import islice

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from src.analysis.dacg import EdgeKind, build_dacg
from src.analysis.hierarchy import build_hierarchy
from src.classmodel.model import ClassModel, InvokeKind, MethodId
from src.common.analysis_config import AnalysisConfig, SearchBudget
from src.common.errors import NonInstantiable
from src.knowledge.knowledge_base import VulnType
from src.search.chain_search import GadgetChain
from src.verification.object_gen import PlanSpace, mutate_plan
from src.verification.plan import ObjectPlan, PropertyAssignment, with_replaced_assignment
from src.verification.verifier import (
    StepKind,
    VerificationResult,
    VerificationStatus,
    chain_rng,
    resolve_plan_trace,
    unverified,
    verify_chain,
    verify_chains,
)
from tests.helpers.chains import (
    COMPARE_TO,
    MULTI_DEFAULTS,
    PROXY_LAZY_VALUE,
    XOBJECT,
    XSTRING,
    all_chains,
    chain_from,
    ladder,
)
from tests.helpers.dispatch_oracle import oracle_reaches_sink
from tests.helpers.fixtures import load_ir
from tests.helpers.models import EXEC, SERIALIZABLE, dispatch_ladder, method, ref_field
from tests.helpers.strategies import object_plans

NO_CLOCK = SearchBudget(max_iterations=10000, wall_clock_seconds=None, seed=0)
OBJECT_EQUALS = MethodId("java/lang/Object", "equals", "(Ljava/lang/Object;)Z")
OBJECT_TO_STRING = MethodId("java/lang/Object", "toString", "()Ljava/lang/String;")


@pytest.fixture
def compare_to_chain(motivating_graph):
    return chain_from(motivating_graph, COMPARE_TO)


class TestMotivatingChain:
    def test_verified_on_first_plan(
        self, compare_to_chain, motivating_graph, motivating_hierarchy, analysis_config
    ):
        result = verify_chain(
            compare_to_chain, motivating_graph, motivating_hierarchy, config=analysis_config
        )
        assert result.status is VerificationStatus.VERIFIED
        assert result.iterations_used == 1
        assert result.coverage == 1.0
        plan = result.witness_plan
        assert plan.class_at(("value",)) == XSTRING
        assert plan.class_at(("value", "m_obj")) == MULTI_DEFAULTS
        assert plan.class_at(("value", "m_obj", "lazyValue")) == PROXY_LAZY_VALUE

    def test_trace_of_witness(
        self, compare_to_chain, motivating_graph, motivating_hierarchy, analysis_config
    ):
        plan = verify_chain(
            compare_to_chain, motivating_graph, motivating_hierarchy, config=analysis_config
        ).witness_plan
        trace = resolve_plan_trace(plan, compare_to_chain, motivating_graph, motivating_hierarchy)
        assert trace.reached_sink
        assert [s.kind for s in trace.steps][:3] == [
            StepKind.ENTRY,
            StepKind.CALL,
            StepKind.OVERRIDES,
        ]
        assert trace.steps[2].receiver == ("value",)
        assert trace.steps[-1].receiver == ("value", "m_obj", "lazyValue")

    def test_wrong_class_fails_at_first_dispatch(
        self, compare_to_chain, motivating_graph, motivating_hierarchy, analysis_config
    ):
        plan = verify_chain(
            compare_to_chain, motivating_graph, motivating_hierarchy, config=analysis_config
        ).witness_plan
        value = plan.assignment_at(("value",))
        broken = with_replaced_assignment(plan, replace(value, assigned_class=XOBJECT))
        trace = resolve_plan_trace(broken, compare_to_chain, motivating_graph, motivating_hierarchy)
        assert not trace.reached_sink
        assert trace.failed_step == 2
        assert trace.coverage == pytest.approx(0.2)

    def test_wrong_root_fails_at_entry(
        self, compare_to_chain, motivating_graph, motivating_hierarchy, analysis_config
    ):
        plan = verify_chain(
            compare_to_chain, motivating_graph, motivating_hierarchy, config=analysis_config
        ).witness_plan
        wrong_root = replace(plan, root_class=XSTRING)
        trace = resolve_plan_trace(
            wrong_root, compare_to_chain, motivating_graph, motivating_hierarchy
        )
        assert trace.failed_step == 0
        assert trace.coverage == 0.0

    def test_result_round_trip(
        self, compare_to_chain, motivating_graph, motivating_hierarchy, analysis_config
    ):
        result = verify_chain(
            compare_to_chain, motivating_graph, motivating_hierarchy, config=analysis_config
        )
        assert VerificationResult.from_dict(result.to_dict()) == result


class TestOutcomes:
    def test_decoys_verified(self, decoy_graph, decoy_hierarchy, analysis_config):
        (chain,) = all_chains(decoy_graph)
        result = verify_chain(chain, decoy_graph, decoy_hierarchy, config=analysis_config)
        assert result.is_verified
        assert result.witness_plan.class_at(("handler",)) == "com/example/decoy/CommandHandler"

    def test_missing_property_is_infeasible(self, analysis_config):
        chain, g, h = ladder(3, missing_field_at=1)
        result = verify_chain(chain, g, h, NO_CLOCK, analysis_config)
        assert result.status is VerificationStatus.INFEASIBLE
        assert result.reason == "plan space exhausted without reaching the sink"
        assert result.witness_plan is None

    def test_uninstantiable_source_is_infeasible(self, analysis_config):
        chain, g, h = ladder(2)
        source_class = chain.source.owner
        h.classes.pop(source_class)
        result = verify_chain(chain, g, h, NO_CLOCK, analysis_config)
        assert result.status is VerificationStatus.INFEASIBLE
        assert result.reason == str(NonInstantiable(source_class))

    def test_unverified(self, compare_to_chain):
        result = unverified(compare_to_chain)
        assert result.status is VerificationStatus.NOT_VERIFIED
        assert result.witness_plan is None

    @pytest.mark.parametrize("levels", [1, 2, 4])
    def test_ladders_verified(self, levels, analysis_config):
        chain, g, h = ladder(levels)
        result = verify_chain(chain, g, h, NO_CLOCK, analysis_config)
        assert result.is_verified
        assert result.iterations_used == 1

    @pytest.mark.slow
    def test_deep_unsatisfiable_ladder_spends_budget(self):
        config = AnalysisConfig(plan_depth_bound=32).with_budget(wall_clock_seconds=None)
        chain, g, h = ladder(20, missing_field_at=18, config=config)
        result = verify_chain(chain, g, h, SearchBudget(10000, None, 0), config)
        assert result.status is VerificationStatus.BUDGET_EXHAUSTED
        assert result.iterations_used == 10000
        assert result.reason == "search budget spent"
        assert 0.0 < result.coverage < 1.0


class TestMutationPhase:
    def _spend(self, seed, chain_index=0):
        config = AnalysisConfig().with_budget(wall_clock_seconds=None)
        chain, g, h = ladder(6, missing_field_at=4, config=config)
        budget = SearchBudget(max_iterations=50, wall_clock_seconds=None, seed=seed)
        return verify_chain(chain, g, h, budget, config, chain_index)

    def test_budget_exhausted_after_mutation(self):
        result = self._spend(seed=3)
        assert result.status is VerificationStatus.BUDGET_EXHAUSTED
        assert result.iterations_used == 50

    def test_same_seed_same_search(self):
        first, second = self._spend(seed=11), self._spend(seed=11)
        assert first == second
        assert first.coverage_history == second.coverage_history

    def test_kept_coverage_never_drops(self):
        history = self._spend(seed=5).coverage_history
        assert history
        assert all(a <= b for a, b in zip(history, history[1:]))

    def test_chain_rng_depends_on_index(self):
        a = chain_rng(0, 0).integers(2**32, size=4)
        b = chain_rng(0, 1).integers(2**32, size=4)
        assert not np.array_equal(a, b)
        assert np.array_equal(a, chain_rng(0, 0).integers(2**32, size=4))


class TestAgreesWithOracle:
    @pytest.mark.parametrize("levels", [1, 2, 3])
    def test_enumerated_plans(self, levels):
        chain, g, h = ladder(levels)
        for plan in PlanSpace(chain, h).iter_plans():
            assert resolve_plan_trace(plan, chain, g, h).reached_sink
            assert oracle_reaches_sink(plan, chain, g, h)

    @pytest.mark.parametrize("seed", range(5))
    def test_mutated_plans(self, seed):
        chain, g, h = ladder(3)
        rng = np.random.default_rng(seed)
        plan = next(PlanSpace(chain, h).iter_plans())
        for _ in range(60):
            plan = mutate_plan(plan, h, rng)
            reached = resolve_plan_trace(plan, chain, g, h).reached_sink
            assert reached == oracle_reaches_sink(plan, chain, g, h)

    def test_motivating_chains(self, motivating_graph, motivating_hierarchy, analysis_config):
        chains = all_chains(motivating_graph)
        results = verify_chains(chains, motivating_graph, motivating_hierarchy, analysis_config)
        assert [r.chain for r in results] == chains
        for result in results:
            if result.is_verified:
                assert oracle_reaches_sink(
                    result.witness_plan, result.chain, motivating_graph, motivating_hierarchy
                )


def test_parallel_verification_matches_serial(
    motivating_graph, motivating_hierarchy, analysis_config
):
    chains = all_chains(motivating_graph)
    args = (chains, motivating_graph, motivating_hierarchy, analysis_config)
    assert verify_chains(*args, workers=1) == verify_chains(*args, workers=4)


def _two_hosts_setup():
    """p/A has two Object-typed properties; only p/X holding a p/Y completes the chain."""
    classes = [
        ClassModel(
            "p/A",
            "java/lang/Object",
            interfaces=(SERIALIZABLE,),
            fields=(ref_field("f1", "java/lang/Object"), ref_field("f2", "java/lang/Object")),
            methods=(
                method(
                    "p/A",
                    "readObject",
                    "(Ljava/io/ObjectInputStream;)V",
                    ("private",),
                    ((InvokeKind.VIRTUAL, OBJECT_EQUALS),),
                ),
            ),
        ),
        ClassModel(
            "p/X",
            "java/lang/Object",
            interfaces=(SERIALIZABLE,),
            fields=(ref_field("g", "java/lang/Object"),),
            methods=(
                method(
                    "p/X",
                    *OBJECT_EQUALS.signature,
                    calls=((InvokeKind.VIRTUAL, OBJECT_TO_STRING),),
                ),
            ),
        ),
        ClassModel(
            "p/Y",
            "java/lang/Object",
            interfaces=(SERIALIZABLE,),
            methods=(
                method("p/Y", *OBJECT_TO_STRING.signature, calls=((InvokeKind.VIRTUAL, EXEC),)),
            ),
        ),
    ]
    h = build_hierarchy(classes)
    g = build_dacg(h)
    chain = GadgetChain(
        (
            MethodId("p/A", "readObject", "(Ljava/io/ObjectInputStream;)V"),
            OBJECT_EQUALS,
            MethodId("p/X", *OBJECT_EQUALS.signature),
            OBJECT_TO_STRING,
            MethodId("p/Y", *OBJECT_TO_STRING.signature),
        ),
        (EdgeKind.CALL, EdgeKind.OVERRIDES, EdgeKind.CALL, EdgeKind.OVERRIDES),
        VulnType.RCE,
    )
    return chain, g, h


def _host(name: str, cls: str, *children: PropertyAssignment, under=()) -> PropertyAssignment:
    holder = "p/A" if not under else "p/X"
    field = ref_field(name, "java/lang/Object")
    return PropertyAssignment(under + (name,), field, holder, cls, children)


class TestHostBacktracking:
    def test_second_host_completes_the_chain(self):
        chain, g, h = _two_hosts_setup()
        plan = ObjectPlan(
            "p/A",
            (_host("f1", "p/X"), _host("f2", "p/X", _host("g", "p/Y", under=("f2",)))),
        )
        trace = resolve_plan_trace(plan, chain, g, h)
        assert trace.reached_sink
        assert [s.receiver for s in trace.steps] == [(), (), ("f2",), ("f2",), ("f2", "g")]
        assert oracle_reaches_sink(plan, chain, g, h)

    def test_failure_reports_first_furthest_attempt(self):
        chain, g, h = _two_hosts_setup()
        plan = ObjectPlan("p/A", (_host("f1", "p/X"), _host("f2", "p/X")))
        trace = resolve_plan_trace(plan, chain, g, h)
        assert not trace.reached_sink
        assert trace.failed_step == 4
        assert trace.steps[-1].receiver == ("f1",)
        assert trace.steps[-1].detail == "no property dispatches toString to p/Y"
        assert trace.coverage == pytest.approx(0.8)
        assert not oracle_reaches_sink(plan, chain, g, h)


REPLAY_SCENARIOS = ("motivating_example", "jdbc_rowset", "decoys", "ladder")


@lru_cache(maxsize=None)
def _replay_scenario(name: str):
    """Chains, seed plans per chain, graph and hierarchy of one fixture."""
    config = AnalysisConfig()
    classes = dispatch_ladder(3) if name == "ladder" else load_ir(name)
    h = build_hierarchy(classes, config)
    g = build_dacg(h, config)
    chains = all_chains(g)
    seeds = []
    for chain in chains:
        try:
            seeds.append(list(islice(PlanSpace(chain, h, config).iter_plans(max_steps=200), 4)))
        except NonInstantiable:
            seeds.append([])
    return chains, seeds, g, h


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.data())
def test_trace_agrees_with_brute_force_replay(data):
    chains, seeds, g, h = _replay_scenario(data.draw(st.sampled_from(REPLAY_SCENARIOS)))
    index = data.draw(st.integers(0, len(chains) - 1))
    chain = chains[index]
    if seeds[index] and data.draw(st.booleans()):
        plan = data.draw(st.sampled_from(seeds[index]))
        rng = np.random.default_rng(data.draw(st.integers(0, 2**16)))
        for _ in range(data.draw(st.integers(0, 8))):
            plan = mutate_plan(plan, h, rng)
    else:
        root = data.draw(st.sampled_from([chain.source.owner, *sorted(h.ingested)]))
        plan = data.draw(object_plans(h, root))

    reached = resolve_plan_trace(plan, chain, g, h).reached_sink
    assert reached == oracle_reaches_sink(plan, chain, g, h)
