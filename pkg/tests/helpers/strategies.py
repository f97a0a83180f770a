"""Hypothesis strategies for class hierarchies and call graphs."""

from dataclasses import replace

import networkx as nx
from hypothesis import strategies as st

from src.analysis.dacg import DaCg, EdgeKind, NodeMeta
from src.analysis.hierarchy import Hierarchy
from src.classmodel.model import ClassModel, InvokeKind, InvokeSite, MethodId, MethodModel
from src.verification.plan import ObjectPath, ObjectPlan, PropertyAssignment

OBJECT = "java/lang/Object"
SIGNATURES = (("m", "()V"), ("n", "(I)V"), ("equals", "(Ljava/lang/Object;)Z"))
RESOLVED_KINDS = [k for k in InvokeKind if k is not InvokeKind.DYNAMIC]
FLAG_SETS = (
    frozenset({"public"}),
    frozenset({"public", "final"}),
    frozenset({"private"}),
    frozenset({"public", "static"}),
    frozenset({"protected"}),
)


@st.composite
def class_hierarchies(draw, max_classes: int = 8) -> list[ClassModel]:
    """
    Acyclic hierarchies of classes and interfaces below java/lang/Object.

    Class i only extends or implements types with a lower index, so the
    supertype graph never has a cycle.
    """
    count = draw(st.integers(min_value=1, max_value=max_classes))
    kinds = draw(st.lists(st.booleans(), min_size=count, max_size=count))
    classes: list[ClassModel] = []
    for i in range(count):
        name = f"gen/C{i}"
        is_interface = kinds[i]
        earlier_classes = [c.name for c in classes if not c.is_interface]
        earlier_interfaces = [c.name for c in classes if c.is_interface]

        super_name = OBJECT
        if not is_interface and earlier_classes:
            super_name = draw(st.sampled_from([OBJECT] + earlier_classes))
        interfaces: tuple[str, ...] = ()
        if earlier_interfaces:
            interfaces = tuple(
                sorted(draw(st.sets(st.sampled_from(earlier_interfaces), max_size=2)))
            )
        if not is_interface and draw(st.booleans()):
            interfaces = interfaces + ("java/io/Serializable",)

        methods = []
        for sig in draw(st.sets(st.sampled_from(SIGNATURES), max_size=len(SIGNATURES))):
            if is_interface:
                flags = frozenset({"public", "abstract"})
            else:
                flags = draw(st.sampled_from(FLAG_SETS))
            methods.append(
                MethodModel(MethodId(name, *sig), flags, (), is_concrete=not is_interface)
            )
        classes.append(
            ClassModel(
                name=name,
                super_name=super_name,
                interfaces=interfaces,
                methods=tuple(sorted(methods, key=lambda m: m.id)),
                is_interface=is_interface,
                is_abstract=is_interface,
            )
        )
    return classes


@st.composite
def hierarchies_with_calls(draw, max_classes: int = 10) -> list[ClassModel]:
    """Random hierarchies whose concrete methods call into the hierarchy or past it."""
    classes = draw(class_hierarchies(max_classes))
    owners = [c.name for c in classes] + [OBJECT, "gen/Missing"]
    site = st.tuples(
        st.sampled_from(RESOLVED_KINDS), st.sampled_from(owners), st.sampled_from(SIGNATURES)
    )
    result = []
    for model in classes:
        methods = []
        for method in model.methods:
            if method.is_concrete:
                calls = draw(st.lists(site, max_size=3))
                sites = tuple(
                    InvokeSite(kind, MethodId(owner, *sig), 3 * i)
                    for i, (kind, owner, sig) in enumerate(calls)
                )
                method = replace(method, invoke_sites=sites)
            methods.append(method)
        result.append(replace(model, methods=tuple(methods)))
    return result


def graph_from_edges(node_count: int, edges: list[tuple[int, int, EdgeKind]]) -> DaCg:
    """Call graph over nodes ``g/N<i>.m()V`` with the given edges."""
    graph = nx.MultiDiGraph()
    nodes = [MethodId(f"g/N{i}", "m", "()V") for i in range(node_count)]
    for node in nodes:
        graph.add_node(node, meta=NodeMeta(True, True))
    for a, b, kind in edges:
        if a != b:
            graph.add_edge(nodes[a], nodes[b], key=kind.value)
    return DaCg(graph=graph)


@st.composite
def call_graphs(draw, max_nodes: int = 7) -> DaCg:
    """Small random multigraphs with CALL and OVERRIDES edges."""
    count = draw(st.integers(min_value=2, max_value=max_nodes))
    edges = draw(
        st.lists(
            st.tuples(
                st.integers(0, count - 1),
                st.integers(0, count - 1),
                st.sampled_from(list(EdgeKind)),
            ),
            max_size=count * 3,
        )
    )
    return graph_from_edges(count, edges)


@st.composite
def object_plans(draw, h: Hierarchy, root: str, max_depth: int = 3) -> ObjectPlan:
    """
    Plans that put arbitrary ingested classes into a random subset of properties.

    Assigned classes need not fit the declared type, so most of these plans
    are ill-typed somewhere.
    """
    pool = sorted(h.ingested)

    def assign(path: ObjectPath, cls: str) -> tuple[PropertyAssignment, ...]:
        if len(path) == max_depth:
            return ()
        children = []
        for holder, fld in h.instance_fields(cls):
            if fld.declared_type.class_name is None or not draw(st.booleans()):
                continue
            child = draw(st.sampled_from(pool))
            child_path = path + (fld.name,)
            children.append(
                PropertyAssignment(child_path, fld, holder, child, assign(child_path, child))
            )
        return tuple(sorted(children, key=lambda a: a.path))

    return ObjectPlan(root, assign((), root))
