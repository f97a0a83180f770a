"""Object plans: the injection object a verifier would serialize.

A plan is a tree. The root object has the class that declares the chain's
first gadget; every class-typed property that steers a dynamic dispatch is a
PropertyAssignment naming the class put into that property. Value-typed
properties (primitives, strings, boxed values, arrays) are primitive
bindings keyed by the path of the object that holds them.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, Iterator, Optional, Union

from src.classmodel.descriptors import (
    TypeDescriptor,
    format_field_descriptor,
    parse_field_descriptor,
)
from src.classmodel.model import FieldModel

ObjectPath = tuple[str, ...]

BOXED_TYPES = {
    "java/lang/Boolean": "Z",
    "java/lang/Byte": "B",
    "java/lang/Character": "C",
    "java/lang/Short": "S",
    "java/lang/Integer": "I",
    "java/lang/Long": "J",
    "java/lang/Float": "F",
    "java/lang/Double": "D",
}
STRING = "java/lang/String"


class PrimitiveKind(Enum):
    BOOLEAN = "boolean"
    INT = "int"
    LONG = "long"
    FLOAT = "float"
    DOUBLE = "double"
    STRING = "string"
    BYTES = "bytes"
    ARRAY = "array"
    NULL = "null"


_KIND_BY_CODE = {
    "Z": PrimitiveKind.BOOLEAN,
    "B": PrimitiveKind.INT,
    "C": PrimitiveKind.INT,
    "S": PrimitiveKind.INT,
    "I": PrimitiveKind.INT,
    "J": PrimitiveKind.LONG,
    "F": PrimitiveKind.FLOAT,
    "D": PrimitiveKind.DOUBLE,
}

PrimitivePayload = Union[bool, int, float, str, bytes, tuple, None]


@dataclass(frozen=True)
class PrimitiveValue:
    """A value-typed property value.

    ``descriptor`` is the field descriptor the value was generated for, so
    that mutation stays within the field's type. Array values hold a tuple
    of PrimitiveValue elements.
    """

    kind: PrimitiveKind
    value: PrimitivePayload
    descriptor: str

    def to_dict(self) -> dict[str, Any]:
        if self.kind is PrimitiveKind.ARRAY:
            assert isinstance(self.value, tuple)
            value: Any = [v.to_dict() for v in self.value]
        elif self.kind is PrimitiveKind.BYTES:
            assert isinstance(self.value, bytes)
            value = self.value.hex()
        elif self.kind in (PrimitiveKind.FLOAT, PrimitiveKind.DOUBLE):
            # JSON has no infinities
            value = repr(float(self.value))  # type: ignore[arg-type]
        else:
            value = self.value
        return {"kind": self.kind.value, "value": value, "descriptor": self.descriptor}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PrimitiveValue":
        kind = PrimitiveKind(data["kind"])
        raw = data["value"]
        if kind is PrimitiveKind.ARRAY:
            value: PrimitivePayload = tuple(cls.from_dict(v) for v in raw)
        elif kind is PrimitiveKind.BYTES:
            value = bytes.fromhex(raw)
        elif kind in (PrimitiveKind.FLOAT, PrimitiveKind.DOUBLE):
            value = float(raw)
        else:
            value = raw
        return cls(kind, value, data["descriptor"])


def is_value_type(declared: TypeDescriptor) -> bool:
    """Types bound as primitive values rather than assigned a class."""
    if declared.is_primitive or declared.is_array:
        return True
    return declared.class_name == STRING or declared.class_name in BOXED_TYPES


def default_value(declared: TypeDescriptor) -> PrimitiveValue:
    """Zero, false, empty string or empty array for a value-typed field."""
    descriptor = format_field_descriptor(declared)
    if declared.is_array:
        if declared.dims == 1 and declared.element and declared.element.primitive == "B":
            return PrimitiveValue(PrimitiveKind.BYTES, b"", descriptor)
        return PrimitiveValue(PrimitiveKind.ARRAY, (), descriptor)
    if declared.is_primitive:
        code = declared.primitive
    elif declared.class_name == STRING:
        return PrimitiveValue(PrimitiveKind.STRING, "", descriptor)
    elif declared.class_name in BOXED_TYPES:
        code = BOXED_TYPES[declared.class_name]
    else:
        return PrimitiveValue(PrimitiveKind.NULL, None, descriptor)

    assert code is not None
    kind = _KIND_BY_CODE[code]
    if kind is PrimitiveKind.BOOLEAN:
        return PrimitiveValue(kind, False, descriptor)
    if kind in (PrimitiveKind.FLOAT, PrimitiveKind.DOUBLE):
        return PrimitiveValue(kind, 0.0, descriptor)
    return PrimitiveValue(kind, 0, descriptor)


def primitive_code(descriptor: str) -> Optional[str]:
    """Primitive code behind a primitive or boxed descriptor, else None."""
    declared = parse_field_descriptor(descriptor)
    if declared.is_primitive:
        return declared.primitive
    if declared.is_reference:
        return BOXED_TYPES.get(declared.class_name or "")
    return None


@dataclass(frozen=True)
class PropertyAssignment:
    """A class chosen for one class-typed property.

    ``path`` is the full path of the property from the root object, ending
    with the field name; ``holder`` is the class declaring the field.
    """

    path: ObjectPath
    field: FieldModel
    holder: str
    assigned_class: str
    children: tuple["PropertyAssignment", ...] = ()

    @property
    def dotted(self) -> str:
        return ".".join(self.path)

    def to_dict(self) -> dict[str, Any]:
        return {
            "path": list(self.path),
            "field": self.field.name,
            "holder": self.holder,
            "declared_type": format_field_descriptor(self.field.declared_type),
            "class": self.assigned_class,
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PropertyAssignment":
        return cls(
            path=tuple(data["path"]),
            field=FieldModel(data["field"], parse_field_descriptor(data["declared_type"])),
            holder=data["holder"],
            assigned_class=data["class"],
            children=tuple(cls.from_dict(c) for c in data["children"]),
        )


@dataclass(frozen=True)
class Binding:
    """Value of one value-typed field of the object at ``owner_path``."""

    owner_path: ObjectPath
    field_name: str
    value: PrimitiveValue


def _sorted_bindings(bindings: Iterable[Binding]) -> tuple[Binding, ...]:
    return tuple(sorted(bindings, key=lambda b: (b.owner_path, b.field_name)))


@dataclass(frozen=True)
class ObjectPlan:
    """Injection object description.

    ``complete`` is False for partial plans produced when some dispatch edge
    could not be satisfied; ``blocked_edge`` then names that edge.
    """

    root_class: str
    assignments: tuple[PropertyAssignment, ...] = ()
    primitive_bindings: tuple[Binding, ...] = ()
    complete: bool = True
    blocked_edge: Optional[int] = None

    def iter_assignments(self) -> Iterator[PropertyAssignment]:
        """All assignments, parents before children, in path order."""
        stack = list(reversed(self.assignments))
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def objects(self) -> list[tuple[ObjectPath, str]]:
        """(object path, class) for the root and every assigned object."""
        return [((), self.root_class)] + [
            (a.path, a.assigned_class) for a in self.iter_assignments()
        ]

    def class_at(self, path: ObjectPath) -> Optional[str]:
        for object_path, cls in self.objects():
            if object_path == path:
                return cls
        return None

    def assignment_at(self, path: ObjectPath) -> Optional[PropertyAssignment]:
        for a in self.iter_assignments():
            if a.path == path:
                return a
        return None

    def children_of(self, path: ObjectPath) -> tuple[PropertyAssignment, ...]:
        if not path:
            return self.assignments
        node = self.assignment_at(path)
        return node.children if node is not None else ()

    def depth(self) -> int:
        return max((len(a.path) for a in self.iter_assignments()), default=0)

    def binding_map(self) -> dict[tuple[ObjectPath, str], PrimitiveValue]:
        return {(b.owner_path, b.field_name): b.value for b in self.primitive_bindings}

    def to_dict(self) -> dict[str, Any]:
        return {
            "root": self.root_class,
            "assignments": [a.to_dict() for a in self.assignments],
            "primitives": [
                {"path": list(b.owner_path), "field": b.field_name, "value": b.value.to_dict()}
                for b in self.primitive_bindings
            ],
            "complete": self.complete,
            "blocked_edge": self.blocked_edge,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ObjectPlan":
        return cls(
            root_class=data["root"],
            assignments=tuple(PropertyAssignment.from_dict(a) for a in data["assignments"]),
            primitive_bindings=_sorted_bindings(
                Binding(tuple(b["path"]), b["field"], PrimitiveValue.from_dict(b["value"]))
                for b in data["primitives"]
            ),
            complete=data.get("complete", True),
            blocked_edge=data.get("blocked_edge"),
        )


def _attach(
    nodes: tuple[PropertyAssignment, ...], parent: ObjectPath, new: PropertyAssignment
) -> tuple[PropertyAssignment, ...]:
    if not parent:
        return tuple(sorted(nodes + (new,), key=lambda a: a.path))
    updated = []
    for node in nodes:
        if parent[: len(node.path)] == node.path:
            if node.path == parent:
                children = tuple(sorted(node.children + (new,), key=lambda a: a.path))
                node = replace(node, children=children)
            else:
                node = replace(node, children=_attach(node.children, parent, new))
        updated.append(node)
    return tuple(updated)


def with_assignment(
    plan: ObjectPlan, parent: ObjectPath, assignment: PropertyAssignment
) -> ObjectPlan:
    """Copy of ``plan`` with ``assignment`` added under the object at ``parent``."""
    return replace(plan, assignments=_attach(plan.assignments, parent, assignment))


def _replace_node(
    nodes: tuple[PropertyAssignment, ...], new: PropertyAssignment
) -> tuple[PropertyAssignment, ...]:
    updated = []
    for node in nodes:
        if node.path == new.path:
            node = new
        elif new.path[: len(node.path)] == node.path:
            node = replace(node, children=_replace_node(node.children, new))
        updated.append(node)
    return tuple(updated)


def with_replaced_assignment(plan: ObjectPlan, assignment: PropertyAssignment) -> ObjectPlan:
    """Copy of ``plan`` with the assignment at ``assignment.path`` swapped out."""
    return replace(plan, assignments=_replace_node(plan.assignments, assignment))


def with_bindings(
    plan: ObjectPlan,
    updates: dict[tuple[ObjectPath, str], PrimitiveValue],
    drop_under: Optional[ObjectPath] = None,
) -> ObjectPlan:
    """
    Copy of ``plan`` with primitive bindings changed.

    Args:
        plan: Plan to copy
        updates: Bindings to set, keyed by (object path, field name)
        drop_under: Remove existing bindings of objects at or below this path first
    """
    current = plan.binding_map()
    if drop_under is not None:
        current = {
            key: value
            for key, value in current.items()
            if key[0][: len(drop_under)] != drop_under
        }
    current.update(updates)
    bindings = _sorted_bindings(
        Binding(path, name, value) for (path, name), value in current.items()
    )
    return replace(plan, primitive_bindings=bindings)
