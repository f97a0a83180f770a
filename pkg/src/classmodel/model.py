"""Normalized class model shared by the classfile, archive and IR front ends."""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from src.classmodel.descriptors import (
    MethodDescriptor,
    TypeDescriptor,
    parse_method_descriptor,
)

CONSTRUCTOR_NAMES = frozenset({"<init>", "<clinit>"})

# Access flags kept on methods; others (bridge, synthetic, ...) are dropped
METHOD_FLAGS = {
    0x0001: "public",
    0x0002: "private",
    0x0004: "protected",
    0x0008: "static",
    0x0010: "final",
    0x0100: "native",
    0x0400: "abstract",
}
KNOWN_METHOD_FLAGS = frozenset(METHOD_FLAGS.values())


class InvokeKind(Enum):
    VIRTUAL = "virtual"
    INTERFACE = "interface"
    SPECIAL = "special"
    STATIC = "static"
    DYNAMIC = "dynamic"


class ClassSource(Enum):
    CLASSFILE = "classfile"
    ARCHIVE_ENTRY = "archive_entry"
    IR_FIXTURE = "ir_fixture"
    PLATFORM_STUB = "platform_stub"


@dataclass(frozen=True, order=True)
class MethodId:
    """Identity of a method: declaring class, name and descriptor."""

    owner: str
    name: str
    descriptor: str

    @property
    def signature(self) -> tuple[str, str]:
        """Name and descriptor, the part compared when checking overriding."""
        return (self.name, self.descriptor)

    @property
    def parsed_descriptor(self) -> MethodDescriptor:
        return parse_method_descriptor(self.descriptor)

    @property
    def is_constructor(self) -> bool:
        return self.name in CONSTRUCTOR_NAMES

    def __str__(self) -> str:
        return f"{self.owner}.{self.name}{self.descriptor}"

    @classmethod
    def parse(cls, text: str) -> "MethodId":
        """
        Parse the ``owner.name(desc)`` form produced by ``str()``.

        Args:
            text: e.g. ``java/lang/Object.equals(Ljava/lang/Object;)Z``

        Returns:
            Method identity

        Raises:
            ValueError: If the text has no owner, name or descriptor
        """
        paren = text.find("(")
        if paren < 0:
            raise ValueError(f"Method id without descriptor: {text!r}")
        dot = text.rfind(".", 0, paren)
        if dot <= 0 or dot == paren - 1:
            raise ValueError(f"Method id without owner or name: {text!r}")
        return cls(text[:dot], text[dot + 1 : paren], text[paren:])


@dataclass(frozen=True)
class InvokeSite:
    """One invoke instruction inside a method body.

    ``target`` is None for dynamic sites, which carry only the
    bootstrap name and descriptor.
    """

    kind: InvokeKind
    target: Optional[MethodId]
    bytecode_offset: int
    dynamic_name: Optional[str] = None
    dynamic_descriptor: Optional[str] = None

    @property
    def is_unresolved(self) -> bool:
        return self.kind is InvokeKind.DYNAMIC


@dataclass(frozen=True)
class FieldModel:
    name: str
    declared_type: TypeDescriptor
    is_static: bool = False
    is_transient: bool = False


@dataclass(frozen=True)
class MethodModel:
    """A declared method with its invoke sites in bytecode order."""

    id: MethodId
    access_flags: frozenset[str] = field(default_factory=frozenset)
    invoke_sites: tuple[InvokeSite, ...] = ()
    is_concrete: bool = True

    @property
    def is_static(self) -> bool:
        return "static" in self.access_flags

    @property
    def is_private(self) -> bool:
        return "private" in self.access_flags

    @property
    def is_final(self) -> bool:
        return "final" in self.access_flags

    @property
    def is_abstract(self) -> bool:
        return "abstract" in self.access_flags

    @property
    def can_be_overridden(self) -> bool:
        """Eligible as the overridden side of an overriding pair."""
        return not (
            self.is_private or self.is_static or self.is_final or self.id.is_constructor
        )

    @property
    def can_override(self) -> bool:
        """Eligible as the overriding side of an overriding pair."""
        return not (self.is_private or self.is_static or self.id.is_constructor)


@dataclass(frozen=True)
class ClassModel:
    """A class or interface as seen by the analysis.

    ``super_name`` is None only for ``java/lang/Object``. Methods are unique
    by (name, descriptor) and all have this class as owner.
    """

    name: str
    super_name: Optional[str]
    interfaces: tuple[str, ...] = ()
    fields: tuple[FieldModel, ...] = ()
    methods: tuple[MethodModel, ...] = ()
    is_interface: bool = False
    is_abstract: bool = False
    source: ClassSource = ClassSource.IR_FIXTURE

    @property
    def direct_supertypes(self) -> tuple[str, ...]:
        if self.super_name is None:
            return self.interfaces
        return (self.super_name,) + self.interfaces

    @property
    def is_concrete(self) -> bool:
        return not (self.is_interface or self.is_abstract)

    def find_method(self, name: str, descriptor: str) -> Optional[MethodModel]:
        for method in self.methods:
            if method.id.name == name and method.id.descriptor == descriptor:
                return method
        return None

    def find_field(self, name: str) -> Optional[FieldModel]:
        for f in self.fields:
            if f.name == name:
                return f
        return None

    def with_source(self, source: ClassSource) -> "ClassModel":
        return replace(self, source=source)


def method_flags_from_bits(bits: int) -> frozenset[str]:
    """Translate JVM method access bits to the kept flag names."""
    return frozenset(name for bit, name in METHOD_FLAGS.items() if bits & bit)
