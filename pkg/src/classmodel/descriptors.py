"""JVM type descriptors and internal class names.

Field descriptors look like ``I``, ``Ljava/lang/String;`` or ``[[B``; method
descriptors like ``(ILjava/lang/Object;)V``.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from src.common.errors import DescriptorError

PRIMITIVE_CODES = {
    "B": "byte",
    "C": "char",
    "D": "double",
    "F": "float",
    "I": "int",
    "J": "long",
    "S": "short",
    "Z": "boolean",
}

_NAME_FORBIDDEN = set(".;[")


class TypeKind(Enum):
    PRIMITIVE = "primitive"
    REFERENCE = "reference"
    ARRAY = "array"


@dataclass(frozen=True)
class TypeDescriptor:
    """A field type.

    Exactly one of ``primitive``/``class_name``/``element`` is set, depending
    on ``kind``. Arrays keep their innermost non-array element and the
    number of dimensions.
    """

    kind: TypeKind
    primitive: Optional[str] = None
    class_name: Optional[str] = None
    element: Optional["TypeDescriptor"] = None
    dims: int = 0

    def __post_init__(self) -> None:
        if self.kind is TypeKind.PRIMITIVE and self.primitive not in PRIMITIVE_CODES:
            raise ValueError(f"Unknown primitive code {self.primitive!r}")
        if self.kind is TypeKind.ARRAY:
            if self.element is None or self.element.kind is TypeKind.ARRAY or self.dims < 1:
                raise ValueError("Arrays need a non-array element and at least one dimension")

    @classmethod
    def of_primitive(cls, code: str) -> "TypeDescriptor":
        return cls(TypeKind.PRIMITIVE, primitive=code)

    @classmethod
    def of_class(cls, name: str) -> "TypeDescriptor":
        return cls(TypeKind.REFERENCE, class_name=name)

    @classmethod
    def array_of(cls, element: "TypeDescriptor", dims: int = 1) -> "TypeDescriptor":
        if element.kind is TypeKind.ARRAY:
            assert element.element is not None
            return cls(TypeKind.ARRAY, element=element.element, dims=element.dims + dims)
        return cls(TypeKind.ARRAY, element=element, dims=dims)

    @property
    def is_reference(self) -> bool:
        """True for non-array class types."""
        return self.kind is TypeKind.REFERENCE

    @property
    def is_array(self) -> bool:
        return self.kind is TypeKind.ARRAY

    @property
    def is_primitive(self) -> bool:
        return self.kind is TypeKind.PRIMITIVE

    def component(self) -> "TypeDescriptor":
        """The type of one array element (an array of one fewer dimension)."""
        if self.element is None:
            raise ValueError(f"{self} is not an array type")
        if self.dims == 1:
            return self.element
        return TypeDescriptor(TypeKind.ARRAY, element=self.element, dims=self.dims - 1)

    def __str__(self) -> str:
        return format_field_descriptor(self)


@dataclass(frozen=True)
class MethodDescriptor:
    """Parameter types and return type; ``returns`` is None for void."""

    params: tuple[TypeDescriptor, ...]
    returns: Optional[TypeDescriptor]

    def __str__(self) -> str:
        return format_method_descriptor(self)


def is_valid_internal_name(name: str) -> bool:
    """
    Check an internal class name such as ``java/lang/String``.

    Args:
        name: Candidate internal name

    Returns:
        True if the name has no empty segments and no forbidden characters
    """
    if not name:
        return False
    if any(ch in _NAME_FORBIDDEN for ch in name):
        return False
    return all(segment for segment in name.split("/"))


def _parse_one(text: str, pos: int, original: str) -> tuple[TypeDescriptor, int]:
    if pos >= len(text):
        raise DescriptorError(original, "unexpected end of descriptor")

    dims = 0
    while pos < len(text) and text[pos] == "[":
        dims += 1
        pos += 1
    if dims > 255:
        raise DescriptorError(original, "more than 255 array dimensions")
    if pos >= len(text):
        raise DescriptorError(original, "array without element type")

    code = text[pos]
    if code in PRIMITIVE_CODES:
        base = TypeDescriptor.of_primitive(code)
        pos += 1
    elif code == "L":
        end = text.find(";", pos)
        if end < 0:
            raise DescriptorError(original, "class type without terminating ';'")
        name = text[pos + 1 : end]
        if not is_valid_internal_name(name):
            raise DescriptorError(original, f"invalid class name {name!r}")
        base = TypeDescriptor.of_class(name)
        pos = end + 1
    else:
        raise DescriptorError(original, f"unexpected character {code!r} at {pos}")

    if dims:
        return TypeDescriptor.array_of(base, dims), pos
    return base, pos


def parse_field_descriptor(text: str) -> TypeDescriptor:
    """
    Parse a field descriptor.

    Args:
        text: Descriptor such as ``[Ljava/lang/Object;``

    Returns:
        Parsed type

    Raises:
        DescriptorError: If the text is not exactly one well-formed type
    """
    descriptor, end = _parse_one(text, 0, text)
    if end != len(text):
        raise DescriptorError(text, f"trailing characters after position {end}")
    return descriptor


def parse_method_descriptor(text: str) -> MethodDescriptor:
    """
    Parse a method descriptor.

    Args:
        text: Descriptor such as ``(Ljava/lang/Object;)Z``

    Returns:
        Parsed parameter and return types

    Raises:
        DescriptorError: If the text is malformed
    """
    if not text.startswith("("):
        raise DescriptorError(text, "method descriptor must start with '('")
    pos = 1
    params = []
    while True:
        if pos >= len(text):
            raise DescriptorError(text, "unterminated parameter list")
        if text[pos] == ")":
            pos += 1
            break
        param, pos = _parse_one(text, pos, text)
        params.append(param)

    if text[pos:] == "V":
        return MethodDescriptor(tuple(params), None)
    returns, end = _parse_one(text, pos, text)
    if end != len(text):
        raise DescriptorError(text, f"trailing characters after position {end}")
    return MethodDescriptor(tuple(params), returns)


def format_field_descriptor(descriptor: TypeDescriptor) -> str:
    """Render a type back to descriptor syntax."""
    if descriptor.kind is TypeKind.PRIMITIVE:
        assert descriptor.primitive is not None
        return descriptor.primitive
    if descriptor.kind is TypeKind.REFERENCE:
        return f"L{descriptor.class_name};"
    assert descriptor.element is not None
    return "[" * descriptor.dims + format_field_descriptor(descriptor.element)


def format_method_descriptor(descriptor: MethodDescriptor) -> str:
    """Render a method descriptor back to descriptor syntax."""
    params = "".join(format_field_descriptor(p) for p in descriptor.params)
    returns = "V" if descriptor.returns is None else format_field_descriptor(descriptor.returns)
    return f"({params}){returns}"


def to_internal_name(name: str) -> str:
    """Convert ``java.lang.String`` to ``java/lang/String``; internal names pass through."""
    return name.replace(".", "/")
