"""Decoder for JVM classfiles, producing a ClassModel.

Only what the analysis needs is kept: names, supertypes, fields, methods and
the invoke instructions of each method body. Every other attribute is skipped.
"""

import struct
from typing import Any, Optional

from src.classmodel.descriptors import (
    is_valid_internal_name,
    parse_field_descriptor,
    parse_method_descriptor,
)
from src.classmodel.model import (
    ClassModel,
    ClassSource,
    FieldModel,
    InvokeKind,
    InvokeSite,
    MethodId,
    MethodModel,
    method_flags_from_bits,
)
from src.classmodel.opcodes import (
    INVOKEDYNAMIC,
    INVOKEINTERFACE,
    INVOKESPECIAL,
    INVOKESTATIC,
    INVOKEVIRTUAL,
    instruction_length,
)
from src.common.errors import DescriptorError, MalformedClassfile, UnsupportedVersion
from src.common.logger import setup_logger

logger = setup_logger(__name__)

MAGIC = 0xCAFEBABE
DEFAULT_MAX_VERSION = 52

ACC_STATIC = 0x0008
ACC_TRANSIENT = 0x0080
ACC_NATIVE = 0x0100
ACC_INTERFACE = 0x0200
ACC_ABSTRACT = 0x0400

CONSTANT_UTF8 = 1
CONSTANT_INTEGER = 3
CONSTANT_FLOAT = 4
CONSTANT_LONG = 5
CONSTANT_DOUBLE = 6
CONSTANT_CLASS = 7
CONSTANT_STRING = 8
CONSTANT_FIELDREF = 9
CONSTANT_METHODREF = 10
CONSTANT_INTERFACE_METHODREF = 11
CONSTANT_NAME_AND_TYPE = 12
CONSTANT_METHOD_HANDLE = 15
CONSTANT_METHOD_TYPE = 16
CONSTANT_DYNAMIC = 17
CONSTANT_INVOKE_DYNAMIC = 18
CONSTANT_MODULE = 19
CONSTANT_PACKAGE = 20

# Struct format of each constant's payload
_CONSTANT_FORMATS = {
    CONSTANT_INTEGER: ">i",
    CONSTANT_FLOAT: ">f",
    CONSTANT_LONG: ">q",
    CONSTANT_DOUBLE: ">d",
    CONSTANT_CLASS: ">H",
    CONSTANT_STRING: ">H",
    CONSTANT_FIELDREF: ">HH",
    CONSTANT_METHODREF: ">HH",
    CONSTANT_INTERFACE_METHODREF: ">HH",
    CONSTANT_NAME_AND_TYPE: ">HH",
    CONSTANT_METHOD_HANDLE: ">BH",
    CONSTANT_METHOD_TYPE: ">H",
    CONSTANT_DYNAMIC: ">HH",
    CONSTANT_INVOKE_DYNAMIC: ">HH",
    CONSTANT_MODULE: ">H",
    CONSTANT_PACKAGE: ">H",
}

_INVOKE_KINDS = {
    INVOKEVIRTUAL: InvokeKind.VIRTUAL,
    INVOKESPECIAL: InvokeKind.SPECIAL,
    INVOKESTATIC: InvokeKind.STATIC,
    INVOKEINTERFACE: InvokeKind.INTERFACE,
}


def decode_modified_utf8(raw: bytes) -> str:
    """
    Decode the JVM's modified UTF-8.

    NUL is stored as C0 80 and supplementary characters as surrogate pairs.
    """
    text = raw.replace(b"\xc0\x80", b"\x00").decode("utf-8", errors="surrogatepass")
    return text.encode("utf-16", errors="surrogatepass").decode("utf-16")


class _Reader:
    """Big-endian cursor over classfile bytes that reports offsets on failure."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def unpack(self, fmt: str) -> tuple[Any, ...]:
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.data):
            raise MalformedClassfile(self.offset, "unexpected end of data")
        values = struct.unpack_from(fmt, self.data, self.offset)
        self.offset += size
        return values

    def u1(self) -> int:
        return self.unpack(">B")[0]

    def u2(self) -> int:
        return self.unpack(">H")[0]

    def u4(self) -> int:
        return self.unpack(">I")[0]

    def read(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise MalformedClassfile(self.offset, f"truncated block of {size} bytes")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk


class _ConstantPool:
    """Parsed constant pool with typed accessors."""

    def __init__(self, reader: _Reader):
        count = reader.u2()
        if count == 0:
            raise MalformedClassfile(reader.offset - 2, "constant pool count is zero")
        self.entries: list[Optional[tuple[int, Any]]] = [None] * count
        self.offsets: list[int] = [0] * count

        index = 1
        while index < count:
            start = reader.offset
            tag = reader.u1()
            if tag == CONSTANT_UTF8:
                length = reader.u2()
                raw = reader.read(length)
                try:
                    value: Any = decode_modified_utf8(raw)
                except UnicodeError as e:
                    raise MalformedClassfile(start, f"invalid utf8 constant: {e}") from e
            elif tag in _CONSTANT_FORMATS:
                value = reader.unpack(_CONSTANT_FORMATS[tag])
            else:
                raise MalformedClassfile(start, f"unknown constant pool tag {tag}")

            self.entries[index] = (tag, value)
            self.offsets[index] = start
            # Long and double constants take two slots
            index += 2 if tag in (CONSTANT_LONG, CONSTANT_DOUBLE) else 1

    def _entry(self, index: int, expected: tuple[int, ...], at: int) -> Any:
        if not 0 < index < len(self.entries) or self.entries[index] is None:
            raise MalformedClassfile(at, f"constant pool index {index} out of range")
        entry = self.entries[index]
        assert entry is not None
        tag, value = entry
        if tag not in expected:
            raise MalformedClassfile(
                at, f"constant {index} has tag {tag}, expected one of {expected}"
            )
        return value

    def utf8(self, index: int, at: int) -> str:
        return self._entry(index, (CONSTANT_UTF8,), at)

    def class_name(self, index: int, at: int) -> str:
        (name_index,) = self._entry(index, (CONSTANT_CLASS,), at)
        name = self.utf8(name_index, at)
        # Array classes can appear as owners (e.g. clone on an array)
        if not name.startswith("[") and not is_valid_internal_name(name):
            raise MalformedClassfile(at, f"invalid class name {name!r}")
        return name

    def name_and_type(self, index: int, at: int) -> tuple[str, str]:
        name_index, type_index = self._entry(index, (CONSTANT_NAME_AND_TYPE,), at)
        return self.utf8(name_index, at), self.utf8(type_index, at)

    def method_ref(self, index: int, at: int) -> MethodId:
        class_index, nat_index = self._entry(
            index, (CONSTANT_METHODREF, CONSTANT_INTERFACE_METHODREF), at
        )
        name, descriptor = self.name_and_type(nat_index, at)
        _check_method_descriptor(descriptor, at)
        return MethodId(self.class_name(class_index, at), name, descriptor)

    def invoke_dynamic(self, index: int, at: int) -> tuple[str, str]:
        _, nat_index = self._entry(index, (CONSTANT_INVOKE_DYNAMIC,), at)
        return self.name_and_type(nat_index, at)


def _check_method_descriptor(descriptor: str, at: int) -> None:
    try:
        parse_method_descriptor(descriptor)
    except DescriptorError as e:
        raise MalformedClassfile(at, str(e)) from e


def _skip_attributes(reader: _Reader) -> None:
    count = reader.u2()
    for _ in range(count):
        reader.u2()
        length = reader.u4()
        reader.read(length)


def _decode_invoke_sites(
    code: bytes, pool: _ConstantPool, code_start: int
) -> tuple[InvokeSite, ...]:
    """
    Walk a method body and collect its invoke instructions.

    Args:
        code: Bytecode of the method
        pool: Constant pool of the class
        code_start: File offset of the first code byte, for error reporting

    Returns:
        Invoke sites in bytecode order

    Raises:
        MalformedClassfile: On unknown opcodes, truncated instructions or bad references
    """
    sites = []
    offset = 0
    while offset < len(code):
        length = instruction_length(code, offset)
        at = code_start + offset
        if length is None:
            raise MalformedClassfile(at, f"invalid or truncated opcode 0x{code[offset]:02x}")

        opcode = code[offset]
        if opcode in _INVOKE_KINDS:
            (index,) = struct.unpack_from(">H", code, offset + 1)
            target = pool.method_ref(index, at)
            sites.append(InvokeSite(_INVOKE_KINDS[opcode], target, offset))
        elif opcode == INVOKEDYNAMIC:
            (index,) = struct.unpack_from(">H", code, offset + 1)
            name, descriptor = pool.invoke_dynamic(index, at)
            sites.append(
                InvokeSite(
                    InvokeKind.DYNAMIC,
                    None,
                    offset,
                    dynamic_name=name,
                    dynamic_descriptor=descriptor,
                )
            )
        offset += length
    return tuple(sites)


def _parse_fields(reader: _Reader, pool: _ConstantPool) -> tuple[FieldModel, ...]:
    fields = []
    for _ in range(reader.u2()):
        at = reader.offset
        flags, name_index, descriptor_index = reader.unpack(">HHH")
        name = pool.utf8(name_index, at)
        descriptor = pool.utf8(descriptor_index, at)
        try:
            declared_type = parse_field_descriptor(descriptor)
        except DescriptorError as e:
            raise MalformedClassfile(at, str(e)) from e
        fields.append(
            FieldModel(
                name=name,
                declared_type=declared_type,
                is_static=bool(flags & ACC_STATIC),
                is_transient=bool(flags & ACC_TRANSIENT),
            )
        )
        _skip_attributes(reader)
    return tuple(fields)


def _parse_methods(
    reader: _Reader, pool: _ConstantPool, owner: str
) -> tuple[MethodModel, ...]:
    methods = []
    seen: set[tuple[str, str]] = set()
    for _ in range(reader.u2()):
        at = reader.offset
        flags, name_index, descriptor_index = reader.unpack(">HHH")
        name = pool.utf8(name_index, at)
        descriptor = pool.utf8(descriptor_index, at)
        _check_method_descriptor(descriptor, at)
        if (name, descriptor) in seen:
            raise MalformedClassfile(at, f"duplicate method {name}{descriptor}")
        seen.add((name, descriptor))

        sites: tuple[InvokeSite, ...] = ()
        has_code = False
        for _ in range(reader.u2()):
            attr_at = reader.offset
            attr_name = pool.utf8(reader.u2(), attr_at)
            length = reader.u4()
            body_start = reader.offset
            if attr_name != "Code":
                reader.read(length)
                continue
            has_code = True
            reader.unpack(">HH")  # max_stack, max_locals
            code_length = reader.u4()
            code_start = reader.offset
            code = reader.read(code_length)
            sites = _decode_invoke_sites(code, pool, code_start)
            exception_count = reader.u2()
            reader.read(exception_count * 8)
            _skip_attributes(reader)
            if reader.offset - body_start != length:
                raise MalformedClassfile(attr_at, "Code attribute length mismatch")

        abstract_or_native = bool(flags & (ACC_ABSTRACT | ACC_NATIVE))
        if abstract_or_native and has_code:
            raise MalformedClassfile(at, f"abstract or native method {name} has code")
        methods.append(
            MethodModel(
                id=MethodId(owner, name, descriptor),
                access_flags=method_flags_from_bits(flags),
                invoke_sites=sites,
                is_concrete=has_code,
            )
        )
    return tuple(methods)


def parse_classfile(
    data: bytes,
    max_version: int = DEFAULT_MAX_VERSION,
    source: ClassSource = ClassSource.CLASSFILE,
) -> ClassModel:
    """
    Decode one classfile.

    Args:
        data: Raw classfile bytes
        max_version: Highest accepted major version
        source: Provenance recorded on the model

    Returns:
        The decoded class model

    Raises:
        MalformedClassfile: If the bytes are not a well-formed classfile
        UnsupportedVersion: If the major version exceeds ``max_version``
    """
    reader = _Reader(data)
    (magic,) = reader.unpack(">I")
    if magic != MAGIC:
        raise MalformedClassfile(0, f"bad magic 0x{magic:08x}")

    _minor, major = reader.unpack(">HH")
    if major > max_version:
        raise UnsupportedVersion(major, max_version)
    if major < 45:
        raise MalformedClassfile(6, f"invalid major version {major}")

    pool = _ConstantPool(reader)

    at = reader.offset
    access, this_index, super_index = reader.unpack(">HHH")
    name = pool.class_name(this_index, at)
    super_name: Optional[str] = None
    if super_index:
        super_name = pool.class_name(super_index, at)
    elif name != "java/lang/Object":
        raise MalformedClassfile(at, f"class {name} has no superclass")

    interfaces = []
    for _ in range(reader.u2()):
        at = reader.offset
        interfaces.append(pool.class_name(reader.u2(), at))

    fields = _parse_fields(reader, pool)
    methods = _parse_methods(reader, pool, name)
    _skip_attributes(reader)

    if reader.offset != len(data):
        raise MalformedClassfile(reader.offset, "trailing bytes after class attributes")

    is_interface = bool(access & ACC_INTERFACE)
    model = ClassModel(
        name=name,
        super_name=super_name,
        interfaces=tuple(interfaces),
        fields=fields,
        methods=methods,
        is_interface=is_interface,
        is_abstract=bool(access & ACC_ABSTRACT) or is_interface,
        source=source,
    )
    logger.debug(f"Parsed class {name}: {len(fields)} fields, {len(methods)} methods")
    return model
