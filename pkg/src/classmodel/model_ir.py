"""YAML class-model IR, the hand-writable twin of decoded classfiles.

Schema::

    classes:
      - name: com/example/Foo
        super: java/lang/Object          # omitted only for java/lang/Object
        interfaces: [java/io/Serializable]
        is_interface: false
        is_abstract: false               # optional, interfaces are always abstract
        fields:
          - {name: bar, descriptor: Ljava/lang/Object;, transient: false, static: false}
        methods:
          - name: readObject
            descriptor: (Ljava/io/ObjectInputStream;)V
            flags: [private]
            concrete: true               # optional, defaults to not abstract/native
            calls:
              - {kind: virtual, owner: java/lang/Object, name: hashCode, descriptor: ()I}

Call offsets default to the offsets the calls would have in a body made of
nothing but those invoke instructions (3 bytes each, 5 for interface and
dynamic calls), which is what the test classfile builder emits.
A call owner may also be an array descriptor such as ``[I``.
"""

from typing import Any, Optional

import yaml

from src.classmodel.descriptors import (
    format_field_descriptor,
    is_valid_internal_name,
    parse_field_descriptor,
    parse_method_descriptor,
)
from src.classmodel.model import (
    KNOWN_METHOD_FLAGS,
    ClassModel,
    ClassSource,
    FieldModel,
    InvokeKind,
    InvokeSite,
    MethodId,
    MethodModel,
)
from src.common.errors import DescriptorError, IrSchemaError

_INVOKE_LENGTHS = {
    InvokeKind.VIRTUAL: 3,
    InvokeKind.SPECIAL: 3,
    InvokeKind.STATIC: 3,
    InvokeKind.INTERFACE: 5,
    InvokeKind.DYNAMIC: 5,
}


def invoke_length(kind: InvokeKind) -> int:
    """Byte length of the invoke instruction for a call kind."""
    return _INVOKE_LENGTHS[kind]


def _require(mapping: dict, key: str, path: str, kind: type = str) -> Any:
    if key not in mapping:
        raise IrSchemaError(f"{path}.{key}", "missing required key")
    value = mapping[key]
    if not isinstance(value, kind):
        raise IrSchemaError(f"{path}.{key}", f"expected {kind.__name__}")
    return value


def _optional(mapping: dict, key: str, path: str, kind: type, default: Any) -> Any:
    value = mapping.get(key, default)
    if value is None:
        return default
    if not isinstance(value, kind):
        raise IrSchemaError(f"{path}.{key}", f"expected {kind.__name__}")
    return value


def _class_name(value: Any, path: str) -> str:
    if not isinstance(value, str) or not is_valid_internal_name(value):
        raise IrSchemaError(path, f"invalid internal class name {value!r}")
    return value


def _call_owner(value: Any, path: str) -> str:
    # Array classes can own calls (e.g. clone on an array)
    if isinstance(value, str) and value.startswith("["):
        try:
            parse_field_descriptor(value)
        except DescriptorError as e:
            raise IrSchemaError(path, str(e)) from e
        return value
    return _class_name(value, path)


def _method_descriptor(value: str, path: str) -> str:
    try:
        parse_method_descriptor(value)
    except DescriptorError as e:
        raise IrSchemaError(path, str(e)) from e
    return value


def _parse_call(raw: Any, path: str, offset: int) -> InvokeSite:
    if not isinstance(raw, dict):
        raise IrSchemaError(path, "call must be a mapping")
    kind_text = _require(raw, "kind", path).lower()
    try:
        kind = InvokeKind(kind_text)
    except ValueError as e:
        raise IrSchemaError(f"{path}.kind", f"unknown call kind {kind_text!r}") from e

    offset = _optional(raw, "offset", path, int, offset)
    name = _require(raw, "name", path)
    descriptor = _method_descriptor(_require(raw, "descriptor", path), f"{path}.descriptor")
    if kind is InvokeKind.DYNAMIC:
        return InvokeSite(kind, None, offset, dynamic_name=name, dynamic_descriptor=descriptor)

    owner = _call_owner(raw.get("owner"), f"{path}.owner")
    return InvokeSite(kind, MethodId(owner, name, descriptor), offset)


def _parse_method(raw: Any, path: str, class_name: str) -> MethodModel:
    if not isinstance(raw, dict):
        raise IrSchemaError(path, "method must be a mapping")
    name = _require(raw, "name", path)
    descriptor = _method_descriptor(_require(raw, "descriptor", path), f"{path}.descriptor")
    owner = raw.get("owner", class_name)
    if owner != class_name:
        raise IrSchemaError(f"{path}.owner", f"method owner {owner} is not {class_name}")

    flags = _optional(raw, "flags", path, list, [])
    unknown = [f for f in flags if f not in KNOWN_METHOD_FLAGS]
    if unknown:
        raise IrSchemaError(f"{path}.flags", f"unknown flags {unknown}")
    flag_set = frozenset(flags)

    default_concrete = not ({"abstract", "native"} & flag_set)
    concrete = _optional(raw, "concrete", path, bool, default_concrete)

    sites = []
    offset = 0
    for i, call in enumerate(_optional(raw, "calls", path, list, [])):
        site = _parse_call(call, f"{path}.calls[{i}]", offset)
        sites.append(site)
        offset = site.bytecode_offset + invoke_length(site.kind)
    if sites and not concrete:
        raise IrSchemaError(f"{path}.calls", "abstract or native methods cannot have calls")

    return MethodModel(
        id=MethodId(class_name, name, descriptor),
        access_flags=flag_set,
        invoke_sites=tuple(sites),
        is_concrete=concrete,
    )


def _parse_field(raw: Any, path: str) -> FieldModel:
    if not isinstance(raw, dict):
        raise IrSchemaError(path, "field must be a mapping")
    descriptor = _require(raw, "descriptor", path)
    try:
        declared_type = parse_field_descriptor(descriptor)
    except DescriptorError as e:
        raise IrSchemaError(f"{path}.descriptor", str(e)) from e
    return FieldModel(
        name=_require(raw, "name", path),
        declared_type=declared_type,
        is_static=_optional(raw, "static", path, bool, False),
        is_transient=_optional(raw, "transient", path, bool, False),
    )


def _parse_class(raw: Any, path: str, source: ClassSource) -> ClassModel:
    if not isinstance(raw, dict):
        raise IrSchemaError(path, "class must be a mapping")
    name = _class_name(raw.get("name"), f"{path}.name")

    super_name: Optional[str] = raw.get("super")
    if super_name is None:
        if name != "java/lang/Object":
            raise IrSchemaError(f"{path}.super", "only java/lang/Object may omit its superclass")
    else:
        super_name = _class_name(super_name, f"{path}.super")

    interfaces = tuple(
        _class_name(iface, f"{path}.interfaces[{i}]")
        for i, iface in enumerate(_optional(raw, "interfaces", path, list, []))
    )
    is_interface = _optional(raw, "is_interface", path, bool, False)
    is_abstract = _optional(raw, "is_abstract", path, bool, False) or is_interface

    fields = tuple(
        _parse_field(f, f"{path}.fields[{i}]")
        for i, f in enumerate(_optional(raw, "fields", path, list, []))
    )

    methods = []
    seen: set[tuple[str, str]] = set()
    for i, m in enumerate(_optional(raw, "methods", path, list, [])):
        method = _parse_method(m, f"{path}.methods[{i}]", name)
        if method.id.signature in seen:
            raise IrSchemaError(
                f"{path}.methods[{i}]", f"duplicate method {method.id.name}{method.id.descriptor}"
            )
        seen.add(method.id.signature)
        methods.append(method)

    return ClassModel(
        name=name,
        super_name=super_name,
        interfaces=interfaces,
        fields=fields,
        methods=tuple(methods),
        is_interface=is_interface,
        is_abstract=is_abstract,
        source=source,
    )


def class_models_from_ir(
    document: Any, source: ClassSource = ClassSource.IR_FIXTURE
) -> list[ClassModel]:
    """
    Build class models from an already-parsed IR document.

    Args:
        document: Parsed YAML/JSON value (None or empty means no classes)
        source: Provenance recorded on every model

    Returns:
        Class models in document order

    Raises:
        IrSchemaError: If the document violates the schema
    """
    if document is None:
        return []
    if not isinstance(document, dict):
        raise IrSchemaError("$", "IR document must be a mapping with a 'classes' list")
    classes = document.get("classes") or []
    if not isinstance(classes, list):
        raise IrSchemaError("classes", "expected list")
    return [_parse_class(c, f"classes[{i}]", source) for i, c in enumerate(classes)]


def load_model_ir(text: str, source: ClassSource = ClassSource.IR_FIXTURE) -> list[ClassModel]:
    """
    Parse a YAML IR document.

    Args:
        text: YAML text following the schema in this module's docstring

    Returns:
        Class models in document order

    Raises:
        IrSchemaError: If the YAML is invalid or violates the schema
    """
    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise IrSchemaError("$", f"invalid YAML: {e}") from e
    return class_models_from_ir(document, source)


def _call_to_ir(site: InvokeSite) -> dict[str, Any]:
    if site.kind is InvokeKind.DYNAMIC:
        return {
            "kind": site.kind.value,
            "name": site.dynamic_name,
            "descriptor": site.dynamic_descriptor,
            "offset": site.bytecode_offset,
        }
    assert site.target is not None
    return {
        "kind": site.kind.value,
        "owner": site.target.owner,
        "name": site.target.name,
        "descriptor": site.target.descriptor,
        "offset": site.bytecode_offset,
    }


def class_model_to_ir(model: ClassModel) -> dict[str, Any]:
    """Render a class model as an IR mapping (used by ingest dumps)."""
    entry: dict[str, Any] = {"name": model.name}
    if model.super_name is not None:
        entry["super"] = model.super_name
    entry["interfaces"] = list(model.interfaces)
    entry["is_interface"] = model.is_interface
    entry["is_abstract"] = model.is_abstract
    entry["fields"] = [
        {
            "name": f.name,
            "descriptor": format_field_descriptor(f.declared_type),
            "static": f.is_static,
            "transient": f.is_transient,
        }
        for f in model.fields
    ]
    entry["methods"] = [
        {
            "name": m.id.name,
            "descriptor": m.id.descriptor,
            "flags": sorted(m.access_flags),
            "concrete": m.is_concrete,
            "calls": [_call_to_ir(s) for s in m.invoke_sites],
        }
        for m in model.methods
    ]
    entry["source"] = model.source.value
    return entry


def class_models_to_ir(models: list[ClassModel]) -> dict[str, Any]:
    return {"classes": [class_model_to_ir(m) for m in models]}


def class_models_from_dump(data: dict[str, Any]) -> list[ClassModel]:
    """Rebuild class models from an ingest dump payload, keeping recorded provenance."""
    models = class_models_from_ir(data)
    sources = [c.get("source") for c in data.get("classes") or []]
    return [
        m.with_source(ClassSource(src)) if src else m for m, src in zip(models, sources)
    ]
