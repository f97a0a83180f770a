"""Class-model ingest: classfiles, archives and the YAML IR.

All three front ends produce the same ClassModel records.
"""

from src.classmodel.archive import ArchiveParseResult, parse_archive
from src.classmodel.classfile import parse_classfile
from src.classmodel.model import (
    ClassModel,
    ClassSource,
    FieldModel,
    InvokeKind,
    InvokeSite,
    MethodId,
    MethodModel,
)
from src.classmodel.model_ir import load_model_ir

__all__ = [
    "ArchiveParseResult",
    "ClassModel",
    "ClassSource",
    "FieldModel",
    "InvokeKind",
    "InvokeSite",
    "MethodId",
    "MethodModel",
    "load_model_ir",
    "parse_archive",
    "parse_classfile",
]
