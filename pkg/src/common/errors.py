"""Error and warning types shared by every analysis stage.

Errors abort the stage that raised them. Warnings are accumulated on the
stage result and surface in the final report.
"""

from dataclasses import dataclass
from typing import Any, Optional


class AnalysisError(Exception):
    """Base class for all analysis errors."""

    pass


class MalformedClassfile(AnalysisError):
    """Raised when classfile bytes cannot be decoded."""

    def __init__(self, offset: int, reason: str):
        self.offset = offset
        self.reason = reason
        super().__init__(f"Malformed classfile at offset {offset}: {reason}")


class UnsupportedVersion(AnalysisError):
    """Raised when a classfile major version exceeds the accepted maximum."""

    def __init__(self, major: int, maximum: int = 52):
        self.major = major
        self.maximum = maximum
        super().__init__(f"Unsupported classfile major version {major} (maximum {maximum})")


class MalformedArchive(AnalysisError):
    """Raised when an archive container cannot be read at all."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Malformed archive: {reason}")


class DescriptorError(AnalysisError):
    """Raised when a field or method descriptor cannot be parsed."""

    def __init__(self, descriptor: str, reason: str):
        self.descriptor = descriptor
        self.reason = reason
        super().__init__(f"Invalid descriptor {descriptor!r}: {reason}")


class IrSchemaError(AnalysisError):
    """Raised when a class-model IR document violates its schema."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"IR schema error at {path}: {reason}")


class StubTableError(AnalysisError):
    """Raised when the platform stub table is malformed."""

    pass


class CyclicHierarchy(AnalysisError):
    """Raised when the supertype graph contains a cycle."""

    def __init__(self, names: list[str]):
        self.names = list(names)
        super().__init__(f"Cyclic class hierarchy: {' -> '.join(self.names)}")


class UnknownNode(AnalysisError):
    """Raised when a graph query names a method that is not a node."""

    def __init__(self, node: Any):
        self.node = node
        super().__init__(f"Unknown call-graph node: {node}")


class KbSchemaError(AnalysisError):
    """Raised when a knowledge-base document violates its schema."""

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"Knowledge base error at {path}: {reason}")


class NonInstantiable(AnalysisError):
    """Raised when no concrete serializable class can host a chain's source."""

    def __init__(self, class_name: str):
        self.class_name = class_name
        super().__init__(f"No concrete deserializable class can be instantiated for {class_name}")


class NoFeasibleAssignment(AnalysisError):
    """Raised when a dynamic-dispatch edge cannot be satisfied by any property."""

    def __init__(self, edge_index: int, reason: str = ""):
        self.edge_index = edge_index
        self.reason = reason
        detail = f": {reason}" if reason else ""
        super().__init__(f"No feasible property assignment for edge {edge_index}{detail}")


class DumpFormatError(AnalysisError):
    """Raised when a stage dump cannot be read back."""

    pass


class UsageError(AnalysisError):
    """Raised for invalid command-line usage or configuration."""

    pass


# Exit codes of the command-line tool
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2


@dataclass(frozen=True)
class AnalysisWarning:
    """A non-fatal problem recorded by a stage.

    Attributes:
        code: Stable machine-readable identifier (e.g. 'missing-supertype')
        message: Human-readable description
        subject: Entity the warning is about (class name, entry name, method)
    """

    code: str
    message: str
    subject: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "subject": self.subject}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AnalysisWarning":
        return cls(code=data["code"], message=data["message"], subject=data.get("subject"))
