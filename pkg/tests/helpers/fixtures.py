"""Locations of test fixture files."""

from pathlib import Path

from src.classmodel.model import ClassModel
from src.classmodel.model_ir import load_model_ir

FIXTURES = Path(__file__).parent.parent / "fixtures"
IR_DIR = FIXTURES / "ir"
CLASSES_DIR = FIXTURES / "classes"
GOLDEN_DIR = FIXTURES / "golden"
KNOWN_CHAINS = FIXTURES / "known_chains.yaml"


def ir_path(name: str) -> Path:
    return IR_DIR / f"{name}.yaml"


def load_ir(name: str) -> list[ClassModel]:
    """Class models of an IR fixture by file stem."""
    return load_model_ir(ir_path(name).read_text())
