"""Platform stub table loading."""

from functools import lru_cache
from pathlib import Path
from typing import Optional

from src.classmodel.model import ClassModel, ClassSource
from src.classmodel.model_ir import load_model_ir
from src.common.config import PROJECT_ROOT
from src.common.errors import IrSchemaError, StubTableError
from src.common.logger import setup_logger

logger = setup_logger(__name__)

DEFAULT_STUBS_PATH = PROJECT_ROOT / "config" / "platform_stubs.yaml"


@lru_cache(maxsize=8)
def _load_cached(path: str) -> tuple[ClassModel, ...]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise StubTableError(f"Cannot read platform stubs {path}: {e}") from e
    try:
        stubs = load_model_ir(text, ClassSource.PLATFORM_STUB)
    except IrSchemaError as e:
        raise StubTableError(f"Invalid platform stubs {path}: {e}") from e
    logger.debug(f"Loaded {len(stubs)} platform stubs from {path}")
    return tuple(stubs)


def load_platform_stubs(path: Optional[str] = None) -> list[ClassModel]:
    """
    Load the platform stub classes.

    Args:
        path: Stub table in IR format (default: config/platform_stubs.yaml)

    Returns:
        Stub class models

    Raises:
        StubTableError: If the file is missing or malformed
    """
    return list(_load_cached(str(path or DEFAULT_STUBS_PATH)))
