#!/usr/bin/env python
"""JSON stage dumps so a pipeline stage can be re-run from an earlier stage's output."""

import datetime
import json
from pathlib import Path
from typing import Any, Optional

from src.common.errors import DumpFormatError
from src.common.logger import setup_logger

logger = setup_logger(__name__)

DUMP_SCHEMA_VERSION = "1.0"

STAGES = ("ingest", "graph", "chains", "plans", "results")


class StageDumpWriter:
    """
    Writes the output of one pipeline stage to a JSON envelope.

    The envelope carries the stage name and schema version so a later
    command can check it is reading the right kind of dump.
    """

    def __init__(self, stage: str, include_timestamp: bool = True):
        """
        Initialize stage dump writer.

        Args:
            stage: Stage name, one of STAGES
            include_timestamp: Record the write time in the envelope
        """
        if stage not in STAGES:
            raise ValueError(f"Unknown stage {stage!r}, expected one of {STAGES}")
        self.stage = stage
        self.include_timestamp = include_timestamp

    def envelope(self, data: Any, metadata: Optional[dict] = None) -> dict[str, Any]:
        """
        Wrap stage data in the dump envelope.

        Args:
            data: JSON-serializable stage payload
            metadata: Optional metadata (counts, input names)

        Returns:
            Envelope dict
        """
        timestamp = datetime.datetime.now().isoformat() if self.include_timestamp else None
        return {
            "timestamp": timestamp,
            "stage": self.stage,
            "schema_version": DUMP_SCHEMA_VERSION,
            "metadata": metadata or {},
            "data": data,
        }

    def dumps(self, data: Any, metadata: Optional[dict] = None) -> str:
        """Serialize the envelope to a JSON string."""
        return json.dumps(self.envelope(data, metadata), indent=2) + "\n"

    def write(self, path: str, data: Any, metadata: Optional[dict] = None) -> Path:
        """
        Write stage data to a JSON file.

        Args:
            path: Output file path (parent directories are created)
            data: JSON-serializable stage payload
            metadata: Optional metadata

        Returns:
            Path of the written file
        """
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(self.dumps(data, metadata))
        logger.info(f"Wrote {self.stage} dump to {out}")
        return out


def parse_dump(text: str, expected_stage: Optional[str] = None) -> dict[str, Any]:
    """
    Parse a stage dump and check its envelope.

    Args:
        text: JSON text of the dump
        expected_stage: Stage the caller needs, or None to accept any

    Returns:
        The full envelope dict

    Raises:
        DumpFormatError: If the text is not a valid dump of the expected stage
    """
    try:
        envelope = json.loads(text)
    except json.JSONDecodeError as e:
        raise DumpFormatError(f"Dump is not valid JSON: {e}") from e

    if not isinstance(envelope, dict) or "stage" not in envelope or "data" not in envelope:
        raise DumpFormatError("Dump is missing the stage envelope")
    if envelope.get("schema_version") != DUMP_SCHEMA_VERSION:
        raise DumpFormatError(
            f"Unsupported dump schema version {envelope.get('schema_version')!r}"
        )
    if expected_stage is not None and envelope["stage"] != expected_stage:
        raise DumpFormatError(
            f"Expected a {expected_stage} dump, got a {envelope['stage']} dump"
        )
    return envelope


def load_dump(path: str, expected_stage: Optional[str] = None) -> dict[str, Any]:
    """
    Load a stage dump from disk.

    Args:
        path: Path to dump file
        expected_stage: Stage the caller needs, or None to accept any

    Returns:
        The full envelope dict

    Raises:
        DumpFormatError: If the file is not a valid dump of the expected stage
    """
    logger.debug(f"Loading dump {path}")
    return parse_dump(Path(path).read_text(), expected_stage)


def is_dump_file(path: str) -> bool:
    """Whether a path looks like a stage dump rather than an analysis input."""
    return Path(path).suffix.lower() == ".json"
