"""Ingest of JAR/ZIP archives."""

import io
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

from src.classmodel.classfile import DEFAULT_MAX_VERSION, parse_classfile
from src.classmodel.model import ClassModel, ClassSource
from src.common.errors import (
    AnalysisWarning,
    MalformedArchive,
    MalformedClassfile,
    UnsupportedVersion,
)
from src.common.logger import setup_logger

logger = setup_logger(__name__)

# Entries that never describe analyzable classes
SKIPPED_ENTRY_NAMES = {"module-info.class", "package-info.class"}
VERSIONED_PREFIX = "META-INF/versions/"


@dataclass
class ArchiveParseResult:
    """Classes decoded from an archive plus per-entry warnings."""

    classes: list[ClassModel] = field(default_factory=list)
    warnings: list[AnalysisWarning] = field(default_factory=list)


def _is_class_entry(name: str) -> bool:
    if not name.endswith(".class"):
        return False
    if name.startswith(VERSIONED_PREFIX):
        return False
    return name.rsplit("/", 1)[-1] not in SKIPPED_ENTRY_NAMES


def _decode_entry(
    entry_name: str, data: bytes, max_version: int
) -> tuple[Optional[ClassModel], Optional[AnalysisWarning]]:
    try:
        return parse_classfile(data, max_version, ClassSource.ARCHIVE_ENTRY), None
    except MalformedClassfile as e:
        return None, AnalysisWarning("malformed-entry", str(e), entry_name)
    except UnsupportedVersion as e:
        return None, AnalysisWarning("unsupported-version", str(e), entry_name)


def parse_archive(
    data: Union[bytes, str],
    max_version: int = DEFAULT_MAX_VERSION,
    workers: int = 1,
) -> ArchiveParseResult:
    """
    Decode every class entry of a JAR/ZIP archive.

    Bad entries are skipped with a warning; duplicate entry names and
    duplicate class names keep the first occurrence in central-directory order.

    Args:
        data: Archive bytes, or a path to the archive
        max_version: Highest accepted classfile major version
        workers: Number of threads used to decode entries

    Returns:
        Decoded classes in entry order plus warnings

    Raises:
        MalformedArchive: If the container itself cannot be read
    """
    source = io.BytesIO(data) if isinstance(data, bytes) else data
    result = ArchiveParseResult()

    try:
        with zipfile.ZipFile(source) as archive:
            entries: list[tuple[str, bytes]] = []
            seen_entries: set[str] = set()
            for info in archive.infolist():
                if info.is_dir() or not _is_class_entry(info.filename):
                    continue
                if info.filename in seen_entries:
                    result.warnings.append(
                        AnalysisWarning(
                            "duplicate-entry",
                            f"Duplicate archive entry {info.filename}; first occurrence kept",
                            info.filename,
                        )
                    )
                    continue
                seen_entries.add(info.filename)
                try:
                    entries.append((info.filename, archive.read(info)))
                except (zipfile.BadZipFile, OSError, NotImplementedError) as e:
                    result.warnings.append(
                        AnalysisWarning("unreadable-entry", str(e), info.filename)
                    )
    except (zipfile.BadZipFile, zipfile.LargeZipFile, OSError, EOFError) as e:
        raise MalformedArchive(str(e)) from e

    if workers > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            decoded = list(pool.map(lambda e: _decode_entry(e[0], e[1], max_version), entries))
    else:
        decoded = [_decode_entry(name, payload, max_version) for name, payload in entries]

    seen_classes: set[str] = set()
    for (entry_name, _), (model, warning) in zip(entries, decoded):
        if warning is not None:
            logger.warning(f"Skipping archive entry {entry_name}: {warning.message}")
            result.warnings.append(warning)
            continue
        assert model is not None
        if model.name in seen_classes:
            result.warnings.append(
                AnalysisWarning(
                    "duplicate-class",
                    f"Class {model.name} defined again by {entry_name}; first definition kept",
                    model.name,
                )
            )
            continue
        seen_classes.add(model.name)
        result.classes.append(model)

    logger.info(
        f"Archive decoded: {len(result.classes)} classes, {len(result.warnings)} warnings"
    )
    return result
