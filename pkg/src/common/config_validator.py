"""Validation of resolved analysis settings before a run starts."""

import os

from src.common.analysis_config import AnalysisConfig
from src.common.errors import UsageError


class ConfigValidationError(UsageError):
    """Raised when configuration validation fails."""

    pass


class ConfigValidator:
    """Validates analysis settings so bad values fail before any work is done."""

    OUTPUT_FORMATS = {"json", "text"}
    KB_MODES = {"merge", "replace"}

    # Largest classfile major version the decoder understands at all
    MAX_KNOWN_CLASSFILE_VERSION = 52

    @classmethod
    def validate_limits(cls, config: AnalysisConfig) -> list[str]:
        """
        Check the numeric search limits.

        Args:
            config: Settings to check

        Returns:
            List of problems, empty if all limits are valid
        """
        problems = []
        if config.max_len < 2:
            problems.append(f"max_len must be at least 2, got {config.max_len}")
        if config.max_chains < 1:
            problems.append(f"max_chains must be positive, got {config.max_chains}")
        if config.per_pair_cap < 1:
            problems.append(f"per_pair_cap must be positive, got {config.per_pair_cap}")
        if config.budget.max_iterations < 1:
            problems.append(
                f"max_iterations must be positive, got {config.budget.max_iterations}"
            )
        seconds = config.budget.wall_clock_seconds
        if seconds is not None and seconds <= 0:
            problems.append(f"wall_clock_seconds must be positive or disabled, got {seconds}")
        if config.plan_depth_bound < 1:
            problems.append(f"plan_depth_bound must be positive, got {config.plan_depth_bound}")
        if config.array_size_max < 0:
            problems.append(f"array_size_max must not be negative, got {config.array_size_max}")
        for name in ("ingest_workers", "search_workers", "verify_workers"):
            if getattr(config, name) < 1:
                problems.append(f"{name} must be at least 1, got {getattr(config, name)}")
        return problems

    @classmethod
    def validate_choices(cls, config: AnalysisConfig) -> list[str]:
        """
        Check enumerated settings and version bounds.

        Args:
            config: Settings to check

        Returns:
            List of problems, empty if all choices are valid
        """
        problems = []
        if config.output_format not in cls.OUTPUT_FORMATS:
            problems.append(
                f"output format must be one of {sorted(cls.OUTPUT_FORMATS)}, "
                f"got {config.output_format!r}"
            )
        if config.kb_mode not in cls.KB_MODES:
            problems.append(
                f"kb mode must be one of {sorted(cls.KB_MODES)}, got {config.kb_mode!r}"
            )
        if not 45 <= config.max_classfile_version <= cls.MAX_KNOWN_CLASSFILE_VERSION:
            problems.append(
                f"max_classfile_version must be within 45..{cls.MAX_KNOWN_CLASSFILE_VERSION}, "
                f"got {config.max_classfile_version}"
            )
        for prefix in config.custom_deser_prefixes:
            if not prefix or prefix.startswith("/"):
                problems.append(f"invalid custom deserialization prefix: {prefix!r}")
        return problems

    @classmethod
    def validate_paths(cls, config: AnalysisConfig) -> list[str]:
        """
        Check that every referenced file exists.

        Args:
            config: Settings to check

        Returns:
            List of problems, empty if all paths exist
        """
        problems = []
        for label, path in (
            ("knowledge base", config.kb_path),
            ("platform stubs", config.stubs_path),
            ("known chains", config.known_chains_path),
        ):
            if path and not os.path.exists(path):
                problems.append(f"{label} file not found: {path}")
        return problems

    @classmethod
    def validate(cls, config: AnalysisConfig, check_inputs: bool = True) -> None:
        """
        Validate all settings.

        Args:
            config: Settings to check
            check_inputs: Also require that every input path exists

        Raises:
            ConfigValidationError: If any check fails
        """
        problems = cls.validate_limits(config) + cls.validate_choices(config)
        problems += cls.validate_paths(config)
        if check_inputs:
            problems += [f"input not found: {p}" for p in config.inputs if not os.path.exists(p)]

        if problems:
            raise ConfigValidationError("; ".join(problems))
