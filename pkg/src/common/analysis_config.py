"""Resolved analysis settings passed between pipeline stages."""

from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional

from src.common.config import Config


@dataclass(frozen=True)
class SearchBudget:
    """Limits for the per-chain verification search.

    Attributes:
        max_iterations: Maximum number of evaluated object plans
        wall_clock_seconds: Per-chain time limit, None disables it
        seed: Base seed; the per-chain generator is derived from (seed, chain index)
    """

    max_iterations: int = 10000
    wall_clock_seconds: Optional[float] = 120.0
    seed: int = 0


@dataclass(frozen=True)
class AnalysisConfig:
    """All knobs of one analysis run, resolved from file, env and flags."""

    inputs: tuple[str, ...] = ()
    kb_path: Optional[str] = None
    kb_mode: str = "merge"
    base_kb_path: Optional[str] = None
    custom_deser_prefixes: tuple[str, ...] = ()
    max_len: int = 15
    max_chains: int = 10000
    per_pair_cap: int = 500
    budget: SearchBudget = field(default_factory=SearchBudget)
    overrides_enabled: bool = True
    output_path: Optional[str] = None
    output_format: str = "json"
    max_classfile_version: int = 52
    plan_depth_bound: int = 15
    array_size_max: int = 16
    ingest_workers: int = 1
    search_workers: int = 1
    verify_workers: int = 1
    stubs_path: Optional[str] = None
    known_chains_path: Optional[str] = None
    skip_verify: bool = False
    include_timestamps: bool = True

    @classmethod
    def from_config(cls, config: Config, **overrides: Any) -> "AnalysisConfig":
        """
        Build settings from the configuration file, then apply overrides.

        Args:
            config: Loaded configuration (env vars already take precedence)
            **overrides: Field values from the command line; None means "not given"

        Returns:
            Resolved analysis configuration
        """
        values: dict[str, Any] = {
            "custom_deser_prefixes": tuple(config.custom_deser_prefixes),
            "kb_mode": config.knowledge_base_mode,
            "max_len": config.max_chain_length,
            "max_chains": config.max_chains,
            "per_pair_cap": config.per_pair_cap,
            "budget": SearchBudget(
                max_iterations=config.max_iterations,
                wall_clock_seconds=config.wall_clock_seconds,
                seed=config.seed,
            ),
            "overrides_enabled": config.overrides_enabled,
            "output_format": config.report_format,
            "max_classfile_version": config.max_classfile_version,
            "plan_depth_bound": config.plan_depth_bound,
            "array_size_max": config.array_size_max,
            "ingest_workers": config.ingest_workers,
            "search_workers": config.search_workers,
            "verify_workers": config.verification_workers,
            "stubs_path": config.platform_stubs_path,
            "base_kb_path": config.knowledge_base_path,
            "skip_verify": not config.verification_enabled,
            "include_timestamps": config.include_timestamps,
        }
        known = {f.name for f in fields(cls)}
        for key, value in overrides.items():
            if key not in known:
                raise TypeError(f"Unknown analysis setting: {key}")
            if value is not None:
                values[key] = value
        return cls(**values)

    def with_budget(self, **changes: Any) -> "AnalysisConfig":
        """Return a copy with some budget fields replaced."""
        return replace(self, budget=replace(self.budget, **changes))

    def to_dict(self) -> dict[str, Any]:
        """Echo of the settings for the report header."""
        return {
            "inputs": list(self.inputs),
            "kb_path": self.kb_path,
            "kb_mode": self.kb_mode,
            "custom_deser_prefixes": list(self.custom_deser_prefixes),
            "max_len": self.max_len,
            "max_chains": self.max_chains,
            "per_pair_cap": self.per_pair_cap,
            "max_iterations": self.budget.max_iterations,
            "wall_clock_seconds": self.budget.wall_clock_seconds,
            "seed": self.budget.seed,
            "overrides_enabled": self.overrides_enabled,
            "max_classfile_version": self.max_classfile_version,
            "plan_depth_bound": self.plan_depth_bound,
            "array_size_max": self.array_size_max,
            "skip_verify": self.skip_verify,
        }
