"""Configuration management for the gadget-chain miner"""

import os
from pathlib import Path
from typing import Any, Optional

import yaml
from dotenv import load_dotenv

PROJECT_ROOT = Path(__file__).parent.parent.parent


class Config:
    """Configuration manager that loads from .env and config.yaml"""

    def __init__(self, config_path: Optional[str] = None, env_path: Optional[str] = None):
        """
        Initialize configuration

        Args:
            config_path: Path to config.yaml (default: config/config.yaml)
            env_path: Path to .env file (default: .env in project root)
        """
        # Load environment variables
        if env_path:
            load_dotenv(env_path)
        else:
            load_dotenv()

        if config_path is None:
            config_path = str(PROJECT_ROOT / "config" / "config.yaml")

        if not os.path.exists(config_path):
            raise FileNotFoundError(f"Required configuration file not found: {config_path}")

        with open(config_path) as f:
            self._yaml_config: dict[str, Any] = yaml.safe_load(f) or {}

        self.config_path = config_path

    def _get_yaml(self, key: str) -> Any:
        """
        Get value from YAML config using dot notation.

        Args:
            key: Dot-separated key (e.g., 'search.max_chain_length')

        Returns:
            Value from YAML config, or None if not found
        """
        keys = key.split(".")
        value = self._yaml_config
        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return None
        return value

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value by key. Checks env vars first, then YAML config.

        Args:
            key: Configuration key (e.g., 'verification.seed' or 'VERIFICATION_SEED')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        # Try environment variable first (uppercase)
        env_key = key.upper().replace(".", "_")
        env_value = os.getenv(env_key)
        if env_value is not None:
            return env_value

        yaml_value = self._get_yaml(key)
        if yaml_value is not None:
            return yaml_value

        return default

    def _get_bool(self, key: str, default: bool) -> bool:
        value = self.get(key, default)
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)

    def _resolve_path(self, value: Optional[str]) -> Optional[str]:
        """Resolve a configured path relative to the project root."""
        if not value:
            return None
        path = Path(value)
        if not path.is_absolute():
            path = PROJECT_ROOT / path
        return str(path)

    # Ingest configuration
    @property
    def max_classfile_version(self) -> int:
        return int(self.get("ingest.max_classfile_version", 52))

    @property
    def ingest_workers(self) -> int:
        return int(self.get("ingest.workers", 1))

    # Hierarchy configuration
    @property
    def platform_stubs_path(self) -> Optional[str]:
        return self._resolve_path(self.get("hierarchy.platform_stubs_path"))

    @property
    def custom_deser_prefixes(self) -> list[str]:
        value = self.get("hierarchy.custom_deser_prefixes", [])
        if isinstance(value, str):
            return [p.strip() for p in value.split(",") if p.strip()]
        return [str(p) for p in value]

    @property
    def overrides_enabled(self) -> bool:
        return self._get_bool("graph.overrides_enabled", True)

    # Knowledge base configuration
    @property
    def knowledge_base_path(self) -> Optional[str]:
        return self._resolve_path(self.get("knowledge_base.path"))

    @property
    def knowledge_base_mode(self) -> str:
        return str(self.get("knowledge_base.mode", "merge"))

    # Chain search configuration
    @property
    def max_chain_length(self) -> int:
        return int(self.get("search.max_chain_length", 15))

    @property
    def max_chains(self) -> int:
        return int(self.get("search.max_chains", 10000))

    @property
    def per_pair_cap(self) -> int:
        return int(self.get("search.per_pair_cap", 500))

    @property
    def search_workers(self) -> int:
        return int(self.get("search.workers", 1))

    # Verification configuration
    @property
    def verification_enabled(self) -> bool:
        return self._get_bool("verification.enabled", True)

    @property
    def max_iterations(self) -> int:
        return int(self.get("verification.max_iterations", 10000))

    @property
    def wall_clock_seconds(self) -> Optional[float]:
        seconds = float(self.get("verification.wall_clock_seconds", 120))
        return seconds if seconds > 0 else None

    @property
    def seed(self) -> int:
        return int(self.get("verification.seed", 0))

    @property
    def plan_depth_bound(self) -> int:
        return int(self.get("verification.plan_depth_bound", 15))

    @property
    def array_size_max(self) -> int:
        return int(self.get("verification.array_size_max", 16))

    @property
    def verification_workers(self) -> int:
        return int(self.get("verification.workers", 1))

    # Report configuration
    @property
    def report_format(self) -> str:
        return str(self.get("report.format", "json"))

    @property
    def include_timestamps(self) -> bool:
        return self._get_bool("report.include_timestamps", True)

    # Logging configuration (from config.yaml with sensible defaults)
    @property
    def log_level(self) -> str:
        return str(self.get("logging.level") or "INFO")

    @property
    def log_dir(self) -> str:
        return str(self._resolve_path(self._get_yaml("logging.dir") or "logs"))

    @property
    def log_max_bytes(self) -> int:
        return int(self._get_yaml("logging.max_bytes") or 10485760)

    @property
    def log_backup_count(self) -> int:
        return int(self._get_yaml("logging.backup_count") or 5)

    @property
    def test_mode(self) -> bool:
        """True under pytest (TEST_MODE=true); log files are not written."""
        return self._get_bool("test_mode", False)


# Global config instance
_config = None


def get_config() -> Config:
    """Get global configuration instance"""
    global _config
    if _config is None:
        _config = Config()
    return _config


def reset_config() -> None:
    """Drop the cached global configuration (used after env changes)"""
    global _config
    _config = None
