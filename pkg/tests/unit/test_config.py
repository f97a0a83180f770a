"""Unit tests for configuration management."""

import os
import tempfile
import unittest
from unittest.mock import patch

import pytest

from src.common.analysis_config import AnalysisConfig, SearchBudget
from src.common.config import PROJECT_ROOT, Config, get_config, reset_config

# Minimal valid config.yaml content for tests
MINIMAL_CONFIG_YAML = """
hierarchy:
  custom_deser_prefixes: [com/example/proto]
search:
  max_chain_length: 9
  per_pair_cap: 20
verification:
  max_iterations: 250
  wall_clock_seconds: 0
  seed: 17
knowledge_base:
  path: kb/custom.yaml
  mode: replace
report:
  format: text
  include_timestamps: false
logging:
  level: DEBUG
"""


def _make_temp_config(yaml_content=MINIMAL_CONFIG_YAML):
    """Create a temporary config.yaml file and return its path."""
    f = tempfile.NamedTemporaryFile(mode="w", suffix=".yaml", delete=False)
    f.write(yaml_content)
    f.close()
    return f.name


class TestConfig(unittest.TestCase):
    """Test configuration loading and management."""

    def setUp(self):
        """Start every test from a clean environment and config file."""
        reset_config()
        self.yaml_path = _make_temp_config()
        self.env = patch.dict(os.environ, {}, clear=True)
        self.dotenv = patch("src.common.config.load_dotenv")
        self.env.start()
        self.dotenv.start()

    def tearDown(self):
        self.dotenv.stop()
        self.env.stop()
        os.unlink(self.yaml_path)

    def test_config_requires_yaml_file(self):
        """Test that Config raises FileNotFoundError when config.yaml is missing."""
        with self.assertRaises(FileNotFoundError) as ctx:
            Config(config_path="/nonexistent/config.yaml")
        self.assertIn("config.yaml", str(ctx.exception))

    def test_values_from_yaml(self):
        config = Config(config_path=self.yaml_path)
        self.assertEqual(config.max_chain_length, 9)
        self.assertEqual(config.per_pair_cap, 20)
        self.assertEqual(config.max_iterations, 250)
        self.assertEqual(config.seed, 17)
        self.assertEqual(config.custom_deser_prefixes, ["com/example/proto"])
        self.assertEqual(config.knowledge_base_mode, "replace")
        self.assertEqual(config.report_format, "text")
        self.assertFalse(config.include_timestamps)
        self.assertEqual(config.log_level, "DEBUG")

    def test_defaults_for_missing_keys(self):
        config = Config(config_path=self.yaml_path)
        self.assertEqual(config.max_chains, 10000)
        self.assertEqual(config.max_classfile_version, 52)
        self.assertEqual(config.plan_depth_bound, 15)
        self.assertEqual(config.array_size_max, 16)
        self.assertTrue(config.overrides_enabled)
        self.assertTrue(config.verification_enabled)
        self.assertIsNone(config.platform_stubs_path)

    def test_zero_wall_clock_disables_limit(self):
        config = Config(config_path=self.yaml_path)
        self.assertIsNone(config.wall_clock_seconds)

    def test_relative_paths_resolve_against_project_root(self):
        config = Config(config_path=self.yaml_path)
        self.assertEqual(config.knowledge_base_path, str(PROJECT_ROOT / "kb" / "custom.yaml"))

    def test_env_overrides_yaml(self):
        """Test that the upper-case env name of a key wins over config.yaml."""
        with patch.dict(
            os.environ,
            {
                "SEARCH_MAX_CHAIN_LENGTH": "4",
                "VERIFICATION_SEED": "99",
                "GRAPH_OVERRIDES_ENABLED": "false",
                "HIERARCHY_CUSTOM_DESER_PREFIXES": "a/b, c/d",
            },
        ):
            config = Config(config_path=self.yaml_path)
            self.assertEqual(config.max_chain_length, 4)
            self.assertEqual(config.seed, 99)
            self.assertFalse(config.overrides_enabled)
            self.assertEqual(config.custom_deser_prefixes, ["a/b", "c/d"])

    def test_logging_settings(self):
        config = Config(config_path=self.yaml_path)
        self.assertEqual(config.log_level, "DEBUG")
        self.assertEqual(config.log_dir, str(PROJECT_ROOT / "logs"))
        self.assertFalse(config.test_mode)
        with patch.dict(os.environ, {"TEST_MODE": "true"}):
            self.assertTrue(config.test_mode)

    def test_get_with_default(self):
        config = Config(config_path=self.yaml_path)
        self.assertEqual(config.get("search.unknown_key", "fallback"), "fallback")
        self.assertEqual(config.get("verification.max_iterations"), 250)

    def test_repository_config_loads(self):
        """The shipped config/config.yaml parses and has the documented defaults."""
        config = Config()
        self.assertEqual(config.max_chain_length, 15)
        self.assertEqual(config.max_iterations, 10000)
        self.assertEqual(config.wall_clock_seconds, 120.0)
        self.assertTrue(config.platform_stubs_path.endswith("platform_stubs.yaml"))

    def test_get_config_is_cached(self):
        self.assertIs(get_config(), get_config())
        first = get_config()
        reset_config()
        self.assertIsNot(get_config(), first)


@pytest.fixture
def file_config(tmp_path, monkeypatch):
    """Config read only from MINIMAL_CONFIG_YAML."""
    monkeypatch.delenv("VERIFICATION_SEED", raising=False)
    monkeypatch.setattr("src.common.config.load_dotenv", lambda *args, **kwargs: None)
    path = tmp_path / "config.yaml"
    path.write_text(MINIMAL_CONFIG_YAML)
    return Config(config_path=str(path))


class TestAnalysisConfig:
    def test_from_config(self, file_config):
        settings = AnalysisConfig.from_config(file_config)
        assert settings.max_len == 9
        assert settings.kb_mode == "replace"
        assert settings.custom_deser_prefixes == ("com/example/proto",)
        assert settings.budget == SearchBudget(250, None, 17)
        assert not settings.include_timestamps

    def test_overrides_win_and_none_is_ignored(self, file_config):
        settings = AnalysisConfig.from_config(file_config, max_len=3, output_format=None)
        assert settings.max_len == 3
        assert settings.output_format == "text"

    def test_unknown_override(self, file_config):
        with pytest.raises(TypeError):
            AnalysisConfig.from_config(file_config, colour="blue")

    def test_with_budget_and_echo(self):
        settings = AnalysisConfig(max_len=5).with_budget(seed=3, max_iterations=7)
        echo = settings.to_dict()
        assert (echo["max_len"], echo["seed"], echo["max_iterations"]) == (5, 3, 7)
        assert settings.budget.wall_clock_seconds == 120.0


if __name__ == "__main__":
    unittest.main()
