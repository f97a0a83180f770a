"""Pytest fixtures shared by unit and integration tests."""

import pytest

import src.common.config
from src.analysis.dacg import build_dacg
from src.analysis.hierarchy import build_hierarchy
from src.common.analysis_config import AnalysisConfig
from tests.helpers.fixtures import load_ir


@pytest.fixture(autouse=True)
def reset_global_config():
    """Drop the cached Config so env patches in one test do not leak."""
    src.common.config._config = None
    yield
    src.common.config._config = None


@pytest.fixture
def analysis_config():
    """Settings with the wall clock disabled so results depend only on the seed."""
    return AnalysisConfig().with_budget(wall_clock_seconds=None)


@pytest.fixture
def motivating_classes():
    return load_ir("motivating_example")


@pytest.fixture
def motivating_hierarchy(motivating_classes, analysis_config):
    return build_hierarchy(motivating_classes, analysis_config)


@pytest.fixture
def motivating_graph(motivating_hierarchy, analysis_config):
    return build_dacg(motivating_hierarchy, analysis_config)


@pytest.fixture
def jdbc_hierarchy(analysis_config):
    return build_hierarchy(load_ir("jdbc_rowset"), analysis_config)


@pytest.fixture
def jdbc_graph(jdbc_hierarchy, analysis_config):
    return build_dacg(jdbc_hierarchy, analysis_config)


@pytest.fixture
def decoy_hierarchy(analysis_config):
    return build_hierarchy(load_ir("decoys"), analysis_config)


@pytest.fixture
def decoy_graph(decoy_hierarchy, analysis_config):
    return build_dacg(decoy_hierarchy, analysis_config)
