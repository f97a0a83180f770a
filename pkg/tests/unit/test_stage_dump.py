"""Unit tests for stage dumps."""

import json

import pytest

from src.analysis.dacg import DaCg
from src.common.errors import DumpFormatError
from src.common.stage_dump import StageDumpWriter, is_dump_file, load_dump, parse_dump


class TestStageDumpWriter:
    def test_envelope(self):
        envelope = StageDumpWriter("chains").envelope([1, 2], {"count": 2})
        assert envelope["stage"] == "chains"
        assert envelope["schema_version"] == "1.0"
        assert envelope["metadata"] == {"count": 2}
        assert envelope["data"] == [1, 2]
        assert envelope["timestamp"] is not None

    def test_without_timestamp_is_reproducible(self):
        writer = StageDumpWriter("plans", include_timestamp=False)
        assert writer.dumps({"a": 1}) == writer.dumps({"a": 1})
        assert json.loads(writer.dumps({}))["timestamp"] is None

    def test_unknown_stage(self):
        with pytest.raises(ValueError):
            StageDumpWriter("summary")

    def test_write_creates_directories(self, tmp_path, motivating_graph):
        path = tmp_path / "out" / "graph.json"
        StageDumpWriter("graph").write(str(path), motivating_graph.to_dict())
        envelope = load_dump(str(path), expected_stage="graph")
        assert DaCg.from_dict(envelope["data"]).stats() == motivating_graph.stats()


class TestParseDump:
    def test_wrong_stage(self):
        text = StageDumpWriter("graph").dumps({})
        with pytest.raises(DumpFormatError, match="Expected a chains dump, got a graph dump"):
            parse_dump(text, expected_stage="chains")

    @pytest.mark.parametrize(
        "text",
        [
            "not json",
            "[]",
            '{"stage": "graph"}',
            '{"stage": "graph", "data": {}, "schema_version": "0.1"}',
        ],
    )
    def test_malformed(self, text):
        with pytest.raises(DumpFormatError):
            parse_dump(text)


@pytest.mark.parametrize(
    "path,expected",
    [("graph.json", True), ("OUT.JSON", True), ("app.jar", False), ("classes.yaml", False)],
)
def test_is_dump_file(path, expected):
    assert is_dump_file(path) is expected
