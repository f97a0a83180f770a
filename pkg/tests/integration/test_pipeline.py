"""Integration tests for the full analysis pipeline.

Tests the complete flow from inputs to report:
1. Ingest IR documents, classfiles, archives or ingest dumps
2. Build the hierarchy and call graph
3. Search chains with the knowledge base
4. Verify every chain and assemble the report
"""

import io
import zipfile
from dataclasses import replace

import pytest

from src.classmodel.model_ir import class_models_to_ir
from src.common.analysis_config import AnalysisConfig
from src.common.errors import UsageError
from src.common.stage_dump import StageDumpWriter
from src.knowledge.knowledge_base import VulnType
from src.tools.pipeline import ingest_inputs, run_pipeline
from src.verification.verifier import VerificationStatus
from tests.helpers.classfile_builder import build_classfile
from tests.helpers.fixtures import CLASSES_DIR, KNOWN_CHAINS, ir_path, load_ir

COMPARE_TO = "javax/naming/ldap/Rdn$RdnEntry.compareTo(Ljava/lang/Object;)I"


def _config(*inputs, **changes) -> AnalysisConfig:
    config = AnalysisConfig(inputs=tuple(str(p) for p in inputs), include_timestamps=False)
    return replace(config, **changes).with_budget(wall_clock_seconds=None)


def _gadget_lists(report):
    return [[str(g) for g in r.chain.gadgets] for r in report.results]


def test_motivating_example():
    """Seven RCE chains; the compareTo chain is verified with the expected witness."""
    report = run_pipeline(_config(ir_path("motivating_example")))
    assert (report.graph_stats.node_count, report.graph_stats.overrides_edge_count) == (12, 4)
    assert sorted(r.chain.length for r in report.results) == [4, 5, 6, 7, 8, 9, 10]
    assert not report.truncated

    (compare_to,) = [r for r in report.results if str(r.chain.source) == COMPARE_TO]
    assert compare_to.status is VerificationStatus.VERIFIED
    assert compare_to.iterations_used == 1
    plan = compare_to.witness_plan
    assert plan.class_at(("value", "m_obj", "lazyValue")) == "javax/swing/UIDefaults$ProxyLazyValue"


def test_without_overrides_edges_the_chains_disappear():
    report = run_pipeline(_config(ir_path("motivating_example"), overrides_enabled=False))
    assert report.graph_stats.overrides_edge_count == 0
    assert report.results == []


def test_jdbc_chains_need_no_dispatch():
    for overrides in (True, False):
        report = run_pipeline(_config(ir_path("jdbc_rowset"), overrides_enabled=overrides))
        assert len(report.results) == 2
        assert all(r.chain.vuln_type is VulnType.JNDII for r in report.results)
        assert all(r.is_verified for r in report.results)


def test_replacing_the_knowledge_base(tmp_path):
    kb = tmp_path / "kb.yaml"
    kb.write_text(
        "sources: [readObject]\nsinks:\n  JNDIi:\n    - {name: connect, owner: '*RowSet*'}\n"
    )
    report = run_pipeline(_config(ir_path("jdbc_rowset"), kb_path=str(kb), kb_mode="replace"))
    assert _gadget_lists(report) == [
        [
            "com/sun/rowset/JdbcRowSetImpl.readObject(Ljava/io/ObjectInputStream;)V",
            "com/sun/rowset/JdbcRowSetImpl.getDatabaseMetaData()Ljava/sql/DatabaseMetaData;",
        ]
    ]


def test_decoys_verified():
    report = run_pipeline(_config(ir_path("decoys")))
    (result,) = report.results
    assert result.is_verified
    assert result.witness_plan.class_at(("handler",)) == "com/example/decoy/CommandHandler"


def test_runs_are_reproducible():
    config = _config(ir_path("motivating_example"), ir_path("decoys"))
    assert run_pipeline(config).to_dict() == run_pipeline(config).to_dict()


def test_parallel_run_matches_serial():
    inputs = (ir_path("motivating_example"), ir_path("jdbc_rowset"))
    serial = run_pipeline(_config(*inputs))
    parallel = run_pipeline(_config(*inputs, ingest_workers=4, search_workers=4, verify_workers=4))
    assert parallel.to_dict() == serial.to_dict()


def test_skip_verify():
    report = run_pipeline(_config(ir_path("jdbc_rowset"), skip_verify=True))
    assert {r.status for r in report.results} == {VerificationStatus.NOT_VERIFIED}


def test_metrics_against_known_chains():
    config = _config(
        ir_path("motivating_example"),
        ir_path("jdbc_rowset"),
        known_chains_path=str(KNOWN_CHAINS),
    )
    metrics = run_pipeline(config).metrics
    assert metrics.tp == 2
    assert metrics.kgc == 2
    assert metrics.recall == 1


def test_empty_input(tmp_path):
    empty = tmp_path / "empty.yaml"
    empty.write_text("classes: []\n")
    report = run_pipeline(_config(empty))
    assert report.results == []
    assert report.graph_stats.node_count == 0


class TestInputKinds:
    def test_archive_matches_ir(self, tmp_path):
        buffer = io.BytesIO()
        with zipfile.ZipFile(buffer, "w") as archive:
            for model in load_ir("jdbc_rowset"):
                archive.writestr(f"{model.name}.class", build_classfile(model))
        jar = tmp_path / "rowset.jar"
        jar.write_bytes(buffer.getvalue())

        from_jar = run_pipeline(_config(jar))
        from_ir = run_pipeline(_config(ir_path("jdbc_rowset")))
        assert _gadget_lists(from_jar) == _gadget_lists(from_ir)

    def test_ingest_dump(self, tmp_path):
        dump = tmp_path / "ingest.json"
        StageDumpWriter("ingest").write(str(dump), class_models_to_ir(load_ir("decoys")))
        from_dump = run_pipeline(_config(dump))
        assert _gadget_lists(from_dump) == _gadget_lists(run_pipeline(_config(ir_path("decoys"))))

    def test_directory_is_searched(self, tmp_path):
        (tmp_path / "nested").mkdir()
        (tmp_path / "nested" / "rowset.yaml").write_text(ir_path("jdbc_rowset").read_text())
        (tmp_path / "notes.txt").write_text("ignored")
        result = ingest_inputs([str(tmp_path)])
        assert [c.name for c in result.classes] == [c.name for c in load_ir("jdbc_rowset")]

    def test_classfile_duplicate_of_ir_class(self):
        report = run_pipeline(_config(ir_path("motivating_example"), CLASSES_DIR / "XString.class"))
        assert "duplicate-class" in {w.code for w in report.warnings}
        assert len(report.results) == 7

    def test_unknown_input_type(self, tmp_path):
        notes = tmp_path / "notes.txt"
        notes.write_text("hello")
        with pytest.raises(UsageError):
            ingest_inputs([str(notes)])
