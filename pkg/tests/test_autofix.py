"""Documentation repair: revision record, evidence selection, three modes."""

import dataclasses
import json

import pytest

from toolprobe.autofix import (
    DocRevision,
    MODES,
    apply_revision,
    improve_documentation,
    read_revision,
    revert_revision,
    select_evidence,
    write_revision,
)
from toolprobe.tools import ToolRegistry

from conftest import LENGTH_TOOL, LOOKUP_TOOL, scripted_gateway

SRC_TOOL = dataclasses.replace(
    LENGTH_TOOL,
    source_text='def length_search(query):\n    assert len(query) < 100\n',
)

EVIDENCE = [
    {"prompt": "long query", "signature": {"class": "AssertionError", "template": "Query is too long"}},
    {"prompt": "another long query", "signature": {"class": "AssertionError", "template": "Query is too long"}},
    {"prompt": "bad prefix", "signature": {"class": "AssertionError", "template": "Query must start with <str>"}},
]


class TestDocRevision:
    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError):
            DocRevision("t", "old", "new", "magic")

    def test_rejects_empty_revision(self):
        with pytest.raises(ValueError):
            DocRevision("t", "old", "", "doc-only")

    def test_informed_requires_evidence(self):
        with pytest.raises(ValueError):
            DocRevision("t", "old", "new", "informed")

    def test_round_trip(self):
        revision = DocRevision("t", "old", "new", "informed", evidence=({"prompt": "p"},))
        assert DocRevision.from_dict(revision.to_dict()) == revision


class TestSelectEvidence:
    def test_prefers_distinct_signatures(self):
        chosen = select_evidence(EVIDENCE, limit=2)
        signatures = [e["signature"]["template"] for e in chosen]
        assert len(set(signatures)) == 2

    def test_backfills_duplicates_when_short(self):
        chosen = select_evidence(EVIDENCE, limit=3)
        assert len(chosen) == 3

    def test_limit_respected(self):
        many = [{"prompt": f"p{i}", "signature": {"class": "E", "template": f"t{i}"}}
                for i in range(25)]
        assert len(select_evidence(many, limit=10)) == 10


class TestModes:
    def gateway_capture(self, seen):
        def fn(request):
            seen.append(request.messages[-1][1])
            return json.dumps({"description": "Search tool. Queries must be under 100 characters."})

        return scripted_gateway(fn)

    def test_informed_includes_evidence(self):
        seen = []
        revision = improve_documentation(SRC_TOOL, "informed", EVIDENCE, self.gateway_capture(seen))
        assert revision.mode == "informed"
        assert revision.evidence
        assert "long query" in seen[0]
        assert "under 100 characters" in revision.revised_doc

    def test_informed_without_evidence_rejected(self):
        with pytest.raises(ValueError):
            improve_documentation(SRC_TOOL, "informed", [], self.gateway_capture([]))

    def test_doc_only_sees_only_documentation(self):
        seen = []
        revision = improve_documentation(SRC_TOOL, "doc-only", [], self.gateway_capture(seen))
        assert revision.evidence == ()
        assert SRC_TOOL.documentation in seen[0]
        assert "assert len" not in seen[0]

    def test_doc_src_appends_source(self):
        seen = []
        improve_documentation(SRC_TOOL, "doc-src", [], self.gateway_capture(seen))
        assert "assert len" in seen[0]

    def test_doc_src_without_source_rejected(self):
        with pytest.raises(ValueError):
            improve_documentation(LENGTH_TOOL, "doc-src", [], self.gateway_capture([]))

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            improve_documentation(SRC_TOOL, "nonsense", [], self.gateway_capture([]))


class TestApplyRevert:
    def revision(self):
        return DocRevision(LENGTH_TOOL.name, LENGTH_TOOL.documentation, "Better documentation.", "doc-only")

    def test_apply_changes_only_documentation(self):
        registry = ToolRegistry([LENGTH_TOOL, LOOKUP_TOOL])
        patched = apply_revision(registry, self.revision())
        assert patched.get(LENGTH_TOOL.name).documentation == "Better documentation."
        assert patched.get(LENGTH_TOOL.name).args == LENGTH_TOOL.args
        assert patched.get(LOOKUP_TOOL.name) == LOOKUP_TOOL
        assert registry.get(LENGTH_TOOL.name).documentation == LENGTH_TOOL.documentation

    def test_revert_restores_original(self):
        registry = ToolRegistry([LENGTH_TOOL])
        revision = self.revision()
        restored = revert_revision(apply_revision(registry, revision), revision)
        assert restored.get(LENGTH_TOOL.name) == LENGTH_TOOL

    def test_apply_unknown_tool_rejected(self):
        registry = ToolRegistry([LOOKUP_TOOL])
        with pytest.raises(KeyError):
            apply_revision(registry, self.revision())


def test_revision_persistence_round_trip(tmp_path):
    revision = DocRevision("length_search", "old", "new", "informed", evidence=({"prompt": "p"},))
    path = tmp_path / "revision.json"
    write_revision(path, revision)
    assert read_revision(path) == revision


def test_modes_constant():
    assert MODES == ("informed", "doc-only", "doc-src")
