"""Tool specs, constraints, manifests, adapters."""

import json
from pathlib import Path

import pytest

from toolprobe.tools import (
    AdapterRef,
    ArgSpec,
    ManifestError,
    SyntaxConstraint,
    ToolOutcome,
    ToolRegistry,
    ToolSpec,
    invoke_tool,
    load_and_validate,
    register_inprocess,
    registry_from_dict,
    render_tool_prompt,
)

BRIDGE = Path(__file__).resolve().parent.parent / "bridge" / "toolbridge.py"
SAMPLE = Path(__file__).resolve().parent.parent / "bridge" / "sample_tools.py"


def make_spec(**overrides):
    base = dict(
        name="echo",
        documentation="Echo the input.",
        args=(ArgSpec(name="text", kind="text"),),
        adapter=AdapterRef(type="inprocess", target="test:echo"),
    )
    base.update(overrides)
    return ToolSpec(**base)


class TestConstraints:
    def test_required_prefix(self):
        constraint = SyntaxConstraint(kind="required-prefix", text="query: ")
        assert constraint.satisfied_by("query: hi")
        assert not constraint.satisfied_by("hi")

    def test_max_length(self):
        constraint = SyntaxConstraint(kind="max-length", count=5)
        assert constraint.satisfied_by("12345")
        assert not constraint.satisfied_by("123456")

    def test_format_json(self):
        constraint = SyntaxConstraint(kind="format", text="json")
        assert constraint.satisfied_by('{"a": 1}')
        assert not constraint.satisfied_by("not json {")

    def test_split_token(self):
        constraint = SyntaxConstraint(kind="split-token", text="|", count=3)
        assert constraint.satisfied_by("a|b|c")
        assert not constraint.satisfied_by("a|b")

    def test_pattern(self):
        constraint = SyntaxConstraint(kind="pattern", text=r"\d{4}-\d{2}")
        assert constraint.satisfied_by("2024-01")
        assert not constraint.satisfied_by("24-1")

    def test_bad_pattern_rejected(self):
        with pytest.raises(ManifestError):
            SyntaxConstraint(kind="pattern", text="([unclosed").validate()

    def test_unknown_kind_rejected(self):
        with pytest.raises(ManifestError):
            SyntaxConstraint(kind="frobnicate").validate()


class TestValidation:
    def test_enum_requires_values(self):
        with pytest.raises(ManifestError):
            ArgSpec(name="label", kind="enum").validate()

    def test_enum_values_only_with_enum_kind(self):
        with pytest.raises(ManifestError):
            ArgSpec(name="label", kind="text", enum_values=("A",)).validate()

    def test_duplicate_arg_names_rejected(self):
        spec = make_spec(args=(ArgSpec(name="a", kind="text"), ArgSpec(name="a", kind="text")))
        with pytest.raises(ManifestError):
            spec.validate()

    def test_duplicate_tool_names_rejected(self):
        with pytest.raises(ManifestError):
            ToolRegistry([make_spec(), make_spec()])

    def test_manifest_enum_without_values_fails(self):
        manifest = {"tools": [{
            "name": "search-mail",
            "documentation": "Search a mailbox by label.",
            "args": [{"name": "label", "kind": "enum"}],
            "adapter": {"type": "inprocess", "target": "x"},
        }]}
        with pytest.raises(ManifestError):
            registry_from_dict(manifest)

    def test_manifest_round_trip(self, tmp_path):
        registry = ToolRegistry([make_spec()])
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps(registry.to_manifest()), encoding="utf-8")
        loaded = load_and_validate(path)
        assert loaded.to_manifest() == registry.to_manifest()


class TestInvocation:
    def test_inprocess_success(self):
        register_inprocess("test:echo", lambda text: text)
        outcome = invoke_tool(make_spec(), {"text": "hi"})
        assert outcome == ToolOutcome.success("hi")

    def test_tool_exception_becomes_error_outcome(self):
        def boom(text):
            raise ValueError("bad input")

        register_inprocess("test:boom", boom)
        outcome = invoke_tool(make_spec(adapter=AdapterRef("inprocess", "test:boom")), {"text": "x"})
        assert not outcome.ok
        assert outcome.error_class == "ValueError"
        assert outcome.render() == "<class 'ValueError'> bad input"

    def test_unknown_argument_raises(self):
        register_inprocess("test:echo", lambda text: text)
        with pytest.raises(ValueError):
            invoke_tool(make_spec(), {"nope": 1})

    def test_subprocess_adapter_surfaces_assertion_class(self):
        import sys

        spec = make_spec(
            name="search",
            args=(ArgSpec(name="query", kind="text"),),
            adapter=AdapterRef(type="subprocess",
                               target=f"{sys.executable} {BRIDGE} --module {SAMPLE}"),
        )
        outcome = invoke_tool(spec, {"query": "x" * 120})
        assert not outcome.ok
        assert outcome.error_class == "AssertionError"
        assert "Query is too long" in outcome.message

    def test_subprocess_transport_error_is_distinct(self):
        spec = make_spec(adapter=AdapterRef(type="subprocess", target="false"))
        outcome = invoke_tool(spec, {"text": "hi"})
        assert not outcome.ok
        assert outcome.error_class == "TransportError"


def test_render_tool_prompt_is_deterministic():
    spec = make_spec(args=(ArgSpec(name="label", kind="enum", enum_values=("A", "B")),))
    first = render_tool_prompt(spec)
    assert first == render_tool_prompt(spec)
    assert "Tool: echo" in first and "one of: A, B" in first


def test_with_documentation_replaces_only_docs():
    registry = ToolRegistry([make_spec()])
    updated = registry.with_documentation("echo", "New description.")
    assert updated.get("echo").documentation == "New description."
    assert updated.get("echo").args == registry.get("echo").args
    assert registry.get("echo").documentation == "Echo the input."
