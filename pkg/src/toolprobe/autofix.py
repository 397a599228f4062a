"""Model-driven documentation repair.

Three variants: informed (erroneous examples supplied as evidence),
uninformed doc-only, and uninformed doc-plus-source. A revision is a
pure record; applying and reverting it restores the original registry.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import prompts
from .gateway import ChatRequest, Gateway, format_instructions_for
from .tools import ToolRegistry, ToolSpec

log = logging.getLogger(__name__)

MODES = ("informed", "doc-only", "doc-src")
WORD_LIMIT = 100  # soft guidance from the repair prompt; warn, never truncate
MAX_EVIDENCE = 10


@dataclass(frozen=True)
class DocRevision:
    tool_name: str
    original_doc: str
    revised_doc: str
    mode: str
    evidence: tuple[dict, ...] = ()

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown autofix mode {self.mode!r}")
        if not self.revised_doc:
            raise ValueError("revised_doc must be non-empty")
        if self.mode == "informed" and not self.evidence:
            raise ValueError("informed mode requires at least one evidence record")

    def to_dict(self) -> dict:
        return {
            "tool_name": self.tool_name,
            "original_doc": self.original_doc,
            "revised_doc": self.revised_doc,
            "mode": self.mode,
            "evidence": list(self.evidence),
        }

    @staticmethod
    def from_dict(entry: dict) -> "DocRevision":
        return DocRevision(
            tool_name=entry["tool_name"],
            original_doc=entry["original_doc"],
            revised_doc=entry["revised_doc"],
            mode=entry["mode"],
            evidence=tuple(entry.get("evidence", ())),
        )


def select_evidence(records: list[dict], limit: int = MAX_EVIDENCE) -> list[dict]:
    """Up to ``limit`` flagged records, preferring distinct signatures/templates."""
    chosen: list[dict] = []
    seen_keys: set[str] = set()
    for record in records:
        key = json.dumps(record.get("signature") or record.get("template") or record, sort_keys=True, default=str)
        if key in seen_keys:
            continue
        seen_keys.add(key)
        chosen.append(record)
        if len(chosen) >= limit:
            return chosen
    for record in records:
        if len(chosen) >= limit:
            break
        if record not in chosen:
            chosen.append(record)
    return chosen


def _render_evidence(evidence: list[dict]) -> str:
    lines = []
    for record in evidence:
        prompt = record.get("prompt") or record.get("template") or json.dumps(record, sort_keys=True, default=str)
        detail = record.get("signature", {}).get("template") if isinstance(record.get("signature"), dict) else record.get("expectation", "")
        lines.append(f"- prompt: {prompt}" + (f" -> {detail}" if detail else ""))
    return "\n".join(lines)


def improve_documentation(spec: ToolSpec, mode: str, evidence: list[dict], gateway: Gateway) -> DocRevision:
    if mode not in MODES:
        raise ValueError(f"unknown autofix mode {mode!r}")
    if mode == "informed" and not evidence:
        raise ValueError("informed mode requires evidence records")
    if mode == "doc-src" and not spec.source_text:
        raise ValueError(f"doc-src mode requires source_text for {spec.name}")

    fi = format_instructions_for({"description": "the new tool description string"})
    if mode == "informed":
        selected = select_evidence(evidence)
        body = prompts.AUTOFIX_INFORMED.format(
            tool_description=spec.documentation,
            bad_examples=_render_evidence(selected),
            format_instructions=fi,
        )
    else:
        description = spec.documentation
        if mode == "doc-src":
            description += f"\n\nTool source code:\n{spec.source_text}"
        selected = []
        body = prompts.AUTOFIX_DOC_ONLY.format(tool_description=description, format_instructions=fi)

    request = ChatRequest(messages=(("user", body),), format_instructions=fi)
    parsed = gateway.complete_structured(request, ["description"])
    revised = str(parsed["description"]).strip()
    if mode != "doc-only" and len(revised.split()) > WORD_LIMIT:
        log.warning("revised documentation for %s is %d words (guidance: <= %d)",
                    spec.name, len(revised.split()), WORD_LIMIT)
    return DocRevision(
        tool_name=spec.name,
        original_doc=spec.documentation,
        revised_doc=revised,
        mode=mode,
        evidence=tuple(selected),
    )


def apply_revision(registry: ToolRegistry, revision: DocRevision) -> ToolRegistry:
    """New registry with only the documentation changed; schema untouched."""
    if revision.tool_name not in registry:
        raise KeyError(f"revision targets unknown tool {revision.tool_name!r}")
    return registry.with_documentation(revision.tool_name, revision.revised_doc)


def revert_revision(registry: ToolRegistry, revision: DocRevision) -> ToolRegistry:
    return registry.with_documentation(revision.tool_name, revision.original_doc)


def write_revision(path: str | Path, revision: DocRevision) -> None:
    Path(path).write_text(json.dumps(revision.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def read_revision(path: str | Path) -> DocRevision:
    return DocRevision.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
