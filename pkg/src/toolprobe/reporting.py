"""Metrics, manual-label ingestion, cross-tool-calling evaluation, and
report emission.

True/false-positive labels always come from a sidecar label file produced
by human inspection; nothing here infers them. FDR = FP / (FP + TP).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .agent import run_agent
from .gateway import Gateway
from .tools import ToolRegistry

log = logging.getLogger(__name__)

LABELS = ("TP", "FP")


class LabelError(ValueError):
    pass


@dataclass(frozen=True)
class LabelFile:
    """Manual labels: finding id -> "TP" or "FP"."""

    labels: dict[str, str]

    def __post_init__(self):
        for finding_id, label in self.labels.items():
            if label not in LABELS:
                raise LabelError(f"label for {finding_id!r} must be TP or FP, got {label!r}")

    @staticmethod
    def load(path: str | Path) -> "LabelFile":
        return LabelFile(labels=dict(json.loads(Path(path).read_text(encoding="utf-8"))))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.labels, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8")

    def validate_against(self, finding_ids: set[str]) -> None:
        unknown = sorted(set(self.labels) - finding_ids)
        if unknown:
            raise LabelError(f"labels reference unknown finding ids: {unknown}")

    def missing_for(self, finding_ids: set[str]) -> list[str]:
        return sorted(finding_ids - set(self.labels))

    @property
    def tp(self) -> int:
        return sum(1 for label in self.labels.values() if label == "TP")

    @property
    def fp(self) -> int:
        return sum(1 for label in self.labels.values() if label == "FP")


def compute_fdr(fp: int, tp: int) -> float:
    """False discovery rate over manually labeled findings."""
    if fp < 0 or tp < 0:
        raise ValueError("label counts must be non-negative")
    if fp + tp == 0:
        raise ValueError("FDR is undefined with no labeled findings")
    return fp / (fp + tp)


@dataclass(frozen=True)
class MetricsReport:
    tested: int = 0
    erroneous: int = 0
    unique_errors: int = 0
    tp: int = 0
    fp: int = 0
    by_method: dict[str, dict[str, int]] = field(default_factory=dict)
    by_taxonomy: dict[str, int] = field(default_factory=dict)
    pass_rates: dict[str, float] = field(default_factory=dict)

    @property
    def fdr(self) -> float | None:
        if self.tp + self.fp == 0:
            return None
        return compute_fdr(self.fp, self.tp)

    def to_dict(self) -> dict:
        return {
            "tested": self.tested,
            "erroneous": self.erroneous,
            "unique_errors": self.unique_errors,
            "tp": self.tp,
            "fp": self.fp,
            "fdr": self.fdr,
            "by_method": {m: dict(v) for m, v in sorted(self.by_method.items())},
            "by_taxonomy": dict(sorted(self.by_taxonomy.items())),
            "pass_rates": dict(sorted(self.pass_rates.items())),
        }

    @staticmethod
    def from_dict(entry: dict) -> "MetricsReport":
        return MetricsReport(
            tested=entry.get("tested", 0),
            erroneous=entry.get("erroneous", 0),
            unique_errors=entry.get("unique_errors", 0),
            tp=entry.get("tp", 0),
            fp=entry.get("fp", 0),
            by_method={m: dict(v) for m, v in entry.get("by_method", {}).items()},
            by_taxonomy=dict(entry.get("by_taxonomy", {})),
            pass_rates=dict(entry.get("pass_rates", {})),
        )


def finding_id(record: dict, index: int) -> str:
    return record.get("id") or f"{record.get('tool_name', 'tool')}-{index:04d}"


def aggregate_campaign(records: list[dict], labels: LabelFile | None = None) -> MetricsReport:
    """Fold per-record campaign output into one report.

    Each record carries method (defaults to "TF"), a tested/erroneous flag
    pair or is itself one tested prompt, and optionally a taxonomy. Counter
    records (with explicit tested/erroneous/unique_errors) are merged as-is
    so fixture tables round-trip byte-exactly.
    """
    tested = erroneous = unique = 0
    by_method: dict[str, dict[str, int]] = {}
    by_taxonomy: dict[str, int] = {}
    for record in records:
        method = record.get("method", "TF")
        bucket = by_method.setdefault(method, {"tested": 0, "erroneous": 0, "unique_errors": 0})
        if "tested" in record:  # pre-aggregated counter record
            bucket["tested"] += int(record["tested"])
            bucket["erroneous"] += int(record.get("erroneous", 0))
            bucket["unique_errors"] += int(record.get("unique_errors", 0))
        else:
            bucket["tested"] += 1
            is_error = bool(record.get("error_class") or record.get("flagged")
                            or record.get("judged_correct") is False)
            if is_error:
                bucket["erroneous"] += 1
            if record.get("taxonomy"):
                by_taxonomy[record["taxonomy"]] = by_taxonomy.get(record["taxonomy"], 0) + 1
        tested = sum(b["tested"] for b in by_method.values())
        erroneous = sum(b["erroneous"] for b in by_method.values())
    unique = sum(b["unique_errors"] for b in by_method.values())
    # per-prompt records contribute unique errors via distinct (signature, taxonomy)
    seen_signatures = {
        (json.dumps(r.get("signature"), sort_keys=True), r.get("taxonomy"))
        for r in records if r.get("signature")
    }
    unique += len(seen_signatures)
    tp = labels.tp if labels else 0
    fp = labels.fp if labels else 0
    return MetricsReport(tested=tested, erroneous=erroneous, unique_errors=unique,
                         tp=tp, fp=fp, by_method=by_method, by_taxonomy=by_taxonomy)


# --- cross-tool calling ------------------------------------------------------

APPENDIX_CATEGORY_GROUPS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("Dall-E", ("Dall-E-Image-Generator",)),
    ("NASA Image and Video Library", (
        "Get Nasa Image and Video Library media metadata manifest",
        "Get NASA Image and Video Library media metadata location",
        "Search NASA Image and Video Library media",
        "Get NASA Image and Video Library video captions location")),
    ("Knowledge Repositories", ("wikidata", "wikipedia", "stack_exchange")),
    ("Academic Resources", ("arxiv", "semanticscholar", "pubmed")),
    ("Search engines", ("duckduckgosearch", "duckduckgosearchresult", "stack_exchange", "youtube_search")),
    ("File operations", ("file_search", "list_directories", "terminal", "python_repl", "python_repl_ast")),
    ("File deletions", ("file_delete", "terminal", "python_repl", "python_repl_ast")),
    ("Move files", ("move_file", "terminal", "python_repl", "python_repl_ast")),
    ("Read files", ("read_file", "terminal", "python_repl", "python_repl_ast")),
    ("Copy files", ("copy_file", "terminal", "python_repl", "python_repl_ast")),
    ("HTTP Requests", ("request_delete", "terminal", "python_repl", "python_repl_ast",
                       "requests_get", "requests_patch", "requests_post", "requests_put")),
    ("Map search", ("open-street-map-search",)),
    ("JSON Operations", ("json_spec_list_keys", "json_spec_get_value")),
    ("Directions", ("open-street-map-distance",)),
    ("GraphQL", ("query_grapql",)),
)


def validate_category_groups(groups=APPENDIX_CATEGORY_GROUPS) -> None:
    names = [name for name, _ in groups]
    if len(names) != len(set(names)):
        raise ValueError("duplicate category group names")
    for name, tools in groups:
        if not tools:
            raise ValueError(f"category group {name!r} lists no tools")


@dataclass(frozen=True)
class CrossToolResult:
    unplanned: int
    per_tool: dict[str, int]
    records: tuple[dict, ...]


def cross_tool_eval(registry: ToolRegistry, prompts_by_category: dict[str, list[str]],
                    gateway: Gateway, max_steps: int = 8) -> CrossToolResult:
    """Run each prompt against the full registry; an unplanned usage is a
    trace step that invokes a tool whose category differs from the prompt's
    source category."""
    for spec in registry:
        if not spec.category:
            raise ValueError(f"tool {spec.name!r} has no category; cross-tool eval requires one")
    unplanned = 0
    per_tool: dict[str, int] = {}
    records: list[dict] = []
    for category in sorted(prompts_by_category):
        for prompt in prompts_by_category[category]:
            trace = run_agent(prompt, registry, gateway, max_steps=max_steps)
            crossed = []
            for invocation, _ in trace.steps:
                spec = registry.get(invocation.tool_name)
                if spec.category != category:
                    crossed.append(invocation.tool_name)
                    per_tool[invocation.tool_name] = per_tool.get(invocation.tool_name, 0) + 1
            if crossed:
                unplanned += 1
            records.append({
                "category": category,
                "prompt": prompt,
                "unplanned_tools": crossed,
            })
    return CrossToolResult(unplanned=unplanned, per_tool=per_tool, records=tuple(records))


# --- emission ----------------------------------------------------------------

FORMATS = ("structured-text", "table")


def _percent_whole(value: float) -> str:
    # round-half-up on the percent value, matching hand-rounded tables
    scaled = value * 100
    return f"{int(scaled + 0.5)}%"


def render_report(report: MetricsReport, format: str = "structured-text") -> str:
    if format == "structured-text":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if format != "table":
        raise ValueError(f"unknown report format {format!r}")

    lines = ["metric              value", "------              -----"]
    lines.append(f"tested              {report.tested}")
    lines.append(f"erroneous           {report.erroneous}")
    lines.append(f"unique errors       {report.unique_errors}")
    if report.tp + report.fp:
        lines.append(f"TP                  {report.tp}")
        lines.append(f"FP                  {report.fp}")
        lines.append(f"FDR                 {_percent_whole(report.fdr)}")
    if report.by_method:
        lines.append("")
        lines.append("method    tested  erroneous  unique")
        for method in sorted(report.by_method):
            b = report.by_method[method]
            lines.append(f"{method:<8}  {b['tested']:>6}  {b['erroneous']:>9}  {b['unique_errors']:>6}")
    if report.by_taxonomy:
        lines.append("")
        lines.append("taxonomy                         count")
        for taxonomy in sorted(report.by_taxonomy):
            lines.append(f"{taxonomy:<31}  {report.by_taxonomy[taxonomy]:>5}")
    if report.pass_rates:
        lines.append("")
        lines.append("split     pass rate")
        for split in sorted(report.pass_rates):
            lines.append(f"{split:<8}  {report.pass_rates[split] * 100:.2f}%")
    return "\n".join(lines) + "\n"


def emit_report(report: MetricsReport, format: str, path: str | Path) -> Path:
    """Deterministic rendering; structured output round-trips to MetricsReport."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(render_report(report, format), encoding="utf-8")
    return target


def load_report(path: str | Path) -> MetricsReport:
    return MetricsReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
