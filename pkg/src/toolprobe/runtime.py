"""Runtime failure detection: fuzz, sanity-check, prompt synthesis, agent runs.

The fuzzer finds arguments that break the tool in isolation; the sanity
check confirms the documentation actually permits those arguments; an
LLM then turns them into natural user prompts, and only prompts whose
agent run hits a runtime tool error are reported.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import prompts
from .agent import AgentTrace, run_agent
from .canon import canonical_args
from .fuzz import ErrorSignature, FailingInput, FuzzConfig, dedupe_failures, fuzz_tool, infer_constraints
from .gateway import ChatRequest, Gateway, StructuredParseError, format_instructions_for
from .tools import ToolOutcome, ToolRegistry, ToolSpec, render_tool_prompt

TAXONOMY = (
    "output-parsing",
    "input-grammar-type",
    "input-grammar-syntax",
    "http-error",
    "tool-specific",
    "output-too-long",
    "transport",
)


@dataclass(frozen=True)
class RuntimeFinding:
    prompt: str
    failing_args: dict
    signature: ErrorSignature
    taxonomy: str
    tool_name: str = ""

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "failing_args": self.failing_args,
            "signature": {"error_class": self.signature.error_class, "template": self.signature.message_template},
            "taxonomy": self.taxonomy,
            "tool_name": self.tool_name,
        }

    @staticmethod
    def from_dict(entry: dict) -> "RuntimeFinding":
        return RuntimeFinding(
            prompt=entry["prompt"],
            failing_args=entry["failing_args"],
            signature=ErrorSignature(entry["signature"]["error_class"], entry["signature"]["template"]),
            taxonomy=entry["taxonomy"],
            tool_name=entry.get("tool_name", ""),
        )


@dataclass(frozen=True)
class RuntimeCounters:
    tested: int = 0
    erroneous: int = 0
    unique_errors: int = 0


_TYPE_CLASSES = {"TypeError", "ValidationError"}
_PARSE_HINT = re.compile(r"pars(e|ing)", re.IGNORECASE)
_HTTP_HINT = re.compile(r"\b[45]\d\d\b|http", re.IGNORECASE)
_TOO_LONG_OUTPUT = re.compile(r"output (is )?too long|context length|maximum context|too many tokens", re.IGNORECASE)
_SYNTAX_HINT = re.compile(r"must start|too long|characters|format|syntax|split|prefix|invalid query", re.IGNORECASE)
_TYPE_HINT = re.compile(r"invalid literal|expected (an? )?(int|float|bool|list|number)|not a valid (int|float|bool|number)|unsupported operand", re.IGNORECASE)


def classify_error(outcome: ToolOutcome) -> str:
    """Deterministic taxonomy over error class and message keywords."""
    if outcome.ok:
        raise ValueError("cannot classify a success outcome")
    cls, msg = outcome.error_class, outcome.message
    if cls == "TransportError":
        return "transport"
    if _TOO_LONG_OUTPUT.search(msg):
        return "output-too-long"
    if cls == "OutputParserException" or (cls == "ValueError" and _PARSE_HINT.search(msg)):
        return "output-parsing"
    if "HTTP" in cls or _HTTP_HINT.search(cls) or (cls in {"ConnectionError", "RequestException"} and _HTTP_HINT.search(msg)):
        return "http-error"
    if cls in _TYPE_CLASSES or _TYPE_HINT.search(msg):
        return "input-grammar-type"
    if cls == "AssertionError" or _SYNTAX_HINT.search(msg):
        return "input-grammar-syntax"
    return "tool-specific"


def sanity_check(spec: ToolSpec, failing: FailingInput, registry: ToolRegistry, gateway: Gateway) -> bool:
    """Ask the agent to invoke the tool with the failing arguments verbatim.

    Pass only if the trace contains an invocation of the tool whose
    canonical arguments equal the failing ones; refusal or altered
    arguments fail."""
    prompt = prompts.SANITY_CHECK.format(tool_name=spec.name, bad_arg=canonical_args(failing.args))
    trace = run_agent(prompt, registry, gateway)
    wanted = canonical_args(failing.args)
    return any(canonical_args(inv.args) == wanted for inv in trace.invocations_of(spec.name))


def _string_values(args: dict) -> list[str]:
    values = []
    for value in args.values():
        if isinstance(value, str):
            values.append(value)
        elif isinstance(value, list):
            values.extend(v for v in value if isinstance(v, str))
        else:
            values.append(json.dumps(value))
    return values


def _mentions_failing_value(prompt: str, args: dict) -> bool:
    return any(value and value in prompt for value in _string_values(args))


def synthesize_user_prompts(spec: ToolSpec, failing_inputs: list[FailingInput], k: int,
                            gateway: Gateway) -> list[tuple[str, FailingInput]]:
    """Generate k natural user prompts per failing input.

    A prompt that does not carry at least one failing argument value
    verbatim is regenerated once, then dropped."""
    results: list[tuple[str, FailingInput]] = []
    if k == 0:
        return results
    fi = format_instructions_for({"prompts": f"array of {k} user prompt strings"})
    for failing in failing_inputs:
        body = prompts.ARGS_TO_PROMPT.format(
            tool_prompt=render_tool_prompt(spec),
            format_instructions=fi,
            bad_args=canonical_args(failing.args),
        )
        request = ChatRequest(messages=(("user", body),), format_instructions=fi)
        generated = _prompt_list(gateway, request)
        kept = [p for p in generated if _mentions_failing_value(p, failing.args)]
        if len(kept) < k:
            retry = ChatRequest(
                messages=(
                    ("user", body),
                    ("user", "Previous prompts did not carry the argument values verbatim. "
                             "Regenerate and include each given argument value exactly as written."),
                ),
                format_instructions=fi,
            )
            try:
                regenerated = _prompt_list(gateway, retry)
            except StructuredParseError:
                regenerated = []
            kept.extend(p for p in regenerated if _mentions_failing_value(p, failing.args) and p not in kept)
        results.extend((p, failing) for p in kept[:k])
    return results


def _prompt_list(gateway: Gateway, request: ChatRequest) -> list[str]:
    parsed = gateway.complete_structured(request, ["prompts"])
    items = parsed["prompts"]
    if not isinstance(items, list):
        raise StructuredParseError('"prompts" must be an array')
    return [str(p) for p in items]


@dataclass(frozen=True)
class RuntimeConfig:
    fuzz: FuzzConfig
    prompts_per_input: int = 3
    probe_budget: int = 10
    infer: bool = True


def detect_runtime_failures(spec: ToolSpec, config: RuntimeConfig, registry: ToolRegistry,
                            gateway: Gateway) -> tuple[list[RuntimeFinding], RuntimeCounters]:
    """Full runtime pipeline for one tool."""
    extra = infer_constraints(spec, config.probe_budget) if config.infer else []
    failures = fuzz_tool(spec, config.fuzz, extra_constraints=extra)
    unique = list(dedupe_failures(failures).values())
    sane = [f for f in unique if sanity_check(spec, f, registry, gateway)]
    synthesized = synthesize_user_prompts(spec, sane, config.prompts_per_input, gateway)

    findings: list[RuntimeFinding] = []
    tested = erroneous = 0
    for prompt, failing in synthesized:
        trace = run_agent(prompt, registry, gateway)
        tested += 1
        error_steps = [out for _, out in trace.steps if not out.ok]
        if not error_steps:
            continue
        erroneous += 1
        first = error_steps[0]
        findings.append(
            RuntimeFinding(
                prompt=prompt,
                failing_args=failing.args,
                signature=ErrorSignature(first.error_class, _template(first)),
                taxonomy=classify_error(first),
                tool_name=spec.name,
            )
        )
    unique_count = len({(f.signature, f.taxonomy) for f in findings})
    return findings, RuntimeCounters(tested=tested, erroneous=erroneous, unique_errors=unique_count)


def _template(outcome: ToolOutcome) -> str:
    from .fuzz import template_message

    return template_message(outcome.message)


def dedupe_findings(findings: list[RuntimeFinding]) -> dict[tuple[ErrorSignature, str], list[RuntimeFinding]]:
    """Group findings by (signature, taxonomy); prompts are the witnesses."""
    grouped: dict[tuple[ErrorSignature, str], list[RuntimeFinding]] = {}
    for finding in findings:
        grouped.setdefault((finding.signature, finding.taxonomy), []).append(finding)
    return grouped


def write_findings(campaign_dir: str | Path, findings: list[RuntimeFinding], counters: RuntimeCounters,
                   method: str = "TF") -> None:
    directory = Path(campaign_dir)
    directory.mkdir(parents=True, exist_ok=True)
    with (directory / "findings.jsonl").open("w", encoding="utf-8") as fh:
        for finding in findings:
            entry = finding.to_dict()
            entry["method"] = method
            fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")
    (directory / "counters.json").write_text(
        json.dumps(
            {"tested": counters.tested, "erroneous": counters.erroneous, "unique_errors": counters.unique_errors, "method": method},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )


def read_findings(campaign_dir: str | Path) -> list[RuntimeFinding]:
    path = Path(campaign_dir) / "findings.jsonl"
    if not path.exists():
        return []
    return [RuntimeFinding.from_dict(json.loads(line)) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
