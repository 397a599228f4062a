"""Prompt-engineering baselines: gray-box (name + documentation) and
white-box (plus source text), each with its own judge model.

Baseline prompts flow through the same agent and capture paths as the
main pipelines so their counters are directly comparable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from . import prompts
from .agent import run_agent
from .gateway import ChatRequest, Gateway, StructuredParseError, format_instructions_for
from .runtime import RuntimeCounters, RuntimeFinding, classify_error
from .fuzz import ErrorSignature, template_message
from .tools import ToolRegistry, ToolSpec

_DEGENERATE_RE = re.compile(r"(\S+)(?:\s+\1){9,}")


@dataclass(frozen=True)
class BaselineConfig:
    mode: str  # gray | white
    goal: str  # crash | incorrect
    prompts_per_tool: int = 20

    def __post_init__(self):
        if self.mode not in ("gray", "white"):
            raise ValueError(f"unknown baseline mode {self.mode!r}")
        if self.goal not in ("crash", "incorrect"):
            raise ValueError(f"unknown baseline goal {self.goal!r}")

    @property
    def method(self) -> str:
        return "TF-GB" if self.mode == "gray" else "TF-WB"


def tool_info(spec: ToolSpec, mode: str) -> str:
    info = f"{spec.name}: {spec.documentation}"
    if mode == "white":
        if not spec.source_text:
            raise ValueError(f"white-box baseline requires source_text for {spec.name}")
        info += f"\n\nTool source code:\n{spec.source_text}"
    return info


def is_degenerate(prompt: str) -> bool:
    """A prompt that is one token repeated at least ten times."""
    return _DEGENERATE_RE.search(prompt) is not None


def baseline_generate(spec: ToolSpec, config: BaselineConfig, gateway: Gateway) -> list[str]:
    if config.prompts_per_tool == 0:
        return []
    template = prompts.BASELINE_CRASH if config.goal == "crash" else prompts.BASELINE_CORRECTNESS
    fi = format_instructions_for({"prompts": f"array of {config.prompts_per_tool} user prompt strings"})
    body = template.format(tool_info=tool_info(spec, config.mode), format_instructions=fi)
    request = ChatRequest(messages=(("user", body),), format_instructions=fi)
    parsed = gateway.complete_structured(request, ["prompts"])
    items = parsed["prompts"]
    if not isinstance(items, list):
        raise StructuredParseError('"prompts" must be an array')
    return [str(p) for p in items][:config.prompts_per_tool]


def baseline_judge(question: str, answer: str, gateway: Gateway) -> tuple[bool, str]:
    fi = format_instructions_for({"correct": "boolean", "reason": "short reasoning string"})
    body = prompts.BASELINE_JUDGE.format(question=question, answer=answer, format_instructions=fi)
    request = ChatRequest(messages=(("user", body),), format_instructions=fi)
    parsed = gateway.complete_structured(request, ["correct", "reason"])
    correct = parsed["correct"]
    if not isinstance(correct, bool):
        raise StructuredParseError('"correct" must be a boolean')
    return correct, str(parsed.get("reason", ""))


def run_baseline_campaign(spec: ToolSpec, config: BaselineConfig, registry: ToolRegistry,
                          gateway: Gateway, campaign_dir: str | Path) -> dict:
    """Generate baseline prompts, run them through the agent, and persist
    records tagged with the baseline method."""
    directory = Path(campaign_dir)
    directory.mkdir(parents=True, exist_ok=True)
    generated = baseline_generate(spec, config, gateway)

    findings: list[RuntimeFinding] = []
    records: list[dict] = []
    erroneous = 0
    for prompt in generated:
        trace = run_agent(prompt, registry, gateway)
        record: dict = {
            "method": config.method,
            "goal": config.goal,
            "tool_name": spec.name,
            "prompt": prompt,
            "degenerate": is_degenerate(prompt),
            "final_answer": trace.final_answer,
        }
        error_steps = [out for _, out in trace.steps if not out.ok]
        if config.goal == "crash":
            if error_steps:
                erroneous += 1
                first = error_steps[0]
                findings.append(RuntimeFinding(
                    prompt=prompt,
                    failing_args=dict(trace.steps[0][0].args) if trace.steps else {},
                    signature=ErrorSignature(first.error_class, template_message(first.message)),
                    taxonomy=classify_error(first),
                    tool_name=spec.name,
                ))
                record["error_class"] = first.error_class
        else:
            correct, reason = baseline_judge(prompt, trace.final_answer, gateway)
            record["judged_correct"] = correct
            record["judge_reason"] = reason
            if not correct:
                erroneous += 1
        records.append(record)

    with (directory / f"baseline_{config.method}_{config.goal}.jsonl").open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    counters = RuntimeCounters(tested=len(records), erroneous=erroneous,
                               unique_errors=len({(f.signature, f.taxonomy) for f in findings}))
    return {
        "method": config.method,
        "tested": counters.tested,
        "erroneous": counters.erroneous,
        "unique_errors": counters.unique_errors,
        "findings": findings,
        "records": records,
    }
