"""Correctness failure detection via synonymous prompt sets.

A masked template is instantiated with synonym infills into n prompts
that should all mean the same thing. Three cascading checks follow: the
tool-call arguments across the traces must agree (input consistency),
the tool outputs must agree (output consistency), and an evaluator model
scores each agent answer against a majority-vote expectation. A set is
flagged only when all three checks fail.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import prompts
from .agent import AgentTrace, run_agent
from .canon import canonical_invocations
from .gateway import ChatRequest, Gateway, StructuredParseError, format_instructions_for
from .seeds import substream
from .tools import ToolRegistry, ToolSpec, render_tool_prompt

log = logging.getLogger(__name__)

_MASK_RE = re.compile(r"\[([A-Z])\]")

NO_CALL_KEY = "<no-call>"

ORACLE_PASS_THRESHOLD = 6  # scores <= 5 fail


class PromptSetError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    text: str
    masks: tuple[str, ...]

    def __post_init__(self):
        found = tuple(dict.fromkeys(_MASK_RE.findall(self.text)))
        if set(found) != set(self.masks) or len(self.masks) != len(set(self.masks)):
            raise PromptSetError(f"mask list {self.masks} does not match template {self.text!r}")

    @staticmethod
    def from_text(text: str) -> "PromptTemplate":
        return PromptTemplate(text, tuple(dict.fromkeys(_MASK_RE.findall(text))))

    def substitute(self, assignment: dict[str, str]) -> str:
        out = self.text
        for mask in self.masks:
            out = out.replace(f"[{mask}]", assignment[mask])
        return out


@dataclass(frozen=True)
class InfillSet:
    by_mask: dict[str, tuple[str, ...]]

    def __post_init__(self):
        for mask, values in self.by_mask.items():
            if len(values) < 2:
                raise PromptSetError(f"mask {mask!r} needs at least 2 infills, got {len(values)}")

    def combination_count(self) -> int:
        total = 1
        for values in self.by_mask.values():
            total *= len(values)
        return total


@dataclass(frozen=True)
class PromptSet:
    template: PromptTemplate
    prompts: tuple[str, ...]
    chosen_infills: tuple[dict[str, str], ...]
    raw_prompts: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.prompts) < 2:
            raise PromptSetError("a prompt set needs n >= 2 prompts")
        if len(self.prompts) != len(self.chosen_infills):
            raise PromptSetError("one mask assignment per prompt required")
        raw = self.raw_prompts or self.prompts
        object.__setattr__(self, "raw_prompts", raw)
        for prompt, assignment in zip(raw, self.chosen_infills):
            if self.template.substitute(assignment) != prompt:
                raise PromptSetError(f"prompt {prompt!r} does not match its mask assignment")


@dataclass(frozen=True)
class ConsistencyBuckets:
    input_buckets: tuple[tuple[int, ...], ...]
    output_buckets: tuple[tuple[int, ...], ...]

    @property
    def input_check_failed(self) -> bool:
        return len(self.input_buckets) > 1

    @property
    def output_check_failed(self) -> bool:
        return len(self.output_buckets) > 1


@dataclass(frozen=True)
class OracleVerdict:
    expectation: str
    per_prompt_scores: tuple[int, ...]
    reasons: tuple[str, ...]

    def __post_init__(self):
        for score in self.per_prompt_scores:
            if not 1 <= score <= 10:
                raise ValueError(f"oracle score {score} out of [1, 10]")

    @property
    def passed(self) -> bool:
        return min(self.per_prompt_scores) >= ORACLE_PASS_THRESHOLD

    @property
    def failed(self) -> bool:
        return any(score < ORACLE_PASS_THRESHOLD for score in self.per_prompt_scores)


@dataclass(frozen=True)
class CorrectnessFlag:
    input_check_failed: bool
    output_check_failed: bool
    oracle_failed: bool

    @property
    def flagged(self) -> bool:
        return self.input_check_failed and self.output_check_failed and self.oracle_failed


# --- prompt set generation ---------------------------------------------------


def generate_templates(spec: ToolSpec, context: str | None, m: int, gateway: Gateway) -> list[PromptTemplate]:
    """Ask the model for m masked template questions; maskless output is
    discarded and regenerated once."""
    fi = format_instructions_for({"templates": f"array of {m} template question strings using [A], [B], ... masks"})
    body = prompts.QUESTION_TEMPLATE.format(
        tool_prompt=render_tool_prompt(spec),
        tool_context=context or "none",
        format_instructions=fi,
    )
    request = ChatRequest(messages=(("user", body),), format_instructions=fi)
    texts = _string_list(gateway, request, "templates")
    masked = [t for t in texts if _MASK_RE.search(t)]
    if len(masked) < m:
        retry = ChatRequest(
            messages=(("user", body), ("user", "Every template MUST contain at least one mask like [A].")),
            format_instructions=fi,
        )
        try:
            texts = _string_list(gateway, retry, "templates")
        except StructuredParseError:
            texts = []
        masked.extend(t for t in texts if _MASK_RE.search(t) and t not in masked)
    return [PromptTemplate.from_text(t) for t in masked[:m]]


def generate_infills(template: PromptTemplate, spec: ToolSpec, used_args: list[str],
                     gateway: Gateway, context: str | None = None) -> InfillSet:
    """Per-mask synonym lists; previously used values are excluded and
    case-insensitive duplicates dropped."""
    fi = format_instructions_for({"infills": 'object mapping each mask letter to an array of synonymous strings'})
    body = prompts.INFILLS.format(
        template_prompt=template.text,
        tool_prompt=render_tool_prompt(spec),
        tool_context=context or "none",
        used_args=json.dumps(used_args, ensure_ascii=False),
        format_instructions=fi,
    )
    request = ChatRequest(messages=(("user", body),), temperature=0.7, format_instructions=fi)
    parsed = gateway.complete_structured(request, ["infills"])
    raw = parsed["infills"]
    if not isinstance(raw, dict):
        raise StructuredParseError('"infills" must be an object')
    excluded = {u.lower() for u in used_args}
    by_mask: dict[str, tuple[str, ...]] = {}
    for mask in template.masks:
        values = [str(v) for v in raw.get(mask, [])]
        seen: set[str] = set()
        kept: list[str] = []
        for value in values:
            lowered = value.lower()
            if lowered in excluded or lowered in seen:
                continue
            seen.add(lowered)
            kept.append(value)
        if len(kept) < 2:
            raise PromptSetError(f"mask {mask!r} received fewer than 2 usable infills")
        by_mask[mask] = tuple(kept)
    return InfillSet(by_mask)


def instantiate_prompt_set(template: PromptTemplate, infills: InfillSet, n: int, seed: int) -> PromptSet:
    """Sample n distinct mask assignments without replacement under the seed."""
    total = infills.combination_count()
    if n > total:
        raise PromptSetError(f"cannot draw {n} distinct assignments from {total} combinations")
    rng = substream(seed, f"sampling:{template.text}")
    picks = sorted(rng.sample(range(total), n))
    assignments: list[dict[str, str]] = []
    for index in picks:
        assignment: dict[str, str] = {}
        remainder = index
        for mask in template.masks:
            values = infills.by_mask[mask]
            remainder, digit = divmod(remainder, len(values))
            assignment[mask] = values[digit]
        assignments.append(assignment)
    prompt_texts = tuple(template.substitute(a) for a in assignments)
    return PromptSet(template=template, prompts=prompt_texts, chosen_infills=tuple(assignments))


def humanize(prompt_set: PromptSet, spec: ToolSpec, gateway: Gateway, enabled: bool = True) -> PromptSet:
    """Rewrite prompts in a more human register; provenance preserved.

    On a cardinality mismatch the set is kept un-humanized with a warning."""
    if not enabled:
        return prompt_set
    fi = format_instructions_for({"prompts": f"array of {len(prompt_set.prompts)} rewritten prompt strings, same order"})
    body = prompts.HUMANIZE.format(
        tool_prompt=render_tool_prompt(spec),
        prompts=json.dumps(list(prompt_set.prompts), ensure_ascii=False),
        format_instructions=fi,
    )
    request = ChatRequest(messages=(("user", body),), format_instructions=fi)
    rewritten = _string_list(gateway, request, "prompts")
    if len(rewritten) != len(prompt_set.prompts):
        log.warning("humanize returned %d prompts for a set of %d; keeping originals",
                    len(rewritten), len(prompt_set.prompts))
        return prompt_set
    return replace(prompt_set, prompts=tuple(rewritten), raw_prompts=prompt_set.raw_prompts)


def _string_list(gateway: Gateway, request: ChatRequest, key: str) -> list[str]:
    parsed = gateway.complete_structured(request, [key])
    items = parsed[key]
    if not isinstance(items, list):
        raise StructuredParseError(f'"{key}" must be an array')
    return [str(v) for v in items]


# --- consistency checks ------------------------------------------------------


def bucket_consistency(traces: list[AgentTrace], tested: ToolSpec) -> ConsistencyBuckets:
    """Partition prompt indices (1-based) by exact input and output equality.

    A trace that never calls the tested tool goes to a dedicated
    bucket; mixing calling and non-calling traces therefore fails the
    input check."""
    input_keys: dict[str, list[int]] = {}
    output_keys: dict[str, list[int]] = {}
    for index, trace in enumerate(traces, start=1):
        invocations = trace.invocations_of(tested.name)
        outcomes = trace.outcomes_of(tested.name)
        if invocations:
            in_key = canonical_invocations([inv.args for inv in invocations])
            out_key = "".join(out.render().rstrip() for out in outcomes)
        else:
            in_key = out_key = NO_CALL_KEY
        input_keys.setdefault(in_key, []).append(index)
        output_keys.setdefault(out_key, []).append(index)
    return ConsistencyBuckets(
        input_buckets=tuple(tuple(v) for _, v in sorted(input_keys.items(), key=lambda kv: kv[1][0])),
        output_buckets=tuple(tuple(v) for _, v in sorted(output_keys.items(), key=lambda kv: kv[1][0])),
    )


# --- oracle ------------------------------------------------------------------


def build_expectation(prompt_set: PromptSet, spec: ToolSpec, votes: int, gateway: Gateway) -> str:
    """Answer every prompt k times by emulating the tool, then combine the
    answers into a single expectation sentence."""
    if votes < 1:
        raise ValueError("votes must be >= 1")
    fi = format_instructions_for({"answers": "array with one answer string per question"})
    sentences: list[str] = []
    for prompt in prompt_set.prompts:
        for vote in range(1, votes + 1):
            body = prompts.EMULATION_ANSWER.format(
                tool_prompt=render_tool_prompt(spec),
                questions=prompt,
                format_instructions=fi,
            )
            request = ChatRequest(
                # the vote index message makes the k requests distinct so a
                # replay cassette can hold k independent answers
                messages=(("system", f"independent answer attempt {vote} of {votes}"), ("user", body)),
                format_instructions=fi,
            )
            answers = _string_list(gateway, request, "answers")
            if answers:
                sentences.append(answers[0])
    combine_fi = format_instructions_for({"expectation": "one factually grounded sentence"})
    body = prompts.EXPECTATION_COMBINE.format(
        sentences="\n\n".join(sentences),
        format_instructions=combine_fi,
    )
    request = ChatRequest(messages=(("user", body),), format_instructions=combine_fi)
    parsed = gateway.complete_structured(request, ["expectation"])
    return str(parsed["expectation"])


def oracle_evaluate(trace: AgentTrace, tool_output: str, expectation: str, gateway: Gateway) -> tuple[int, str]:
    """Score one agent answer (1-10) against the tool output and expectation."""
    fi = format_instructions_for({"correctness_degree": "integer between 1 and 10", "reason": "short reasoning string"})
    body = prompts.ORACLE_EVAL.format(
        agent_output=trace.final_answer,
        tool_output=tool_output,
        expected=expectation,
        format_instructions=fi,
    )
    request = ChatRequest(messages=(("user", body),), format_instructions=fi)
    parsed = gateway.complete_structured(request, ["correctness_degree", "reason"])
    score = parsed["correctness_degree"]
    if not isinstance(score, int) or not 1 <= score <= 10:
        retry = ChatRequest(
            messages=(("user", body), ("user", "The correctness_degree MUST be an integer from 1 to 10.")),
            format_instructions=fi,
        )
        parsed = gateway.complete_structured(retry, ["correctness_degree", "reason"])
        score = parsed["correctness_degree"]
        if not isinstance(score, int) or not 1 <= score <= 10:
            raise StructuredParseError(f"oracle score out of range after retry: {score!r}")
    return score, str(parsed.get("reason", ""))


def flag_prompt_set(buckets: ConsistencyBuckets, verdict: OracleVerdict) -> CorrectnessFlag:
    """A set is faulty only when all three checks fail."""
    return CorrectnessFlag(
        input_check_failed=buckets.input_check_failed,
        output_check_failed=buckets.output_check_failed,
        oracle_failed=verdict.failed,
    )


# --- set evaluation and campaign ---------------------------------------------


@dataclass(frozen=True)
class CorrectnessParams:
    seed: int
    prompts_per_set: int = 5
    templates_per_tool: int = 3
    oracle_votes: int = 3
    humanize: bool = False
    context: str | None = None


@dataclass(frozen=True)
class SetResult:
    prompt_set: PromptSet
    traces: tuple[AgentTrace, ...]
    buckets: ConsistencyBuckets
    verdict: OracleVerdict
    flag: CorrectnessFlag

    def to_dict(self) -> dict:
        return {
            "template": self.prompt_set.template.text,
            "masks": list(self.prompt_set.template.masks),
            "prompts": list(self.prompt_set.prompts),
            "chosen_infills": list(self.prompt_set.chosen_infills),
            "traces": [t.to_dict() for t in self.traces],
            "input_buckets": [list(b) for b in self.buckets.input_buckets],
            "output_buckets": [list(b) for b in self.buckets.output_buckets],
            "expectation": self.verdict.expectation,
            "scores": list(self.verdict.per_prompt_scores),
            "reasons": list(self.verdict.reasons),
            "input_check_failed": self.flag.input_check_failed,
            "output_check_failed": self.flag.output_check_failed,
            "oracle_failed": self.flag.oracle_failed,
            "flagged": self.flag.flagged,
        }


def evaluate_prompt_set(prompt_set: PromptSet, spec: ToolSpec, registry: ToolRegistry,
                        gateway: Gateway, votes: int) -> SetResult:
    """Run the agent over a prompt set and apply all three checks.

    Each trace is scored against its own concatenated tool output."""
    traces = tuple(run_agent(prompt, registry, gateway) for prompt in prompt_set.prompts)
    buckets = bucket_consistency(list(traces), spec)
    expectation = build_expectation(prompt_set, spec, votes, gateway)
    scores: list[int] = []
    reasons: list[str] = []
    for trace in traces:
        own_output = "".join(out.render().rstrip() for out in trace.outcomes_of(spec.name)) or NO_CALL_KEY
        score, reason = oracle_evaluate(trace, own_output, expectation, gateway)
        scores.append(score)
        reasons.append(reason)
    verdict = OracleVerdict(expectation=expectation, per_prompt_scores=tuple(scores), reasons=tuple(reasons))
    return SetResult(prompt_set, traces, buckets, verdict, flag_prompt_set(buckets, verdict))


def run_correctness_campaign(spec: ToolSpec, registry: ToolRegistry, params: CorrectnessParams,
                             gateway: Gateway, campaign_dir: str | Path) -> list[SetResult]:
    """Full correctness pipeline for one tool; persists one record per set."""
    directory = Path(campaign_dir)
    sets_dir = directory / "sets"
    sets_dir.mkdir(parents=True, exist_ok=True)

    templates = generate_templates(spec, params.context, params.templates_per_tool, gateway)
    used_args: list[str] = []
    results: list[SetResult] = []
    for index, template in enumerate(templates):
        try:
            infills = generate_infills(template, spec, used_args, gateway, params.context)
            prompt_set = instantiate_prompt_set(template, infills, params.prompts_per_set, params.seed)
            prompt_set = humanize(prompt_set, spec, gateway, enabled=params.humanize)
            result = evaluate_prompt_set(prompt_set, spec, registry, gateway, params.oracle_votes)
        except (PromptSetError, StructuredParseError) as exc:
            log.warning("skipping template %r: %s", template.text, exc)
            continue
        used_args.extend(v for assignment in prompt_set.chosen_infills for v in assignment.values())
        results.append(result)
        record = result.to_dict()
        record["tool_name"] = spec.name
        (sets_dir / f"set_{index:03d}.json").write_text(
            json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    summary = {
        "tool_name": spec.name,
        "sets": len(results),
        "flagged": sum(1 for r in results if r.flag.flagged),
    }
    (directory / "correctness_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return results
