"""Minimal reason-act agent loop.

The model is prompted with the rendered tool descriptions and a small
action grammar: each completion must contain either
``ACTION: <tool-name> <json-args>`` or ``FINAL: <answer>``. Observations
(including runtime errors, verbatim) are appended to the history until
the model answers or the step budget runs out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .gateway import ChatRequest, Gateway
from .tools import ToolInvocation, ToolOutcome, ToolRegistry, invoke_tool, render_tool_prompt

DEFAULT_MAX_STEPS = 8
HISTORY_WINDOW = 20  # steps kept verbatim in the prompt

_SYSTEM_TEMPLATE = """You are an assistant that can use tools to answer user questions.

Available tools:
{tool_prompts}

To use a tool, reply with exactly one line of the form:
ACTION: <tool-name> <json-object-with-arguments>
After each action you will receive an observation with the tool result.
When you can answer the user, reply with:
FINAL: <your answer>
Reply with exactly one ACTION or one FINAL per turn."""

_CORRECTION = (
    "That reply was not a valid action. Reply with exactly one line of the form "
    'ACTION: <tool-name> {"arg": value} or FINAL: <answer>. Reason: {reason}'
)


@dataclass(frozen=True)
class AgentTrace:
    user_query: str
    steps: tuple[tuple[ToolInvocation, ToolOutcome], ...]
    final_answer: str
    terminated_by: str  # answer | max_steps | refusal

    def invocations_of(self, tool_name: str) -> list[ToolInvocation]:
        return [inv for inv, _ in self.steps if inv.tool_name == tool_name]

    def outcomes_of(self, tool_name: str) -> list[ToolOutcome]:
        return [out for inv, out in self.steps if inv.tool_name == tool_name]

    def has_runtime_error(self) -> bool:
        return any(not out.ok for _, out in self.steps)

    def to_dict(self) -> dict:
        return {
            "user_query": self.user_query,
            "steps": [
                {
                    "tool_name": inv.tool_name,
                    "args": inv.args,
                    "ordinal": inv.ordinal,
                    "ok": out.ok,
                    "output": out.output,
                    "error_class": out.error_class,
                    "message": out.message,
                }
                for inv, out in self.steps
            ],
            "final_answer": self.final_answer,
            "terminated_by": self.terminated_by,
        }

    @staticmethod
    def from_dict(entry: dict) -> "AgentTrace":
        steps = tuple(
            (
                ToolInvocation(s["tool_name"], s["args"], s.get("ordinal", i)),
                ToolOutcome(ok=s["ok"], output=s.get("output", ""), error_class=s.get("error_class", ""), message=s.get("message", "")),
            )
            for i, s in enumerate(entry["steps"])
        )
        return AgentTrace(entry["user_query"], steps, entry["final_answer"], entry["terminated_by"])


@dataclass(frozen=True)
class ParsedAction:
    kind: str  # call | final | malformed
    invocation: ToolInvocation | None = None
    answer: str = ""
    reason: str = ""


def parse_tool_call(completion: str, registry: ToolRegistry) -> ParsedAction:
    """Recognize the action grammar in a completion. Malformed is a value,
    never an exception."""
    for line_no, line in enumerate(completion.splitlines()):
        stripped = line.strip()
        if stripped.startswith("FINAL:"):
            rest = completion.split("FINAL:", 1)[1].strip()
            return ParsedAction(kind="final", answer=rest)
        if stripped.startswith("ACTION:"):
            body = stripped[len("ACTION:"):].strip()
            # arguments may continue on following lines
            remainder = "\n".join(completion.splitlines()[line_no + 1:])
            return _parse_action_body(body, remainder, registry)
    return ParsedAction(kind="malformed", reason="no ACTION or FINAL line found")


def _parse_action_body(body: str, remainder: str, registry: ToolRegistry) -> ParsedAction:
    brace = body.find("{")
    if brace == -1:
        name, args_text = body.strip(), remainder
    else:
        name, args_text = body[:brace].strip(), body[brace:] + "\n" + remainder
    if not name:
        return ParsedAction(kind="malformed", reason="missing tool name")
    if name not in registry:
        return ParsedAction(kind="malformed", reason=f"unknown tool {name!r}")
    first = args_text.find("{")
    last = args_text.rfind("}")
    if first == -1 or last <= first:
        args: dict[str, Any] = {}
    else:
        try:
            args = json.loads(args_text[first:last + 1])
        except ValueError as exc:
            return ParsedAction(kind="malformed", reason=f"bad JSON arguments: {exc}")
        if not isinstance(args, dict):
            return ParsedAction(kind="malformed", reason="arguments must be a JSON object")
    spec = registry.get(name)
    unknown = set(args) - set(spec.arg_names())
    if unknown:
        return ParsedAction(kind="malformed", reason=f"unknown arguments {sorted(unknown)}")
    return ParsedAction(kind="call", invocation=ToolInvocation(tool_name=name, args=args))


def run_agent(query: str, registry: ToolRegistry, gateway: Gateway,
              max_steps: int = DEFAULT_MAX_STEPS, temperature: float = 0.0) -> AgentTrace:
    """Run one reason-act trace for a user query."""
    if len(registry) == 0:
        raise ValueError("registry must be non-empty")
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")

    system = _SYSTEM_TEMPLATE.format(tool_prompts="\n\n".join(render_tool_prompt(s) for s in registry))
    steps: list[tuple[ToolInvocation, ToolOutcome]] = []

    while len(steps) < max_steps:
        messages: list[tuple[str, str]] = [("system", system), ("user", query)]
        for invocation, outcome in steps[-HISTORY_WINDOW:]:
            messages.append(("assistant", f"ACTION: {invocation.tool_name} {json.dumps(invocation.args, ensure_ascii=False)}"))
            messages.append(("user", f"Observation: {outcome.render()}"))
        request = ChatRequest(messages=tuple(messages), temperature=temperature)
        completion = gateway.complete(request)
        action = parse_tool_call(completion, registry)
        if action.kind == "malformed":
            # one corrective retry, then give up as a refusal
            retry = ChatRequest(
                messages=tuple(messages) + (("assistant", completion), ("user", _CORRECTION.replace("{reason}", action.reason))),
                temperature=temperature,
            )
            completion = gateway.complete(retry)
            action = parse_tool_call(completion, registry)
            if action.kind == "malformed":
                return AgentTrace(query, tuple(steps), "", "refusal")
        if action.kind == "final":
            if not action.answer:
                return AgentTrace(query, tuple(steps), "", "refusal")
            return AgentTrace(query, tuple(steps), action.answer, "answer")
        invocation = ToolInvocation(action.invocation.tool_name, action.invocation.args, ordinal=len(steps))
        outcome = invoke_tool(registry.get(invocation.tool_name), invocation.args)
        steps.append((invocation, outcome))

    return AgentTrace(query, tuple(steps), "", "max_steps")


def is_no_call_trace(trace: AgentTrace) -> bool:
    """Sanity-check refusal detection: the agent never called any tool."""
    return not trace.steps
