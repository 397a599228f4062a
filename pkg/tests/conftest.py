"""Shared fixtures: in-process replica tools and scripted language models.

The replica tools reproduce characteristic failure shapes (length assert,
missing prefix, type error, HTTP stub, off-enum lookup, map distance).
The scripted models are deterministic functions of the request, so they
can drive pipelines directly or be recorded into replay cassettes.
"""

from __future__ import annotations

import json
import re

import pytest

from toolprobe.canon import canonical_args
from toolprobe.gateway import ChatRequest, Gateway, ScriptedBackend
from toolprobe.tools import (
    AdapterRef,
    ArgSpec,
    SyntaxConstraint,
    ToolRegistry,
    ToolSpec,
    register_inprocess,
)

# Replica tool functions live in replicas.py, outside pytest's assertion
# rewriting, so their error messages stay byte-stable across invocations.
from replicas import (  # noqa: E402
    MAIL_LABELS,
    HTTPError,
    http_stub,
    int_counter,
    length_search,
    lookup,
    map_distance,
    prefix_search,
    search_mail,
)

for _name, _fn in [
    ("replica:length_search", length_search),
    ("replica:prefix_search", prefix_search),
    ("replica:int_counter", int_counter),
    ("replica:http_stub", http_stub),
    ("replica:search_mail", search_mail),
    ("replica:map_distance", map_distance),
    ("replica:lookup", lookup),
]:
    register_inprocess(_name, _fn)


def _text_tool(name, documentation, arg_name="query", constraints=(), category="search"):
    return ToolSpec(
        name=name,
        documentation=documentation,
        args=(ArgSpec(name=arg_name, kind="text", description="the input",
                      syntax_constraints=tuple(constraints)),),
        adapter=AdapterRef(type="inprocess", target=f"replica:{name}"),
        category=category,
    )


LENGTH_TOOL = _text_tool(
    "length_search",
    "Tool to query a map. This tool can locate places by name and simple queries.",
    constraints=(SyntaxConstraint(kind="required-prefix", text="query: "),),
)
PREFIX_TOOL = _text_tool(
    "prefix_search",
    "Search an index. Queries must carry the documented prefix.",
    constraints=(SyntaxConstraint(kind="required-prefix", text="query: "),),
)
TYPE_TOOL = _text_tool("int_counter", "Double a number given as text.", arg_name="value")
HTTP_TOOL = _text_tool("http_stub", "Query a remote search API over HTTP.")
ENUM_TOOL = ToolSpec(
    name="search_mail",
    documentation="Count messages in a mailbox folder.",
    args=(ArgSpec(name="label", kind="enum", description="mailbox folder",
                  enum_values=MAIL_LABELS),),
    adapter=AdapterRef(type="inprocess", target="replica:search_mail"),
    category="mail",
)
MAP_TOOL = ToolSpec(
    name="map_distance",
    documentation=("Tool which can find a route between two locations and give back the "
                   "distance of that route in meters for a car trip."),
    args=(
        ArgSpec(name="from_location_query", kind="text", description="start location"),
        ArgSpec(name="to_location_query", kind="text", description="destination location"),
    ),
    adapter=AdapterRef(type="inprocess", target="replica:map_distance"),
    category="directions",
)
LOOKUP_TOOL = ToolSpec(
    name="lookup",
    documentation="Look up a short fact about any topic.",
    args=(ArgSpec(name="topic", kind="text", description="what to look up"),),
    adapter=AdapterRef(type="inprocess", target="replica:lookup"),
    category="knowledge",
)

RUNTIME_SUITE = (LENGTH_TOOL, PREFIX_TOOL, TYPE_TOOL, HTTP_TOOL, ENUM_TOOL)


# --- scripted model helpers --------------------------------------------------

_SANITY_RE = re.compile(r"Please invoke the (\S+) exactly like: ")
_SYNTH_PROMPT_RE = re.compile(r"Use the tool (\S+) with arguments (\{.*\}) as given", re.DOTALL)
_BAD_ARGS_RE = re.compile(r"predefined arguments: (\{.*\})\. Make use", re.DOTALL)
_TOOL_NAME_RE = re.compile(r"Tool: (\S+)")
_COUNT_RE = re.compile(r"array of (\d+) ")


def _is_agent_request(request: ChatRequest) -> bool:
    return request.messages[0][0] == "system" and "ACTION:" in request.messages[0][1]


def _agent_steps(request: ChatRequest) -> int:
    return sum(1 for role, _ in request.messages if role == "assistant")


def _agent_query(request: ChatRequest) -> str:
    return request.messages[1][1]


def _requested_count(request: ChatRequest, default: int = 3) -> int:
    match = _COUNT_RE.search(request.format_instructions or "")
    return int(match.group(1)) if match else default


def _last_observation(request: ChatRequest) -> str:
    for role, content in reversed(request.messages):
        if role == "user" and content.startswith("Observation: "):
            return content[len("Observation: "):]
    return ""


def runtime_script(request: ChatRequest) -> str:
    """Scripted model for the runtime pipeline.

    Sanity-check and synthesized prompts both carry the exact argument
    JSON; the agent persona replays it as an ACTION, then answers."""
    if _is_agent_request(request):
        query = _agent_query(request)
        if _agent_steps(request) > 0:
            return "FINAL: observed " + _last_observation(request)
        match = _SANITY_RE.search(query)
        if match:
            tool = match.group(1)
            call = query.split("exactly like: ", 1)[1]
            args_json = call[len(tool) + 1:-1]
            return f"ACTION: {tool} {args_json}"
        match = _SYNTH_PROMPT_RE.search(query)
        if match:
            return f"ACTION: {match.group(1)} {match.group(2)}"
        return "FINAL: I cannot help with that."

    body = request.messages[-1][1]
    if "Come up with prompts which will invoke the tool" in body:
        tool = _TOOL_NAME_RE.search(body).group(1)
        args_json = _BAD_ARGS_RE.search(body).group(1)
        k = _requested_count(request)
        generated = [f"Use the tool {tool} with arguments {args_json} as given, attempt {i}."
                     for i in range(1, k + 1)]
        return json.dumps({"prompts": generated})
    raise AssertionError(f"runtime script got an unexpected request: {body[:120]!r}")


def paris_lyon_script(request: ChatRequest) -> str:
    """Scripted model for the map-distance correctness regression."""
    if _is_agent_request(request):
        query = _agent_query(request)
        if _agent_steps(request) > 0:
            return "FINAL: " + _last_observation(request)
        match = re.search(r"What is the car route distance from (.+) to (.+)\?", query)
        if match:
            start = match.group(1)
            if start in ("Paris FR", "Paris France"):
                args = {"from_location_query": "Paris, France", "to_location_query": "Lyon, France"}
            elif start == "City of Paris":
                args = {"from_location_query": "City of Paris", "to_location_query": "City of Lyon"}
            elif start == "Paris, France":
                args = {"from_location_query": "Paris, France", "to_location_query": "Lyon, France"}
            else:
                args = {"from_location_query": "Paris", "to_location_query": "Lyon"}
            return f"ACTION: map_distance {json.dumps(args)}"
        return "FINAL: I cannot help with that."

    body = request.messages[-1][1]
    if "You are emulating the following tool" in body:
        return json.dumps({"answers": [
            "The road distance between Paris and Lyon is approximately 465 kilometers (289 miles)."
        ]})
    if "You have the following sentences" in body:
        return json.dumps({"expectation":
                           "The road distance between Paris and Lyon is approximately 465 kilometers (289 miles)."})
    if "You are assessing an agent RESPONSE" in body:
        answer = body.split("give the reason for your evaluation:\n'", 1)[1].split("'\nExpectations:", 1)[0]
        if "465460.3" in answer:
            return json.dumps({"correctness_degree": 8, "reason": "close to the expected 465 km"})
        return json.dumps({"correctness_degree": 2, "reason": "the distance is far from 465 km"})
    raise AssertionError(f"paris/lyon script got an unexpected request: {body[:120]!r}")


_LOOKUP_TEMPLATES = [
    "What do you know about [A] in [B]?",
    "Who is [A] compared to [B]?",
    "Is [A] better than [B]?",
]

_LOOKUP_INFILLS = {
    _LOOKUP_TEMPLATES[0]: {"A": ["history", "the past", "old times"],
                           "B": ["Paris", "the city of Paris"]},
    _LOOKUP_TEMPLATES[1]: {"A": ["Ada Lovelace", "Lady Lovelace", "Ada King"],
                           "B": ["Babbage", "Charles Babbage"]},
    _LOOKUP_TEMPLATES[2]: {"A": ["green tea", "sencha tea", "matcha tea"],
                           "B": ["coffee", "espresso"]},
}


def lookup_script(request: ChatRequest) -> str:
    """Scripted model covering the whole correctness pipeline for the
    lookup tool; the oracle always passes, so nothing is flagged."""
    if _is_agent_request(request):
        query = _agent_query(request)
        if _agent_steps(request) > 0:
            return "FINAL: " + _last_observation(request)
        return f"ACTION: lookup {json.dumps({'topic': query})}"

    body = request.messages[-1][1]
    if "Can you generate template questions" in body:
        return json.dumps({"templates": _LOOKUP_TEMPLATES})
    if "generate appropriate template input values" in body:
        template = body.split("for the given template:\n\n'", 1)[1].split("'\n", 1)[0]
        return json.dumps({"infills": _LOOKUP_INFILLS[template]})
    if "You are emulating the following tool" in body:
        return json.dumps({"answers": ["It is commonly known."]})
    if "You have the following sentences" in body:
        return json.dumps({"expectation": "It is commonly known."})
    if "You are assessing an agent RESPONSE" in body:
        return json.dumps({"correctness_degree": 9, "reason": "consistent with expectation"})
    raise AssertionError(f"lookup script got an unexpected request: {body[:120]!r}")


def bench_script(request: ChatRequest) -> str:
    """Scripted benchmark agent: solves exactly four known tasks."""
    if not _is_agent_request(request):
        raise AssertionError("bench script only plays the agent role")
    query = _agent_query(request)
    if _agent_steps(request) > 0:
        return "FINAL: done"
    if "track01.wav into the masters" in query:
        return 'ACTION: move_file {"source": "track01.wav", "destination": "masters/track01.wav"}'
    if "Delete old_mix.wav" in query:
        return 'ACTION: delete_file {"path": "old_mix.wav"}'
    if "content is exactly: Session complete" in query:
        return 'ACTION: write_file {"path": "notes.txt", "content": "Session complete"}'
    if "Copy setlist.txt to backup/setlist.txt" in query:
        return 'ACTION: copy_file {"source": "setlist.txt", "destination": "backup/setlist.txt"}'
    return "FINAL: I cannot do this task."


def scripted_gateway(fn) -> Gateway:
    return Gateway(ScriptedBackend(fn))


# --- fixtures ----------------------------------------------------------------


@pytest.fixture()
def runtime_registry() -> ToolRegistry:
    return ToolRegistry(RUNTIME_SUITE)


@pytest.fixture()
def runtime_gateway() -> Gateway:
    return scripted_gateway(runtime_script)


@pytest.fixture()
def map_registry() -> ToolRegistry:
    return ToolRegistry([MAP_TOOL])


@pytest.fixture()
def lookup_registry() -> ToolRegistry:
    return ToolRegistry([LOOKUP_TOOL])


def write_manifest(path, registry: ToolRegistry) -> None:
    path.write_text(json.dumps(registry.to_manifest(), indent=2, sort_keys=True), encoding="utf-8")
