"""Tool specifications, manifests, and uniform invocation.

A tool is described by a :class:`ToolSpec` (documentation, argument
schemas with syntax/semantic constraints) and reached through one of
three adapters: an in-process callable registry, a line-delimited stdio
subprocess bridge, or a plain HTTP POST endpoint.
"""

from __future__ import annotations

import json
import os
import re
import subprocess
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable

import httpx

ARG_KINDS = ("text", "integer", "real", "boolean", "list-of-text", "enum")
SEMANTIC_KINDS = ("none", "address", "person-name", "city", "date", "url", "free-text")
CONSTRAINT_KINDS = ("required-prefix", "max-length", "format", "split-token", "pattern")
FORMAT_NAMES = ("json", "csv", "url")
ADAPTER_TYPES = ("inprocess", "subprocess", "http")


class ManifestError(ValueError):
    """Raised for malformed or invalid tool manifests."""


class AdapterError(RuntimeError):
    """Raised for adapter configuration problems (not tool-side failures)."""


@dataclass(frozen=True)
class SyntaxConstraint:
    """One syntactic requirement on an argument value.

    kind selects the variant; ``text`` carries the prefix / format name /
    split token / regex, ``count`` the max length or expected part count.
    """

    kind: str
    text: str = ""
    count: int = 0

    def validate(self) -> None:
        if self.kind not in CONSTRAINT_KINDS:
            raise ManifestError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "required-prefix" and not self.text:
            raise ManifestError("required-prefix constraint needs non-empty text")
        if self.kind == "max-length" and self.count <= 0:
            raise ManifestError("max-length constraint needs a positive count")
        if self.kind == "format" and self.text not in FORMAT_NAMES:
            raise ManifestError(f"format constraint must be one of {FORMAT_NAMES}")
        if self.kind == "split-token" and (not self.text or self.count <= 0):
            raise ManifestError("split-token constraint needs text and a positive part count")
        if self.kind == "pattern":
            if not self.text:
                raise ManifestError("pattern constraint needs a regular expression")
            try:
                re.compile(self.text)
            except re.error as exc:
                raise ManifestError(f"bad pattern {self.text!r}: {exc}") from exc

    def satisfied_by(self, value: Any) -> bool:
        """Evaluate this constraint directly against a value."""
        text = value if isinstance(value, str) else json.dumps(value)
        if self.kind == "required-prefix":
            return text.startswith(self.text)
        if self.kind == "max-length":
            return len(text) <= self.count
        if self.kind == "format":
            return _matches_format(self.text, text)
        if self.kind == "split-token":
            return len(text.split(self.text)) == self.count
        if self.kind == "pattern":
            return re.fullmatch(self.text, text) is not None
        raise ManifestError(f"unknown constraint kind {self.kind!r}")


def _matches_format(name: str, text: str) -> bool:
    if name == "json":
        try:
            json.loads(text)
            return True
        except ValueError:
            return False
    if name == "csv":
        return "," in text and "\n" not in text.strip()
    if name == "url":
        return re.match(r"https?://[^\s]+\.[^\s]+", text) is not None
    return False


@dataclass(frozen=True)
class ArgSpec:
    """Schema of a single tool argument."""

    name: str
    kind: str
    description: str = ""
    enum_values: tuple[str, ...] = ()
    syntax_constraints: tuple[SyntaxConstraint, ...] = ()
    semantic_kind: str = "none"

    def validate(self) -> None:
        if not self.name:
            raise ManifestError("argument name must be non-empty")
        if self.kind not in ARG_KINDS:
            raise ManifestError(f"argument {self.name!r}: unknown kind {self.kind!r}")
        if (self.kind == "enum") != bool(self.enum_values):
            raise ManifestError(f"argument {self.name!r}: enum_values required iff kind=enum")
        if self.semantic_kind not in SEMANTIC_KINDS:
            raise ManifestError(f"argument {self.name!r}: unknown semantic kind {self.semantic_kind!r}")
        for constraint in self.syntax_constraints:
            constraint.validate()


@dataclass(frozen=True)
class AdapterRef:
    """How to reach a tool: in-process callable, stdio bridge, or HTTP endpoint."""

    type: str
    target: str

    def validate(self) -> None:
        if self.type not in ADAPTER_TYPES:
            raise ManifestError(f"unknown adapter type {self.type!r}")
        if not self.target:
            raise ManifestError("adapter target must be non-empty")


@dataclass(frozen=True)
class ToolSpec:
    """A tool's identity, documentation, argument schemas, and adapter."""

    name: str
    documentation: str
    args: tuple[ArgSpec, ...]
    adapter: AdapterRef
    source_text: str | None = None
    category: str | None = None

    def validate(self) -> None:
        if not self.name:
            raise ManifestError("tool name must be non-empty")
        if not self.documentation:
            raise ManifestError(f"tool {self.name!r}: documentation must be non-empty")
        self.adapter.validate()
        seen: set[str] = set()
        for arg in self.args:
            arg.validate()
            if arg.name in seen:
                raise ManifestError(f"tool {self.name!r}: duplicate argument {arg.name!r}")
            seen.add(arg.name)

    def arg(self, name: str) -> ArgSpec:
        for arg in self.args:
            if arg.name == name:
                return arg
        raise KeyError(name)

    def arg_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.args)


@dataclass(frozen=True)
class ToolInvocation:
    """One planned tool call inside an agent trace."""

    tool_name: str
    args: dict[str, Any]
    ordinal: int = 0


@dataclass(frozen=True)
class ToolOutcome:
    """Result of a tool invocation: success text or a runtime error."""

    ok: bool
    output: str = ""
    error_class: str = ""
    message: str = ""

    @staticmethod
    def success(output: str) -> "ToolOutcome":
        return ToolOutcome(ok=True, output=output)

    @staticmethod
    def error(error_class: str, message: str) -> "ToolOutcome":
        if not error_class:
            raise ValueError("error_class must be non-empty")
        return ToolOutcome(ok=False, error_class=error_class, message=message)

    def render(self) -> str:
        if self.ok:
            return self.output
        return f"<class '{self.error_class}'> {self.message}"


# --- in-process tool functions ---------------------------------------------

_INPROCESS: dict[str, Callable[..., str]] = {}


def register_inprocess(name: str, fn: Callable[..., str]) -> None:
    """Register a callable reachable via an ``inprocess`` adapter target."""
    _INPROCESS[name] = fn


def inprocess_function(target: str) -> Callable[..., str]:
    try:
        return _INPROCESS[target]
    except KeyError:
        raise AdapterError(f"no in-process tool registered under {target!r}") from None


# --- subprocess bridge adapter ----------------------------------------------


class BridgeClient:
    """Client side of the line-delimited stdio bridge protocol.

    Requests are JSON objects ``{"id", "op", "tool", "args"}``, one per
    line; each gets exactly one response line. Access to the subprocess
    is serialized.
    """

    def __init__(self, command: str):
        self.command = command
        self._lock = threading.Lock()
        self._proc: subprocess.Popen | None = None
        self._next_id = 0

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                shell=True,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
            )
        return self._proc

    def request(self, op: str, tool: str = "", args: dict | None = None) -> dict:
        with self._lock:
            proc = self._ensure()
            self._next_id += 1
            message = {"id": self._next_id, "op": op}
            if tool:
                message["tool"] = tool
            if args is not None:
                message["args"] = args
            try:
                assert proc.stdin is not None and proc.stdout is not None
                proc.stdin.write(json.dumps(message) + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError, ValueError) as exc:
                raise AdapterError(f"bridge transport failed: {exc}") from exc
            if not line:
                raise AdapterError("bridge process closed its output before replying")
            try:
                return json.loads(line)
            except ValueError as exc:
                raise AdapterError(f"bridge sent a non-JSON line: {line!r}") from exc

    def close(self) -> None:
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                self._proc.terminate()
                try:
                    self._proc.wait(timeout=5)
                except subprocess.TimeoutExpired:
                    self._proc.kill()
            self._proc = None


_BRIDGES: dict[str, BridgeClient] = {}
_BRIDGES_LOCK = threading.Lock()


def bridge_client(command: str) -> BridgeClient:
    with _BRIDGES_LOCK:
        client = _BRIDGES.get(command)
        if client is None:
            client = BridgeClient(command)
            _BRIDGES[command] = client
        return client


def close_bridges() -> None:
    with _BRIDGES_LOCK:
        for client in _BRIDGES.values():
            client.close()
        _BRIDGES.clear()


# --- invocation --------------------------------------------------------------


def invoke_tool(spec: ToolSpec, args: dict[str, Any], timeout: float = 30.0) -> ToolOutcome:
    """Invoke a tool through its adapter.

    Tool-side failures come back as error outcomes; only adapter
    misconfiguration raises. Transport problems get the dedicated
    ``TransportError`` class so they can be filtered from real findings.
    """
    unknown = set(args) - set(spec.arg_names())
    if unknown:
        raise ValueError(f"unknown arguments for {spec.name}: {sorted(unknown)}")

    if spec.adapter.type == "inprocess":
        fn = inprocess_function(spec.adapter.target)
        try:
            result = fn(**args)
        except Exception as exc:  # noqa: BLE001 - tool-side failures become outcomes
            return ToolOutcome.error(type(exc).__name__, str(exc))
        return ToolOutcome.success(result if isinstance(result, str) else json.dumps(result))

    if spec.adapter.type == "subprocess":
        client = bridge_client(spec.adapter.target)
        try:
            response = client.request("call", tool=spec.name, args=args)
        except AdapterError as exc:
            return ToolOutcome.error("TransportError", str(exc))
        if response.get("ok"):
            return ToolOutcome.success(str(response.get("output", "")))
        error = response.get("error") or {}
        return ToolOutcome.error(error.get("class") or "TransportError", error.get("message", ""))

    if spec.adapter.type == "http":
        headers = {}
        token = os.environ.get("TOOLPROBE_TOOL_TOKEN")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = httpx.post(spec.adapter.target, json={"tool": spec.name, "args": args}, headers=headers, timeout=timeout)
        except httpx.HTTPError as exc:
            return ToolOutcome.error("TransportError", str(exc))
        if response.status_code >= 400:
            return ToolOutcome.error("HTTPError", f"{response.status_code} {response.text[:500]}")
        body = response.json()
        if body.get("ok", True):
            return ToolOutcome.success(str(body.get("output", "")))
        error = body.get("error") or {}
        return ToolOutcome.error(error.get("class") or "HTTPError", error.get("message", ""))

    raise AdapterError(f"unknown adapter type {spec.adapter.type!r}")


# --- registry and manifest ---------------------------------------------------


class ToolRegistry:
    """Immutable set of validated tool specs, unique by name."""

    def __init__(self, specs: Iterable[ToolSpec]):
        self._specs: dict[str, ToolSpec] = {}
        for spec in specs:
            spec.validate()
            if spec.name in self._specs:
                raise ManifestError(f"duplicate tool name {spec.name!r}")
            self._specs[spec.name] = spec

    def __len__(self) -> int:
        return len(self._specs)

    def __iter__(self):
        return iter(self._specs.values())

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def get(self, name: str) -> ToolSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise KeyError(f"no tool named {name!r}") from None

    def names(self) -> list[str]:
        return list(self._specs)

    def with_documentation(self, name: str, documentation: str) -> "ToolRegistry":
        """Return a new registry with one tool's documentation replaced."""
        specs = [replace(s, documentation=documentation) if s.name == name else s for s in self]
        return ToolRegistry(specs)

    def to_manifest(self) -> dict:
        return {"tools": [_spec_to_entry(spec) for spec in self]}


def _constraint_to_entry(constraint: SyntaxConstraint) -> dict:
    entry: dict[str, Any] = {"kind": constraint.kind}
    if constraint.text:
        entry["text"] = constraint.text
    if constraint.count:
        entry["count"] = constraint.count
    return entry


def _spec_to_entry(spec: ToolSpec) -> dict:
    entry: dict[str, Any] = {
        "name": spec.name,
        "documentation": spec.documentation,
        "args": [
            {
                "name": arg.name,
                "kind": arg.kind,
                "description": arg.description,
                **({"enum_values": list(arg.enum_values)} if arg.enum_values else {}),
                "syntax_constraints": [_constraint_to_entry(c) for c in arg.syntax_constraints],
                "semantic_kind": arg.semantic_kind,
            }
            for arg in spec.args
        ],
        "adapter": {"type": spec.adapter.type, "target": spec.adapter.target},
    }
    if spec.source_text is not None:
        entry["source_text"] = spec.source_text
    if spec.category is not None:
        entry["category"] = spec.category
    return entry


def _entry_to_spec(entry: dict) -> ToolSpec:
    if not isinstance(entry, dict):
        raise ManifestError("tool entries must be objects")
    try:
        adapter_entry = entry["adapter"]
        args = tuple(
            ArgSpec(
                name=a["name"],
                kind=a["kind"],
                description=a.get("description", ""),
                enum_values=tuple(a.get("enum_values") or ()),
                syntax_constraints=tuple(
                    SyntaxConstraint(kind=c["kind"], text=c.get("text", ""), count=int(c.get("count", 0)))
                    for c in a.get("syntax_constraints", ())
                ),
                semantic_kind=a.get("semantic_kind", "none"),
            )
            for a in entry.get("args", ())
        )
        return ToolSpec(
            name=entry["name"],
            documentation=entry["documentation"],
            args=args,
            adapter=AdapterRef(type=adapter_entry["type"], target=adapter_entry["target"]),
            source_text=entry.get("source_text"),
            category=entry.get("category"),
        )
    except KeyError as exc:
        raise ManifestError(f"tool entry missing required field {exc}") from exc


def registry_from_dict(manifest: dict) -> ToolRegistry:
    tools = manifest.get("tools")
    if not isinstance(tools, list):
        raise ManifestError('manifest must have a top-level "tools" array')
    return ToolRegistry(_entry_to_spec(entry) for entry in tools)


def load_and_validate(manifest_path: str | Path) -> ToolRegistry:
    """Load a JSON tool manifest and validate every invariant."""
    path = Path(manifest_path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ManifestError(f"cannot parse manifest {path}: {exc}") from exc
    return registry_from_dict(manifest)


def render_tool_prompt(spec: ToolSpec) -> str:
    """Deterministic text describing one tool for the agent prompt."""
    lines = [f"Tool: {spec.name}", f"Description: {spec.documentation}"]
    if spec.args:
        lines.append("Arguments:")
        for arg in spec.args:
            detail = f"  - {arg.name} ({arg.kind})"
            if arg.description:
                detail += f": {arg.description}"
            if arg.enum_values:
                detail += f" [one of: {', '.join(arg.enum_values)}]"
            lines.append(detail)
    return "\n".join(lines)
