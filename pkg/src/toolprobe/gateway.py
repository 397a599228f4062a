"""Single abstraction over chat-completion backends.

Three backends share one contract: a live HTTPS endpoint, a
deterministic replay store (cassettes), and record mode which wraps any
live-ish backend and persists every exchange. Cassette entries are keyed
by a content digest of the request, not by sequence number, so
concurrent pipelines replay correctly.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import httpx

ROLES = ("system", "user", "assistant")


class GatewayError(RuntimeError):
    pass


class ReplayMissError(GatewayError):
    def __init__(self, key: str, summary: str):
        super().__init__(f"no recorded response for key {key} ({summary})")
        self.key = key


class StructuredParseError(GatewayError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    model_id: str = "default"
    temperature: float = 0.0
    format_instructions: str | None = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        for role, _content in self.messages:
            if role not in ROLES:
                raise ValueError(f"unknown role {role!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")

    def final_messages(self) -> list[tuple[str, str]]:
        """Messages as sent: format instructions are appended to the last user message."""
        messages = list(self.messages)
        if self.format_instructions:
            for i in range(len(messages) - 1, -1, -1):
                if messages[i][0] == "user":
                    role, content = messages[i]
                    messages[i] = (role, content.rstrip() + "\n" + self.format_instructions)
                    break
        return messages

    def summary(self) -> str:
        last = self.messages[-1][1]
        return (last[:120] + "...") if len(last) > 120 else last


def cassette_key(request: ChatRequest) -> str:
    """Stable content digest of a request; insensitive to construction order."""
    payload = {
        "model": request.model_id,
        "temperature": f"{request.temperature:.4f}",
        "messages": [[role, content] for role, content in request.final_messages()],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# --- backends ----------------------------------------------------------------


class ScriptedBackend:
    """Deterministic in-process backend driven by a callable; acts as "live"
    for tests and for building replay cassettes."""

    def __init__(self, fn: Callable[[ChatRequest], str]):
        self._fn = fn

    def complete(self, request: ChatRequest) -> str:
        return self._fn(request)


class HTTPBackend:
    """OpenAI-style chat completion endpoint."""

    def __init__(self, base_url: str | None = None, api_key_env: str = "TOOLPROBE_API_KEY", timeout: float = 60.0):
        self.base_url = (base_url or os.environ.get("TOOLPROBE_BASE_URL", "")).rstrip("/")
        if not self.base_url:
            raise GatewayError("live mode needs a base URL (flag or TOOLPROBE_BASE_URL)")
        self.api_key = os.environ.get(api_key_env, "")
        self.timeout = timeout

    def complete(self, request: ChatRequest) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": [{"role": r, "content": c} for r, c in request.final_messages()],
        }
        try:
            response = httpx.post(f"{self.base_url}/chat/completions", json=body, headers=headers, timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise GatewayError(f"completion timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise GatewayError(f"completion transport failure: {exc}") from exc
        if response.status_code >= 400:
            raise GatewayError(f"completion failed with HTTP {response.status_code}: {response.text[:300]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise GatewayError(f"unexpected completion response shape: {exc}") from exc


class Cassette:
    """Append-only store of request-digest -> response entries (JSONL)."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._path = self.directory / "cassette.jsonl"
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        for file in sorted(self.directory.glob("*.jsonl")):
            for line in file.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                entry = json.loads(line)
                self._entries[entry["key"]] = entry["response"]

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def put(self, key: str, summary: str, response: str) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = response
            with self._path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps({"key": key, "request_summary": summary, "response": response}, ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        return len(self._entries)


class ReplayBackend:
    def __init__(self, cassette: Cassette):
        self.cassette = cassette

    def complete(self, request: ChatRequest) -> str:
        key = cassette_key(request)
        response = self.cassette.get(key)
        if response is None:
            raise ReplayMissError(key, request.summary())
        return response


class RecordBackend:
    def __init__(self, inner, cassette: Cassette):
        self.inner = inner
        self.cassette = cassette

    def complete(self, request: ChatRequest) -> str:
        key = cassette_key(request)
        cached = self.cassette.get(key)
        if cached is not None:
            return cached
        response = self.inner.complete(request)
        self.cassette.put(key, request.summary(), response)
        return response


# --- gateway facade ----------------------------------------------------------

_BRACE_RE = re.compile(r"[{\[]")

_RETRY_SUFFIX = (
    "Your previous reply could not be parsed as JSON. "
    "Reply again with ONLY a valid JSON object, no prose."
)


class Gateway:
    def __init__(self, backend, model_id: str = "default"):
        self.backend = backend
        self.model_id = model_id

    def complete(self, request: ChatRequest) -> str:
        if request.model_id == "default" and self.model_id != "default":
            request = replace(request, model_id=self.model_id)
        return self.backend.complete(request)

    def complete_structured(self, request: ChatRequest, expected_fields: Sequence[str]) -> dict:
        """Complete and parse the reply as a JSON object with the given fields.

        Prose around the JSON block is tolerated (first/last brace scan).
        One corrective retry on parse failure.
        """
        if not request.format_instructions:
            raise ValueError("complete_structured requires format_instructions")
        text = self.complete(request)
        parsed = _extract_json(text, expected_fields)
        if parsed is not None:
            return parsed
        retry = replace(
            request,
            messages=request.messages + (("assistant", text), ("user", _RETRY_SUFFIX)),
        )
        text = self.complete(retry)
        parsed = _extract_json(text, expected_fields)
        if parsed is None:
            raise StructuredParseError(f"completion is not parseable as JSON after retry: {text[:200]!r}")
        return parsed


def _extract_json(text: str, expected_fields: Sequence[str]) -> dict | None:
    first = text.find("{")
    last = text.rfind("}")
    if first == -1 or last <= first:
        return None
    try:
        value = json.loads(text[first:last + 1])
    except ValueError:
        return None
    if not isinstance(value, dict):
        return None
    if any(field not in value for field in expected_fields):
        return None
    return value


def format_instructions_for(fields: dict[str, str]) -> str:
    """Render the JSON-shape instruction appended to prompts."""
    shape = ", ".join(f'"{name}": {desc}' for name, desc in fields.items())
    return "Respond with a JSON object of the shape {" + shape + "}."


def open_gateway(mode: str, cassette_dir: str | Path, model_id: str = "default",
                 base_url: str | None = None, scripted: Callable[[ChatRequest], str] | None = None) -> Gateway:
    """Build a gateway for one of the CLI modes: live | record | replay.

    ``scripted`` substitutes for the live endpoint (used by tests and
    cassette construction)."""
    if mode == "replay":
        cassette = Cassette(cassette_dir)
        if len(cassette) == 0:
            raise GatewayError(f"replay mode requires existing cassettes in {cassette_dir}")
        return Gateway(ReplayBackend(cassette), model_id)
    live = ScriptedBackend(scripted) if scripted is not None else HTTPBackend(base_url=base_url)
    if mode == "record":
        return Gateway(RecordBackend(live, Cassette(cassette_dir)), model_id)
    if mode == "live":
        return Gateway(live, model_id)
    raise GatewayError(f"unknown gateway mode {mode!r}")
