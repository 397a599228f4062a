"""File-management benchmark: sandboxed fixtures, agent runs, tree-diff grading.

Each task materializes a fixture tree under a fresh temp root, runs the
agent with file tools rooted at that sandbox, and passes only when the
content-digest diff between initial and final trees equals the task's
expected diff exactly.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
import tempfile
import uuid
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .agent import AgentTrace, run_agent
from .gateway import Gateway
from .tools import AdapterRef, ArgSpec, ToolRegistry, ToolSpec, register_inprocess

log = logging.getLogger(__name__)

SPLITS = ("train", "test")
CHANGES = ("added", "removed", "modified")


class SandboxEscapeError(RuntimeError):
    """A tool call tried to reach outside the sandbox root."""


class TaskError(ValueError):
    pass


def _digest(content: str) -> str:
    return hashlib.sha256(content.encode("utf-8")).hexdigest()


def _check_relative(path: str) -> None:
    p = Path(path)
    if p.is_absolute() or any(part in ("..", "") for part in p.parts):
        raise TaskError(f"task paths must be relative without traversal: {path!r}")


@dataclass(frozen=True)
class ExpectedChange:
    path: str
    change: str
    digest: str = ""

    def __post_init__(self):
        _check_relative(self.path)
        if self.change not in CHANGES:
            raise TaskError(f"unknown change kind {self.change!r}")
        if self.change in ("added", "modified") and not self.digest:
            raise TaskError(f"{self.change} change for {self.path!r} needs a content digest")


@dataclass(frozen=True)
class BenchTask:
    id: str
    split: str
    prompt: str
    fixture: dict[str, str]  # relative path -> content
    expected_diff: tuple[ExpectedChange, ...]

    def __post_init__(self):
        if self.split not in SPLITS:
            raise TaskError(f"unknown split {self.split!r}")
        for path in self.fixture:
            _check_relative(path)


@dataclass(frozen=True)
class PassRateReport:
    passed: int
    total: int

    @property
    def rate(self) -> float:
        return self.passed / self.total if self.total else 0.0


@dataclass
class Sandbox:
    root: Path
    snapshot: dict[str, str]

    def cleanup(self) -> None:
        shutil.rmtree(self.root, ignore_errors=True)


def snapshot_tree(root: Path) -> dict[str, str]:
    """Map of relative path -> content digest for every file under root."""
    snapshot: dict[str, str] = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            snapshot[path.relative_to(root).as_posix()] = hashlib.sha256(path.read_bytes()).hexdigest()
    return snapshot


def materialize_env(task: BenchTask, base_dir: str | Path | None = None) -> Sandbox:
    root = Path(tempfile.mkdtemp(prefix=f"bench-{task.id}-", dir=base_dir))
    for rel, content in task.fixture.items():
        target = root / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, encoding="utf-8")
    return Sandbox(root=root, snapshot=snapshot_tree(root))


# --- sandboxed file tools ----------------------------------------------------


def _resolve(root: Path, rel: str) -> Path:
    candidate = (root / rel).resolve()
    root_resolved = root.resolve()
    if candidate != root_resolved and root_resolved not in candidate.parents:
        raise SandboxEscapeError(f"path escapes the sandbox: {rel!r}")
    return candidate


def build_file_registry(root: Path) -> ToolRegistry:
    """File tools rooted at a sandbox; every path is resolved inside it and
    escapes are rejected by the adapter."""

    def read_file(path: str) -> str:
        return _resolve(root, path).read_text(encoding="utf-8")

    def write_file(path: str, content: str) -> str:
        target = _resolve(root, path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(content, encoding="utf-8")
        return f"wrote {path}"

    def move_file(source: str, destination: str) -> str:
        src = _resolve(root, source)
        dst = _resolve(root, destination)
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.move(str(src), str(dst))
        return f"moved {source} to {destination}"

    def copy_file(source: str, destination: str) -> str:
        src = _resolve(root, source)
        dst = _resolve(root, destination)
        dst.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(str(src), str(dst))
        return f"copied {source} to {destination}"

    def delete_file(path: str) -> str:
        _resolve(root, path).unlink()
        return f"deleted {path}"

    def list_directory(path: str) -> str:
        target = _resolve(root, path)
        return "\n".join(sorted(p.name + ("/" if p.is_dir() else "") for p in target.iterdir()))

    tag = uuid.uuid4().hex
    functions = {
        "read_file": (read_file, "Read a file and return its text content.", [("path", "relative file path")]),
        "write_file": (write_file, "Write text content to a file, creating parent directories.",
                       [("path", "relative file path"), ("content", "text to write")]),
        "move_file": (move_file, "Move or rename a file.",
                      [("source", "relative source path"), ("destination", "relative destination path")]),
        "copy_file": (copy_file, "Copy a file.",
                      [("source", "relative source path"), ("destination", "relative destination path")]),
        "delete_file": (delete_file, "Delete a file.", [("path", "relative file path")]),
        "list_directory": (list_directory, "List the entries of a directory ('.' for the root).",
                           [("path", "relative directory path")]),
    }
    specs = []
    for name, (fn, doc, args) in functions.items():
        target = f"bench:{tag}:{name}"
        register_inprocess(target, fn)
        specs.append(ToolSpec(
            name=name,
            documentation=doc,
            args=tuple(ArgSpec(name=arg, kind="text", description=desc) for arg, desc in args),
            adapter=AdapterRef(type="inprocess", target=target),
            category="file-operations",
        ))
    return ToolRegistry(specs)


# --- running and grading -----------------------------------------------------


def run_task(task: BenchTask, sandbox: Sandbox, gateway: Gateway,
             max_steps: int = 8) -> AgentTrace:
    """Run the agent on a task inside its sandbox; agent or gateway errors
    count as a failed task, never a harness crash."""
    registry = build_file_registry(sandbox.root)
    try:
        return run_agent(task.prompt, registry, gateway, max_steps=max_steps)
    except Exception as exc:  # noqa: BLE001 - graded as failure
        log.warning("task %s aborted: %s", task.id, exc)
        return AgentTrace(task.prompt, (), "", "refusal")


def observed_diff(initial: dict[str, str], final: dict[str, str]) -> list[ExpectedChange]:
    changes: list[ExpectedChange] = []
    for path in sorted(set(initial) | set(final)):
        if path not in final:
            changes.append(ExpectedChange(path=path, change="removed"))
        elif path not in initial:
            changes.append(ExpectedChange(path=path, change="added", digest=final[path]))
        elif initial[path] != final[path]:
            changes.append(ExpectedChange(path=path, change="modified", digest=final[path]))
    return changes


def validate_task(task: BenchTask, initial_snapshot: dict[str, str], root: Path) -> tuple[bool, list[ExpectedChange]]:
    """Exact-diff grading: stray changes fail the task."""
    final = snapshot_tree(root)
    observed = observed_diff(initial_snapshot, final)
    expected = sorted(task.expected_diff, key=lambda c: c.path)
    return observed == expected, observed


def compute_pass_rate(results: list[tuple[BenchTask, bool]], split: str | None = None) -> PassRateReport:
    matching = [(task, ok) for task, ok in results if split is None or task.split == split]
    if not matching:
        log.warning("no benchmark results match split %r; pass rate defined as 0", split)
        return PassRateReport(passed=0, total=0)
    return PassRateReport(passed=sum(1 for _, ok in matching if ok), total=len(matching))


# --- task files --------------------------------------------------------------


def _task_from_dict(entry: dict) -> BenchTask:
    expected = []
    for change in entry.get("expected_diff", ()):
        digest = change.get("digest", "")
        if not digest and "content" in change:
            digest = _digest(change["content"])
        expected.append(ExpectedChange(path=change["path"], change=change["change"], digest=digest))
    return BenchTask(
        id=str(entry["id"]),
        split=entry["split"],
        prompt=entry["prompt"],
        fixture=dict(entry.get("fixture", {})),
        expected_diff=tuple(expected),
    )


def load_tasks(path: str | Path) -> list[BenchTask]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [_task_from_dict(entry) for entry in data["tasks"]]


def load_mini_suite() -> list[BenchTask]:
    """The bundled 13-task benchmark across three fixture domains."""
    data = json.loads((resources.files("toolprobe") / "benchtasks" / "mini_suite.json").read_text(encoding="utf-8"))
    return [_task_from_dict(entry) for entry in data["tasks"]]


def run_suite(tasks: list[BenchTask], gateway: Gateway, base_dir: str | Path | None = None,
              max_steps: int = 8) -> list[tuple[BenchTask, bool, list[ExpectedChange]]]:
    results = []
    for task in tasks:
        sandbox = materialize_env(task, base_dir)
        try:
            run_task(task, sandbox, gateway, max_steps=max_steps)
            passed, diff = validate_task(task, sandbox.snapshot, sandbox.root)
            results.append((task, passed, diff))
        finally:
            sandbox.cleanup()
    return results
