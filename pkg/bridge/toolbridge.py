"""Stdio bridge exposing Python callables as agent tools.

Speaks a UTF-8 line-delimited JSON protocol on stdin/stdout: requests are
``{"id", "op": "describe"|"call", "tool", "args"}`` and every well-formed
request gets exactly one response line, either ``{"id", "ok": true,
"output": ...}`` or ``{"id", "ok": false, "error": {"class", "message"}}``.
Tool exceptions are serialized with their original class names; the bridge
never terminates on a tool exception. stderr is reserved for logs.

One tool module per process. The module may export an explicit ``TOOLS``
mapping of name -> callable; otherwise every public callable defined in
the module is exposed. Objects with ``name``/``description`` attributes
and a ``run`` or ``func`` callable (LangChain-style) are also accepted.

Standard library only.
"""

from __future__ import annotations

import argparse
import importlib
import importlib.util
import inspect
import json
import sys
import typing

_KIND_BY_TYPE = {
    str: "text",
    int: "integer",
    float: "real",
    bool: "boolean",
    list: "list-of-text",
}


class UnknownToolError(Exception):
    pass


def _load_module(spec_text: str):
    """Import a tool module given a file path or a dotted import path."""
    if spec_text.endswith(".py"):
        module_spec = importlib.util.spec_from_file_location("bridged_tools", spec_text)
        if module_spec is None or module_spec.loader is None:
            raise ImportError(f"cannot load module from {spec_text!r}")
        module = importlib.util.module_from_spec(module_spec)
        module_spec.loader.exec_module(module)
        return module
    return importlib.import_module(spec_text)


def _unwrap(obj):
    """Return (callable, name, documentation) for a plain or tool-style object."""
    if callable(obj) and not inspect.isclass(obj):
        return obj, getattr(obj, "__name__", "tool"), inspect.getdoc(obj) or ""
    runner = getattr(obj, "run", None) or getattr(obj, "func", None)
    if runner is not None and callable(runner):
        name = getattr(obj, "name", type(obj).__name__)
        documentation = getattr(obj, "description", "") or inspect.getdoc(obj) or ""
        return runner, str(name), str(documentation)
    return None, "", ""


def collect_tools(module) -> dict[str, tuple]:
    """Map of tool name -> (callable, documentation)."""
    exported = getattr(module, "TOOLS", None)
    if exported is not None:
        candidates = list(exported.items())
    else:
        candidates = [
            (name, obj) for name, obj in vars(module).items()
            if not name.startswith("_") and getattr(obj, "__module__", None) == module.__name__
        ]
    tools: dict[str, tuple] = {}
    for name, obj in candidates:
        fn, detected_name, documentation = _unwrap(obj)
        if fn is None:
            continue
        tools[name if exported is not None else detected_name] = (fn, documentation)
    return tools


def _arg_kind(annotation) -> tuple[str, bool]:
    """Map a type annotation to a wire kind; (kind, warning) where warning
    flags an unknown or missing annotation defaulted to text."""
    if annotation is inspect.Parameter.empty:
        return "text", True
    origin = typing.get_origin(annotation)
    if origin is list:
        return "list-of-text", False
    kind = _KIND_BY_TYPE.get(annotation)
    if kind is None:
        return "text", True
    return kind, False


def describe_tools(tools: dict[str, tuple]) -> list[dict]:
    descriptors = []
    for name in sorted(tools):
        fn, documentation = tools[name]
        args = []
        try:
            signature = inspect.signature(fn)
        except (TypeError, ValueError):
            signature = None
        if signature is not None:
            for param in signature.parameters.values():
                if param.kind in (inspect.Parameter.VAR_POSITIONAL, inspect.Parameter.VAR_KEYWORD):
                    continue
                kind, warning = _arg_kind(param.annotation)
                descriptor = {"name": param.name, "kind": kind}
                if warning:
                    descriptor["warning"] = "no usable annotation; defaulted to text"
                args.append(descriptor)
        descriptors.append({"name": name, "documentation": documentation, "args": args})
    return descriptors


def call_tool(tools: dict[str, tuple], name: str, args: dict) -> str:
    if name not in tools:
        raise UnknownToolError(f"no tool named {name!r}")
    fn, _ = tools[name]
    result = fn(**args)
    return result if isinstance(result, str) else json.dumps(result)


def handle_line(line: str, tools: dict[str, tuple]) -> dict:
    try:
        message = json.loads(line)
        if not isinstance(message, dict):
            raise ValueError("request must be a JSON object")
    except ValueError as exc:
        return {"id": None, "ok": False,
                "error": {"class": "ProtocolError", "message": f"malformed request line: {exc}"}}
    request_id = message.get("id")
    op = message.get("op")
    try:
        if op == "describe":
            return {"id": request_id, "ok": True, "output": describe_tools(tools)}
        if op == "call":
            args = message.get("args") or {}
            if not isinstance(args, dict):
                raise TypeError("args must be an object")
            output = call_tool(tools, message.get("tool", ""), args)
            return {"id": request_id, "ok": True, "output": output}
        return {"id": request_id, "ok": False,
                "error": {"class": "ProtocolError", "message": f"unknown op {op!r}"}}
    except Exception as exc:  # noqa: BLE001 - serialized with original class name
        return {"id": request_id, "ok": False,
                "error": {"class": type(exc).__name__, "message": str(exc)}}


def serve(module_spec: str, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    try:
        module = _load_module(module_spec)
        tools = collect_tools(module)
    except Exception as exc:  # noqa: BLE001 - fatal startup condition
        print(f"fatal: cannot import tool module {module_spec!r}: {exc}", file=sys.stderr)
        return 1
    if not tools:
        print(f"fatal: tool module {module_spec!r} exposes no callables", file=sys.stderr)
        return 1
    for line in stdin:
        if not line.strip():
            continue
        response = handle_line(line, tools)
        stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        stdout.flush()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="stdio tool bridge")
    parser.add_argument("--module", required=True,
                        help="tool module: a .py file path or a dotted import path")
    options = parser.parse_args(argv)
    return serve(options.module)


if __name__ == "__main__":
    sys.exit(main())
