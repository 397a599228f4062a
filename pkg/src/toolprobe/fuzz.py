"""Grammar- and vocabulary-aware fuzzing of a single tool.

The generator draws arguments that satisfy the declared syntax
constraints most of the time and deliberately violate exactly one of
them otherwise; semantic argument kinds (addresses, names, cities, ...)
are drawn from line-delimited vocabulary corpora. Failures are
deduplicated by a normalized (class, message-template) signature.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Sequence

from .canon import canonical_args
from .tools import ArgSpec, SyntaxConstraint, ToolOutcome, ToolSpec, invoke_tool

_CORPUS_FILES = {
    "address": "addresses.txt",
    "person-name": "person-names.txt",
    "city": "cities.txt",
    "date": "dates.txt",
    "url": "urls.txt",
    "free-text": "free-text.txt",
}

_WORDS = (
    "query", "search", "data", "file", "report", "alpha", "omega", "delta",
    "north", "market", "garden", "river", "stone", "paper", "light", "cloud",
    "metric", "engine", "filter", "index", "token", "record", "sample",
)


class CorpusError(RuntimeError):
    """Raised when a requested semantic vocabulary is unavailable."""


def load_corpus(semantic_kind: str, corpus_paths: dict[str, str] | None = None) -> list[str]:
    """Load the vocabulary for a semantic kind, overridable per config."""
    if corpus_paths and semantic_kind in corpus_paths:
        path = Path(corpus_paths[semantic_kind])
        if not path.exists():
            raise CorpusError(f"corpus file for {semantic_kind!r} not found: {path}")
        lines = path.read_text(encoding="utf-8").splitlines()
    else:
        filename = _CORPUS_FILES.get(semantic_kind)
        if filename is None:
            raise CorpusError(f"no corpus available for semantic kind {semantic_kind!r}")
        lines = (resources.files("toolprobe") / "corpora" / filename).read_text(encoding="utf-8").splitlines()
    entries = [line.strip() for line in lines if line.strip()]
    if not entries:
        raise CorpusError(f"corpus for {semantic_kind!r} is empty")
    return entries


@dataclass(frozen=True)
class FuzzConfig:
    seed: int
    budget: int
    max_text_length: int = 240
    conform_rate: float = 0.7
    corpus_paths: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.max_text_length < 1:
            raise ValueError("max_text_length must be >= 1")


@dataclass(frozen=True)
class ErrorSignature:
    error_class: str
    message_template: str


@dataclass(frozen=True)
class FailingInput:
    args: dict[str, Any]
    outcome: ToolOutcome
    signature: ErrorSignature

    def to_dict(self) -> dict:
        return {
            "args": self.args,
            "error_class": self.outcome.error_class,
            "message": self.outcome.message,
            "signature": {"error_class": self.signature.error_class, "template": self.signature.message_template},
        }

    @staticmethod
    def from_dict(entry: dict) -> "FailingInput":
        outcome = ToolOutcome.error(entry["error_class"], entry["message"])
        signature = ErrorSignature(entry["signature"]["error_class"], entry["signature"]["template"])
        return FailingInput(args=entry["args"], outcome=outcome, signature=signature)


_QUOTED_RE = re.compile(r"'[^']*'|\"[^\"]*\"")
_PATH_RE = re.compile(r"(?:/[\w.\-~+]+)+/?")
_DIGITS_RE = re.compile(r"\d+")


def template_message(message: str) -> str:
    """Normalize an error message: quoted literals, paths, and digit runs
    become placeholders. Applying this to its own output is the identity."""
    out = _QUOTED_RE.sub("<str>", message)
    out = _PATH_RE.sub("<path>", out)
    out = _DIGITS_RE.sub("<num>", out)
    return out


def make_signature(outcome: ToolOutcome) -> ErrorSignature:
    if outcome.ok:
        raise ValueError("cannot build an error signature from a success outcome")
    return ErrorSignature(outcome.error_class, template_message(outcome.message))


# --- argument generation -----------------------------------------------------


def _draw_text(rng: random.Random, arg: ArgSpec, config: FuzzConfig, target_len: int | None = None) -> str:
    if target_len is None:
        target_len = rng.randint(1, config.max_text_length)
    if arg.semantic_kind != "none":
        pool = load_corpus(arg.semantic_kind, config.corpus_paths)
    else:
        pool = list(_WORDS)
    pieces = [rng.choice(pool)]
    while len(" ".join(pieces)) < target_len:
        pieces.append(rng.choice(pool))
    return " ".join(pieces)


def _draw_from_pattern(rng: random.Random, pattern: str) -> str:
    """Sample a string matching a (simple) regular expression.

    Supports literals, ., \\d, \\w, \\s, character classes, groups, and the
    ?, *, +, {m[,n]} quantifiers; enough for manifest-declared patterns.
    """
    value = _pattern_walk(rng, pattern, 0, len(pattern))[0]
    if re.fullmatch(pattern, value) is None:
        raise ValueError(f"could not synthesize a match for pattern {pattern!r}")
    return value


def _pattern_walk(rng: random.Random, pattern: str, start: int, end: int) -> tuple[str, int]:
    out: list[str] = []
    i = start
    while i < end:
        ch = pattern[i]
        if ch == "|":
            # alternation: keep the branch we already produced half the time
            alt, j = _pattern_walk(rng, pattern, i + 1, end)
            if rng.random() < 0.5:
                return alt, j
            return "".join(out), j
        if ch == ")":
            return "".join(out), i
        piece, i = _pattern_atom(rng, pattern, i, end)
        reps, i = _pattern_quantifier(rng, pattern, i, end)
        out.append(piece * reps)
    return "".join(out), i


def _pattern_atom(rng: random.Random, pattern: str, i: int, end: int) -> tuple[str, int]:
    ch = pattern[i]
    if ch == "(":
        depth_start = i + 1
        if pattern.startswith("?:", depth_start):
            depth_start += 2
        piece, j = _pattern_walk(rng, pattern, depth_start, end)
        return piece, j + 1  # skip ')'
    if ch == "[":
        j = pattern.index("]", i + 1)
        piece = _sample_class(rng, pattern[i + 1:j])
        return piece, j + 1
    if ch == "\\" and i + 1 < end:
        esc = pattern[i + 1]
        if esc == "d":
            return str(rng.randint(0, 9)), i + 2
        if esc == "w":
            return rng.choice("abcdefghijklmnopqrstuvwxyz0123456789_"), i + 2
        if esc == "s":
            return " ", i + 2
        return esc, i + 2
    if ch == ".":
        return rng.choice("abcdefghijklmnopqrstuvwxyz "), i + 1
    if ch in "^$":
        return "", i + 1
    return ch, i + 1


def _pattern_quantifier(rng: random.Random, pattern: str, i: int, end: int) -> tuple[int, int]:
    if i >= end:
        return 1, i
    ch = pattern[i]
    if ch == "?":
        return rng.randint(0, 1), i + 1
    if ch == "*":
        return rng.randint(0, 3), i + 1
    if ch == "+":
        return rng.randint(1, 3), i + 1
    if ch == "{":
        j = pattern.index("}", i)
        body = pattern[i + 1:j]
        if "," in body:
            lo_s, hi_s = body.split(",", 1)
            lo = int(lo_s or 0)
            hi = int(hi_s) if hi_s else lo + 3
        else:
            lo = hi = int(body)
        return rng.randint(lo, hi), j + 1
    return 1, i


def _sample_class(rng: random.Random, body: str) -> str:
    chars: list[str] = []
    i = 0
    while i < len(body):
        if i + 2 < len(body) and body[i + 1] == "-":
            lo, hi = body[i], body[i + 2]
            chars.extend(chr(c) for c in range(ord(lo), ord(hi) + 1))
            i += 3
        elif body[i] == "\\" and i + 1 < len(body):
            esc = body[i + 1]
            if esc == "d":
                chars.extend("0123456789")
            elif esc == "w":
                chars.extend("abcdefghijklmnopqrstuvwxyz0123456789_")
            else:
                chars.append(esc)
            i += 2
        else:
            chars.append(body[i])
            i += 1
    return rng.choice(chars or ["x"])


def _conforming_text(rng: random.Random, arg: ArgSpec, config: FuzzConfig,
                     constraints: Sequence[SyntaxConstraint]) -> str:
    pattern = next((c for c in constraints if c.kind == "pattern"), None)
    if pattern is not None:
        return _draw_from_pattern(rng, pattern.text)

    max_len = next((c.count for c in constraints if c.kind == "max-length"), None)
    target = rng.randint(1, max_len) if max_len is not None else None
    value = _draw_text(rng, arg, config, target_len=target)

    fmt = next((c for c in constraints if c.kind == "format"), None)
    if fmt is not None:
        if fmt.text == "json":
            value = json.dumps({"q": value.split(" ")[0]})
        elif fmt.text == "csv":
            value = ",".join(value.split(" ")[:3] or ["a"])
        elif fmt.text == "url":
            value = "https://example.com/" + "-".join(value.split(" ")[:2])

    split = next((c for c in constraints if c.kind == "split-token"), None)
    if split is not None:
        parts = [value.split(" ")[0] or "x" for _ in range(split.count)]
        value = split.text.join(parts)

    prefix = next((c for c in constraints if c.kind == "required-prefix"), None)
    if prefix is not None:
        value = prefix.text + value

    if max_len is not None and len(value) > max_len:
        value = value[:max_len]
    return value


def _violated_text(rng: random.Random, arg: ArgSpec, config: FuzzConfig,
                   constraints: Sequence[SyntaxConstraint], victim: SyntaxConstraint) -> str:
    rest = [c for c in constraints if c is not victim]
    value = _conforming_text(rng, arg, config, rest)
    if victim.kind == "required-prefix":
        while value.startswith(victim.text):
            value = value[len(victim.text):] or "x"
    elif victim.kind == "max-length":
        while len(value) <= victim.count:
            value = value + " " + _draw_text(rng, arg, config, target_len=victim.count + 1)
    elif victim.kind == "format":
        value = "not a valid " + victim.text + " {{" + value
    elif victim.kind == "split-token":
        parts = ["x"] * (victim.count + 1)
        value = victim.text.join(parts)
    elif victim.kind == "pattern":
        candidate = "\n@@" + value
        for _ in range(20):
            if re.fullmatch(victim.text, candidate) is None:
                break
            candidate += rng.choice("@#\n")
        value = candidate
    return value


def generate_argument(arg: ArgSpec, rng: random.Random, config: FuzzConfig,
                      extra_constraints: Sequence[SyntaxConstraint] = ()) -> Any:
    """Draw one value for an argument.

    Most draws satisfy every declared constraint; the rest violate
    exactly one, which is what surfaces validation errors.
    """
    constraints = list(arg.syntax_constraints) + list(extra_constraints)

    if arg.kind == "boolean":
        return rng.random() < 0.5
    if arg.kind == "integer":
        boundary = (0, 1, -1, 2**31 - 1, -(2**31), 100, -100)
        if rng.random() < 0.5:
            return rng.choice(boundary)
        return rng.randint(-10**6, 10**6)
    if arg.kind == "real":
        boundary = (0.0, 1.0, -1.0, 0.5, 1e9, -1e9)
        if rng.random() < 0.5:
            return rng.choice(boundary)
        return round(rng.uniform(-10**6, 10**6), 6)
    if arg.kind == "enum":
        if rng.random() < config.conform_rate:
            return rng.choice(list(arg.enum_values))
        token = "off-enum-" + rng.choice(_WORDS)
        while token in arg.enum_values:
            token += "-x"
        return token
    if arg.kind == "list-of-text":
        count = rng.randint(0, 3)
        return [_draw_text(rng, arg, config, target_len=rng.randint(1, 40)) for _ in range(count)]

    # text
    if constraints and rng.random() >= config.conform_rate:
        victim = rng.choice(constraints)
        return _violated_text(rng, arg, config, constraints, victim)
    return _conforming_text(rng, arg, config, constraints)


# --- constraint inference ----------------------------------------------------

_MAXLEN_MSG_RE = re.compile(r"less than (\d+) characters")
_PREFIX_MSG_RE = re.compile(r"must start with ['\"]([^'\"]+)['\"]")


def constraints_from_message(message: str) -> list[SyntaxConstraint]:
    found: list[SyntaxConstraint] = []
    m = _MAXLEN_MSG_RE.search(message)
    if m:
        found.append(SyntaxConstraint(kind="max-length", count=int(m.group(1)) - 1))
    m = _PREFIX_MSG_RE.search(message)
    if m:
        found.append(SyntaxConstraint(kind="required-prefix", text=m.group(1)))
    return found


def infer_constraints(spec: ToolSpec, probe_budget: int = 20) -> list[SyntaxConstraint]:
    """Probe a tool with unconstrained inputs and mine its error messages
    for syntax requirements. Declared constraints are never removed; this
    only ever adds to them."""
    rng = random.Random(0)
    config = FuzzConfig(seed=0, budget=1, max_text_length=600)
    inferred: list[SyntaxConstraint] = []
    for _ in range(max(1, probe_budget)):
        args = {}
        for arg in spec.args:
            if arg.kind == "text":
                # deliberately ignore declared constraints to trip validation
                args[arg.name] = _draw_text(rng, arg, config)
            else:
                args[arg.name] = generate_argument(arg, rng, config)
        outcome = invoke_tool(spec, args)
        if outcome.ok:
            continue
        for constraint in constraints_from_message(outcome.message):
            if constraint not in inferred and constraint not in _all_declared(spec):
                inferred.append(constraint)
    return inferred


def _all_declared(spec: ToolSpec) -> list[SyntaxConstraint]:
    return [c for arg in spec.args for c in arg.syntax_constraints]


# --- fuzzing loop ------------------------------------------------------------


def fuzz_tool(spec: ToolSpec, config: FuzzConfig,
              extra_constraints: Sequence[SyntaxConstraint] = ()) -> list[FailingInput]:
    """Stress-test a tool in isolation; returns reproducible failures only.

    The same seed against the same tool behavior yields the identical
    sequence. Each candidate failure is re-invoked once; flaky ones are
    dropped. Transport failures keep their dedicated class and can be
    filtered by signature.
    """
    rng = random.Random(config.seed)
    failures: list[FailingInput] = []
    for _ in range(config.budget):
        args = {arg.name: generate_argument(arg, rng, config, extra_constraints) for arg in spec.args}
        outcome = invoke_tool(spec, args)
        if outcome.ok:
            continue
        signature = make_signature(outcome)
        retry = invoke_tool(spec, args)
        if retry.ok or make_signature(retry) != signature:
            continue
        failures.append(FailingInput(args=args, outcome=outcome, signature=signature))
    return failures


def dedupe_failures(failures: Iterable[FailingInput]) -> dict[ErrorSignature, FailingInput]:
    """One representative per signature: shortest canonical args, first seen wins ties."""
    best: dict[ErrorSignature, FailingInput] = {}
    for failure in failures:
        current = best.get(failure.signature)
        if current is None or len(canonical_args(failure.args)) < len(canonical_args(current.args)):
            best[failure.signature] = failure
    return best
