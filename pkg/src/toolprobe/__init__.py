"""Automated testing of LLM-agent tools and their documentation.

Two detection pipelines — constraint-aware fuzzing for runtime errors and
synonymous-prompt consistency plus an LLM oracle for incorrect answers —
with metrics, reporting, documentation repair, and a file benchmark.
"""

__version__ = "0.1.0"

from .tools import (  # noqa: F401
    AdapterRef,
    ArgSpec,
    SyntaxConstraint,
    ToolInvocation,
    ToolOutcome,
    ToolRegistry,
    ToolSpec,
    load_and_validate,
)
