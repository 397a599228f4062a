"""Canonical rendering of tool argument values.

Every comparison of tool arguments in the framework goes through these
helpers so that "exact matching" has a single byte-stable definition:
map keys sorted, numbers in shortest round-trip decimal form, text kept
as-is.
"""

from __future__ import annotations

import json
from typing import Any


def canonical_value(value: Any) -> Any:
    """Normalize a single argument value for comparison."""
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        # json round-trips floats in shortest form; integral floats stay floats
        return value
    if isinstance(value, dict):
        return {str(k): canonical_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonical_value(v) for v in value]
    return value


def canonical_args(args: dict[str, Any]) -> str:
    """Render an argument map as a canonical JSON string."""
    return json.dumps(canonical_value(args), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def canonical_invocations(arg_maps: list[dict[str, Any]]) -> str:
    """Render an ordered sequence of argument maps canonically."""
    return json.dumps([json.loads(canonical_args(a)) for a in arg_maps], sort_keys=True, separators=(",", ":"), ensure_ascii=False)
