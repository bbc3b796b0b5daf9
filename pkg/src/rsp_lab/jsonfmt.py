"""JSON text with every float written to 17 significant digits.

The stdlib encoder always uses ``float.__repr__``, so floats are rendered
here and the rest of the document is delegated to ``json``. Non-finite
floats, which JSON cannot carry, become the strings ``"inf"``, ``"-inf"``
and ``"nan"``.
"""

from __future__ import annotations

import json
import math

import numpy as np


def format_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    text = format(x, ".17g")
    if "e" not in text and "." not in text:
        text += ".0"
    return text


def _encode(obj, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ","
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        colon = ":" if indent is None else ": "
        parts = [json.dumps(str(k), ensure_ascii=False) + colon + _encode(v, indent, level + 1)
                 for k, v in obj.items()]
        return "{" + pad + (sep + pad).join(parts) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if indent is None or _depth(obj) <= 2:
            return "[" + ", ".join(_encode(v, None, level + 1) for v in obj) + "]"
        items = [_encode(v, indent, level + 1) for v in obj]
        return "[" + pad + (sep + pad).join(items) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _depth(v) -> int:
    # matrix rows of [re, im] pairs (depth 2) stay on one line
    if isinstance(v, (list, tuple, np.ndarray)):
        return 1 + max((_depth(x) for x in v), default=0)
    return 0


def dumps(obj, indent: int | None = 2) -> str:
    return _encode(obj, indent, 0)


def parse_float(value) -> float:
    """Inverse of :func:`format_float` for values read back from JSON."""
    return float(value)
