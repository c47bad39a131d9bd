"""Plain-data conversion and report rendering shared by demos and the CLI."""

from __future__ import annotations

import dataclasses
import json
import math
from fractions import Fraction
from typing import Any, Mapping

import numpy as np

SIG_DIGITS = 15


def label(x) -> Any:
    """Action/type labels as JSON scalars: None becomes "none", tuples become lists."""
    if x is None:
        return "none"
    if isinstance(x, tuple):
        return [label(v) for v in x]
    return jsonable(x)


def jsonable(x) -> Any:
    if x is None or isinstance(x, (bool, str)):
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return float(f"{x:.{SIG_DIGITS}g}")
        return str(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, np.ndarray):
        return [jsonable(v) for v in x.tolist()]
    if dataclasses.is_dataclass(x) and hasattr(x, "as_dict"):
        return jsonable(x.as_dict())
    if isinstance(x, Mapping):
        return {_key(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = [jsonable(v) for v in x]
        return sorted(items, key=repr) if isinstance(x, (set, frozenset)) else items
    return str(x)


def _key(k) -> str:
    if isinstance(k, str):
        return k
    return json.dumps(label(k))


def dumps(x) -> str:
    return json.dumps(jsonable(x), sort_keys=True, indent=2)


def render_text(title: str, data: Mapping) -> str:
    lines = [title]
    for k, v in data.items():
        if isinstance(v, (dict, list)) and v:
            lines.append(f"  {k}: {json.dumps(jsonable(v), sort_keys=True)}")
        else:
            lines.append(f"  {k}: {jsonable(v)}")
    return "\n".join(lines)


def render_table(rows: list, columns: list) -> str:
    cells = [[str(jsonable(r.get(c, ""))) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[n]) for row in cells]) for n, c in enumerate(columns)]
    out = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)),
           "  ".join("-" * w for w in widths)]
    out += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(out)
