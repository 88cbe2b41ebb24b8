"""CSV/JSON output helpers.

Floats are written with 17 significant digits so every value round-trips
exactly; files are written to a temporary name and renamed into place.
"""
from __future__ import annotations

import json
import os
import tempfile

import numpy as np


def fmt(x) -> str:
    return format(float(x), ".17g")


def format_matrix(a) -> str:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return "".join(",".join(fmt(v) for v in row) + "\n" for row in a)


def format_table(header: list[str], columns: list) -> str:
    """CSV text with a header row; integer columns are written without a decimal point."""
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        cells = []
        for v in row:
            if np.issubdtype(type(v), np.integer):
                cells.append(str(int(v)))
            else:
                cells.append(fmt(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def atomic_write_text(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if np.isnan(v) or np.isinf(v):
            return repr(v)
        return v
    return obj


def write_json(path: str, obj):
    atomic_write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
