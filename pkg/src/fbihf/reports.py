"""Deterministic JSON and CSV emission.

Reports must be byte-identical across runs for fixed inputs: keys are
sorted, floats are printed with 17 significant digits (exact round-trip),
and volatile metadata (timestamps) lives in a separate "meta" object that
consumers exclude when comparing.
"""

from __future__ import annotations

import datetime
import json
import os

import numpy as np


def _fmt_float(x: float) -> str:
    if x != x:
        return '"nan"'
    if x in (float("inf"), float("-inf")):
        return f'"{x}"'
    return f"{x:.17g}"


def _encode(obj) -> str:
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        inner = ",".join(f"{json.dumps(str(k))}:{_encode(v)}" for k, v in items)
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode({"re": float(obj.real), "im": float(obj.imag)})
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def dumps(obj) -> str:
    return _encode(obj)


def write_report(path, results: dict, meta: dict | None = None) -> None:
    """Write {"meta": ..., "results": ...}; only results must be stable."""
    meta = dict(meta or {})
    meta.setdefault("timestamp", datetime.datetime.now(datetime.timezone.utc)
                    .isoformat())
    payload = '{"meta":' + _encode(meta) + ',"results":' + _encode(results) + "}\n"
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload)


def write_csv(path, header: list, rows) -> None:
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, (float, np.floating)):
                    cells.append(f"{float(cell):.17g}")
                else:
                    cells.append(str(cell))
            fh.write(",".join(cells) + "\n")
