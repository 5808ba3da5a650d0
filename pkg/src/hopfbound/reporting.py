"""Canonical report emission: deterministic JSON, CSV rows, pretty text.

JSON output is byte-stable for identical inputs: keys are sorted, floats
use shortest round-trip repr, and no volatile data (timestamps, wall clock)
is embedded. Wall-clock goes to stderr and to the pretty format only.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from . import __version__
from ._backend import backend_name

REPORT_SCHEMA_VERSION = 1


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def report_meta(k=None, resolution=None, seed=None, **extra) -> dict:
    meta = {
        "artifact": "hopfbound",
        "version": __version__,
        "schema_version": REPORT_SCHEMA_VERSION,
        "backend": backend_name(),
        "k": k,
        "resolution": resolution,
        "seed": seed,
    }
    meta.update(extra)
    return meta


def canonical_json(payload: dict) -> str:
    return json.dumps(_plain(payload), sort_keys=True, indent=2,
                      ensure_ascii=False) + "\n"


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: _plain(row.get(c)) for c in columns})
    return buf.getvalue()


def render_pretty(title: str, lines: list[str], wall_clock: float | None = None) -> str:
    out = [title, "-" * len(title)]
    out.extend(lines)
    if wall_clock is not None:
        out.append(f"wall clock: {wall_clock:.3f} s")
    return "\n".join(out) + "\n"
