"""Delimiter-separated tables with a ``#`` metadata header.

Floats are written with ``repr`` (shortest round-trip form), so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, columns, rows, meta=None) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}: {_cell(value)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def read_table(path):
    """Return (meta, columns, rows as lists of strings)."""
    meta, lines = {}, []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    return meta, columns, list(reader)


def read_numeric(path):
    """Columns as float arrays keyed by header name (non-numeric kept as str)."""
    meta, columns, rows = read_table(path)
    out = {}
    for j, name in enumerate(columns):
        col = [r[j] for r in rows]
        try:
            out[name] = np.array([float(c) for c in col])
        except ValueError:
            out[name] = np.array(col)
    return meta, out
