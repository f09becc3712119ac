"""Deterministic CSV and JSON writers for run artifacts.

Floats are written with ``repr`` so that a rerun with the same inputs
reproduces every file byte for byte. Wall-clock data goes to a separate
metadata file and never into the result files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

CSV_VERSION = "csv-v1"
RUN_FORMAT = "heegner-moments/run-v1"


def measured(value: float, error: float) -> dict:
    """A constant with its error bar; the only float shape allowed in run.json."""
    return {"value": _finite(value), "error": _finite(abs(error))}


def _finite(x: float):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _cell(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_text(name: str, columns: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# heegner-moments {name} {CSV_VERSION} columns={','.join(columns)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_csv(path: str | Path) -> tuple[str, list[dict]]:
    """(header comment, rows) of a file written by ``csv_text``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        return header, list(csv.DictReader(fh))
