"""CSV/JSON emission and parsing for result tables.

CSV files start with a ``# schema=N`` line, then a header with a fixed column
order. Floats are written with ``repr`` (shortest round-trip form), so
``read_table(write_table(rows))`` returns exactly the values written.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Callable, Mapping, Sequence

SCHEMA_VERSION = 1
FORMATS = ("csv", "json")


def _bool(text: str) -> bool:
    if text not in ("true", "false"):
        raise ValueError(f"not a boolean: {text!r}")
    return text == "true"


def _opt_float(text: str) -> float | None:
    return None if text == "" else float(text)


PARSERS: dict[type | str, Callable[[str], object]] = {
    int: int,
    float: float,
    str: str,
    bool: _bool,
    "float?": _opt_float,
}


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def emit_csv(columns: Sequence[str], records: Sequence[Mapping]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([format_cell(r[c]) for c in columns])
    return buf.getvalue()


def emit_json(columns: Sequence[str], records: Sequence[Mapping]) -> str:
    rows = [{c: _json_value(r[c]) for c in columns} for r in records]
    doc = {"schema": SCHEMA_VERSION, "columns": list(columns), "rows": rows}
    return json.dumps(doc, indent=1) + "\n"


def parse_csv(text: str, types: Mapping[str, object]) -> list[dict]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# schema={SCHEMA_VERSION}":
        raise ValueError("missing or unsupported schema header")
    reader = csv.reader(lines[1:])
    header = next(reader)
    out = []
    for row in reader:
        out.append({c: PARSERS[types[c]](cell) for c, cell in zip(header, row)})
    return out


def parse_json(text: str, types: Mapping[str, object]) -> list[dict]:
    doc = json.loads(text)
    if doc.get("schema") != SCHEMA_VERSION:
        raise ValueError("missing or unsupported schema version")
    out = []
    for r in doc["rows"]:
        rec = {}
        for c, v in r.items():
            t = types[c]
            if isinstance(v, str) and t in (float, "float?"):
                v = float(v)
            rec[c] = v
        out.append(rec)
    return out


def write_table(path: str | Path, columns, records, fmt: str = "csv") -> Path:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = emit_csv(columns, records) if fmt == "csv" else emit_json(columns, records)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


def read_table(path: str | Path, types: Mapping[str, object]) -> list[dict]:
    path = Path(path)
    text = path.read_text()
    return parse_json(text, types) if path.suffix == ".json" else parse_csv(text, types)
