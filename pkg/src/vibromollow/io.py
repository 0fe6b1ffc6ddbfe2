"""Result tables: deterministic CSV and JSON writers and readers.

Floats are written in shortest round-trip form and data files carry no
timestamps, so identical configs give byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import canonical_json, config_hash

FORMAT_VERSION = 1


@dataclass
class Table:
    """Named columns of equal length plus scalar metadata."""

    command: str
    columns: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns differ in length: {sorted(lengths)}")

    @property
    def n_rows(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _json_safe(x):
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def render_csv(table: Table, resolved: Optional[dict]) -> str:
    lines = [f"# vibromollow table v{FORMAT_VERSION}", f"# command: {table.command}"]
    if resolved is not None:
        lines.append(f"# config_hash: {config_hash(resolved)}")
    for k in sorted(table.metadata):
        lines.append(f"# {k}: {json.dumps(_json_safe(table.metadata[k]), sort_keys=True)}")
    if resolved is not None:
        lines.append(f"# config: {canonical_json(resolved)}")
    names = list(table.columns)
    lines.append(",".join(names))
    cols = [table.columns[n] for n in names]
    for i in range(table.n_rows):
        lines.append(",".join(fmt(c[i]) for c in cols))
    return "\n".join(lines) + "\n"


def render_json(table: Table, resolved: Optional[dict]) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "command": table.command,
        "config_hash": config_hash(resolved) if resolved is not None else None,
        "config": resolved,
        "metadata": _json_safe(table.metadata),
        "data": {k: _json_safe(list(v)) for k, v in table.columns.items()},
    }
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def render(table: Table, resolved: Optional[dict], fmt_name="csv") -> str:
    if fmt_name == "csv":
        return render_csv(table, resolved)
    if fmt_name == "json":
        return render_json(table, resolved)
    raise ValueError(f"unknown output format {fmt_name!r}")


def echo_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".config.json")


def write_table(table: Table, path, resolved: Optional[dict], fmt_name="csv") -> list:
    """Write the table and, when a config is given, its resolved-config echo."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render(table, resolved, fmt_name), encoding="utf-8")
    written = [path]
    if resolved is not None:
        echo = echo_path(path)
        echo.write_text(json.dumps(resolved, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        written.append(echo)
    return written


def _parse_cell(s):
    if s in ("true", "false"):
        return s == "true"
    try:
        return float(s)
    except ValueError:
        return s


def read_csv(path):
    """(metadata, columns) from a file written by :func:`write_table`.

    Numeric columns come back as float arrays; metadata values are decoded
    from their JSON form.
    """
    meta, rows, header = {}, [], None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, val = line[2:].partition(": ")
            if key == "config":
                meta[key] = json.loads(val)
            elif key in ("command", "config_hash") or key.startswith("vibromollow"):
                meta[key] = val
            else:
                try:
                    meta[key] = json.loads(val)
                except json.JSONDecodeError:
                    meta[key] = val
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append([_parse_cell(c) for c in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: no header row")
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in rows]
        cols[name] = np.array(vals, dtype=float) if all(isinstance(v, float) for v in vals) else vals
    return meta, cols


def read_json(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return doc, {k: np.array([np.nan if v is None else v for v in vals], dtype=float)
                 if all(v is None or isinstance(v, (int, float)) for v in vals) else vals
                 for k, vals in doc["data"].items()}
