"""Deterministic CSV / JSON writers."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".15g")
    return str(value)


def write_csv(path: Path, header: list[str], rows, meta: dict) -> Path:
    """CSV with ``# key: value`` metadata lines before the column header."""
    path = Path(path)
    lines = [f"# {k}: {meta[k]}" for k in sorted(meta)]
    lines.append(",".join(header))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path: Path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def write_records(path: Path, records) -> Path:
    """One trajectory record per line."""
    path = Path(path)
    with path.open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), separators=(",", ":")) + "\n")
    return path


def read_csv(path: Path) -> tuple[dict, list[str], list[list[str]]]:
    meta, rows, header = {}, [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = val
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append(line.split(","))
    return meta, header, rows
