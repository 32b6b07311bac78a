"""CSV output with fixed schemas, atomic writes and run manifests."""
from __future__ import annotations

import csv
import datetime as _dt
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

SIG_DIGITS = 10

SPECTRUM_SCHEMA = ("delta_khz", "e_minus_khz", "e_plus_khz")
SWEEP_SCHEMA = ("delta2_khz", "e_minus2_khz", "e_plus2_khz", "gap1_khz", "gap2_khz",
                "mean_leakage", "stderr")
LEAKAGE_SCHEMA = ("time_us", "leakage", "leakage_stderr")
COMPARE_SCHEMA = ("quantity", "value", "stderr")
HOPPING_SCHEMA = ("site_i", "site_j", "distance_um", "k_formula_khz", "k_configured_khz",
                  "relative_difference")


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        return f"{float(value):.{SIG_DIGITS}g}"
    return str(value)


def render_csv(rows: Iterable[Sequence[Any]], schema: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(schema)
    for row in rows:
        row = list(row)
        if len(row) != len(schema):
            raise ValueError(f"row has {len(row)} fields, schema has {len(schema)}")
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def atomic_write_text(path: str | Path, text: str) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path: str | Path, rows: Iterable[Sequence[Any]], schema: Sequence[str]) -> Path:
    return atomic_write_text(path, render_csv(rows, schema))


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def read_numeric_csv(path: str | Path) -> dict[str, list[float]]:
    header, rows = read_csv(path)
    return {name: [float(r[k]) for r in rows] for k, name in enumerate(header)}


def manifest_path(csv_path: str | Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.name + ".manifest.json")


def write_manifest(csv_path: str | Path, command: str, config: dict, version: str,
                   results: dict | None = None) -> Path:
    doc = {
        "manifest_version": 1,
        "command": command,
        "artifact_version": version,
        "output": Path(csv_path).name,
        "seed": config.get("noise", {}).get("seed"),
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "config": config,
        "results": results or {},
    }
    return atomic_write_text(manifest_path(csv_path), json.dumps(doc, indent=2, sort_keys=True) + "\n")
