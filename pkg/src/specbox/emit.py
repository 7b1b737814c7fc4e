"""Deterministic result emission: JSON documents and RFC-4180 CSV tables.

Floats are written with 17 significant digits in CSV so every value
round-trips bit-exactly; booleans become lowercase true/false; missing
values are empty fields.  Identical inputs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import sys

from .errors import ConfigError

__all__ = ["fmt_cell", "render_csv", "render_json", "write_output"]


def fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def render_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt_cell(v) for v in row])
    return buf.getvalue()


def render_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def write_output(text: str, path: str | None) -> None:
    if path:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"cannot write output: {exc}", field="output.path") from exc
    else:
        sys.stdout.write(text)
