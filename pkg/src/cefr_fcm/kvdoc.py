"""Versioned ``key = value`` text documents and small CSV tables."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _fmt(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, (list, tuple, np.ndarray)):
        return " ".join(_fmt(v) for v in value)
    return str(value)


def dumps(kind: str, items: Iterable[tuple[str, object]], version: int = 1) -> str:
    lines = [f"format = {kind}", f"version = {version}"]
    for key, value in items:
        if any(ch in key for ch in "=\n"):
            raise ValueError(f"invalid key {key!r}")
        lines.append(f"{key} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise ValueError(f"malformed line {line!r}")
        out[key] = value
    return out


def write(path: str | Path, kind: str, items: Iterable[tuple[str, object]], version: int = 1) -> None:
    Path(path).write_text(dumps(kind, items, version), encoding="utf-8")


def table_csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    Path(path).write_text(table_csv(header, rows), encoding="utf-8")
