"""CSV artifacts: '#' metadata header, one header row, atomic replace."""

from __future__ import annotations

import csv
import io
import math
import numbers
import os
import sys
import tempfile
from pathlib import Path

from . import __version__


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def render_csv(columns, rows, meta: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# epicost {__version__}\n")
    for key in sorted(meta or {}):
        buf.write(f"# {key}={fmt(meta[key])}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(c) for c in columns]
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_text_atomic(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, columns, rows, meta: dict | None = None) -> None:
    write_text_atomic(path, render_csv(columns, rows, meta))


def read_csv_body(path) -> list[dict]:
    """Rows of a CSV produced by :func:`write_csv`, skipping '#' lines."""
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))
