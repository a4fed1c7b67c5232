"""Locale-independent CSV output with 12 significant digits."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path


def format_number(x) -> str:
    if isinstance(x, (bool, str)):
        return str(x)
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0:
        return "0"
    return f"{x:.12g}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) for v in row])
    return buf.getvalue()


def write_csv(out, header, rows) -> None:
    """Write to a path (parent must exist) or to an open text stream."""
    text = csv_text(header, rows)
    if hasattr(out, "write"):
        out.write(text)
        return
    path = Path(out)
    if not path.parent.exists():
        raise FileNotFoundError(f"directory {path.parent} does not exist")
    path.write_text(text, encoding="utf-8")
