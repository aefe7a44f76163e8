"""CSV and JSON verdict reports, written atomically."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Sequence

from ..verdict import CSV_HEADER, InequalityVerdict


def to_csv(verdicts: Sequence[InequalityVerdict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for v in verdicts:
        writer.writerow(v.csv_row())
    return buf.getvalue()


def to_json(verdicts: Sequence[InequalityVerdict]) -> str:
    return json.dumps([v.to_json() for v in verdicts], indent=2, sort_keys=True) + "\n"


def render(verdicts: Sequence[InequalityVerdict], fmt: str = "csv") -> str:
    if fmt == "csv":
        return to_csv(verdicts)
    if fmt == "json":
        return to_json(verdicts)
    raise ValueError(f"unknown report format {fmt!r}")


def write_atomic(path: str | Path, text: str) -> Path:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_report(verdicts: Sequence[InequalityVerdict], path: str | Path, fmt: str = "csv") -> Path:
    return write_atomic(path, render(verdicts, fmt))


def summarize(verdicts: Sequence[InequalityVerdict]) -> dict:
    counts = {"pass": 0, "fail": 0, "indeterminate": 0}
    for v in verdicts:
        counts[v.status] += 1
    return counts
