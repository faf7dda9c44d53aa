"""CSV output: fixed dialect and atomic file replacement.

Dialect: comma separated, '.' decimal point, scientific notation with 17
significant digits, one header row, LF line endings.  Lines starting with
``#`` are metadata comments.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool,)):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.16e}"


def render(header, rows, comments=()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temp file in the same directory + rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows, comments=()) -> Path:
    return atomic_write(path, render(header, rows, comments))


def read_csv(path):
    """Parse a file written by :func:`write_csv` into (comments, header, rows of str)."""
    comments, header, rows = [], None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append(line.split(","))
    return comments, header, rows
