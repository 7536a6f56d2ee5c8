"""Plain-text field files and CSV helpers.

Field file layout (version 1)::

    FRACLAP v1
    k <int>
    s <float>
    p <float>
    q <float>
    beta <float>
    nx <int>
    ny <int>
    <nx x-nodes>
    <ny y-nodes>
    <ny lines of nx values>   # component 0, row y_0 first
    ...                       # components 1..k-1

Floats are written with ``repr`` so that loading reproduces every bit.
Interaction matrix and reactions are not stored; a loaded field carries
the defaults for those.
"""

from __future__ import annotations

import csv
import hashlib
import io
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Field, ProblemParams, make_grid
from .solver import default_grading

MAGIC = "FRACLAP"
SUPPORTED_VERSIONS = ("v1",)


class FieldFormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def format_field(field: Field) -> str:
    prm, g = field.params, field.grid
    lines = [
        f"{MAGIC} v1",
        f"k {prm.k}",
        f"s {_fmt(prm.s)}",
        f"p {_fmt(prm.p)}",
        f"q {_fmt(prm.q)}",
        f"beta {_fmt(prm.beta)}",
        f"nx {g.nx}",
        f"ny {g.ny}",
        " ".join(map(_fmt, g.x_nodes)),
        " ".join(map(_fmt, g.y_nodes)),
    ]
    for i in range(prm.k):
        for row in field.values[i]:
            lines.append(" ".join(map(_fmt, row)))
    return "\n".join(lines) + "\n"


def save_field(field: Field, path) -> Path:
    path = Path(path)
    path.write_text(format_field(field))
    return path


def _header_value(lines, n, key, cast):
    if n >= len(lines):
        raise FieldFormatError(f"truncated header: missing '{key}'")
    parts = lines[n].split()
    if len(parts) != 2 or parts[0] != key:
        raise FieldFormatError(f"line {n + 1}: expected '{key} <value>', got {lines[n]!r}")
    try:
        return cast(parts[1])
    except ValueError as exc:
        raise FieldFormatError(f"line {n + 1}: bad value for '{key}'") from exc


def parse_field(text: str) -> Field:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FieldFormatError("empty field file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != MAGIC:
        raise FieldFormatError(f"not a {MAGIC} field file")
    if head[1] not in SUPPORTED_VERSIONS:
        raise FieldFormatError(
            f"unknown version {head[1]!r}; supported: {', '.join(SUPPORTED_VERSIONS)}")
    k = _header_value(lines, 1, "k", int)
    s = _header_value(lines, 2, "s", float)
    p = _header_value(lines, 3, "p", float)
    q = _header_value(lines, 4, "q", float)
    beta = _header_value(lines, 5, "beta", float)
    nx = _header_value(lines, 6, "nx", int)
    ny = _header_value(lines, 7, "ny", int)
    if len(lines) < 10:
        raise FieldFormatError("truncated header: missing node lines")
    x = np.array([float(t) for t in lines[8].split()])
    y = np.array([float(t) for t in lines[9].split()])
    if x.size != nx or y.size != ny:
        raise FieldFormatError("node line lengths do not match nx/ny")
    body = lines[10:]
    if len(body) != k * ny:
        kind = "truncated payload" if len(body) < k * ny else "payload longer than header"
        raise FieldFormatError(
            f"{kind}: {len(body)} value rows for k={k}, ny={ny} (expected {k * ny})")
    vals = np.empty((k, ny, nx))
    for n, ln in enumerate(body):
        row = [float(t) for t in ln.split()]
        if len(row) != nx:
            raise FieldFormatError(f"value row {n + 1} has {len(row)} entries, expected {nx}")
        vals[n // ny, n % ny] = row
    prm = ProblemParams(s=s, k=k, p=p, q=q, beta=beta)
    grid = make_grid(x, y, prm.a, default_grading(prm.a))
    return Field(prm, grid, vals)


def load_field(path) -> Field:
    return parse_field(Path(path).read_text())


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Deterministic CSV; floats via ``repr``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.write_text(csv_text(header, rows))
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
