"""Plain-text serialization helpers: CSV tables, key-value reports, matrices.

Every float is written with ``repr`` so that it round-trips exactly, the
decimal separator is ``.`` and lines end in ``\\n`` regardless of platform.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParameterError


def fmt(value) -> str:
    """Format a scalar for output with full round-trip precision."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if value is None:
        return "absent"
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence],
              comments: Mapping[str, object] | None = None) -> Path:
    """Write a CSV table, optionally preceded by ``# key = value`` lines."""
    path = Path(path)
    lines = []
    if comments:
        lines.extend(f"# {k} = {fmt(v)}" for k, v in comments.items())
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray, dict[str, str]]:
    """Read a table written by :func:`write_csv`.

    Returns the header, a float array of rows and the comment block.
    """
    comments: dict[str, str] = {}
    header: list[str] | None = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                comments[key.strip()] = val.strip()
            elif header is None:
                header = line.split(",")
            else:
                rows.append([float(x) for x in line.split(",")])
    if header is None:
        raise ParameterError(f"{path}: no header line")
    return header, np.array(rows, dtype=float).reshape(-1, len(header)), comments


def format_report(items: Mapping[str, object]) -> str:
    return "".join(f"{k} = {fmt(v)}\n" for k, v in items.items())


def write_report(path, items: Mapping[str, object]) -> Path:
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(format_report(items))
    return path


def write_matrix(path, matrix) -> Path:
    """Write a square complex matrix: ``dim`` then ``row col re im`` lines."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    lines = [str(n)]
    for i in range(n):
        for j in range(n):
            lines.append(f"{i} {j} {fmt(m[i, j].real)} {fmt(m[i, j].imag)}")
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def parse_matrix(text: str, source: str = "<string>") -> np.ndarray:
    # (physical line number, text), skipping blanks and comments
    lines = [(k, ln) for k, ln in enumerate(text.splitlines(), start=1)
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParameterError(f"{source}: empty matrix file")
    first, head = lines[0]
    try:
        n = int(head.strip())
    except ValueError:
        raise ParameterError(f"{source}:{first}: expected integer dimension, got {head!r}") from None
    if n < 1:
        raise ParameterError(f"{source}:{first}: dimension must be positive")
    if len(lines) - 1 != n * n:
        raise ParameterError(f"{source}: expected {n * n} entries, found {len(lines) - 1}")
    m = np.zeros((n, n), dtype=complex)
    seen = np.zeros((n, n), dtype=bool)
    for lineno, ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise ParameterError(f"{source}:{lineno}: expected 'row col re im'")
        try:
            i, j = int(parts[0]), int(parts[1])
            re, im = float(parts[2]), float(parts[3])
        except ValueError:
            raise ParameterError(f"{source}:{lineno}: malformed entry {ln!r}") from None
        if not (0 <= i < n and 0 <= j < n):
            raise ParameterError(f"{source}:{lineno}: index ({i}, {j}) out of range")
        if seen[i, j]:
            raise ParameterError(f"{source}:{lineno}: duplicate entry ({i}, {j})")
        seen[i, j] = True
        m[i, j] = complex(re, im)
    return m


def read_matrix(path) -> np.ndarray:
    path = Path(path)
    return parse_matrix(path.read_text(encoding="utf-8"), source=str(path))
