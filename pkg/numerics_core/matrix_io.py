"""Plain-text matrix format used for golden files.

The first line holds ``rows cols``; each following line holds one row of
space-separated values printed with 17 significant digits, so every float64
survives a write/read cycle unchanged.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from numerics_core.models import Matrix


def format_matrix(a: Matrix) -> str:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"matrix must be two-dimensional, got shape {arr.shape}")
    lines = [f"{arr.shape[0]} {arr.shape[1]}"]
    for row in arr:
        lines.append(" ".join(f"{value:.17g}" for value in row))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> Matrix:
    """Parse the text format.

    Raises:
        ValueError: On a malformed header, a row of the wrong length, a
            missing row or a non-finite entry.
    """
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty matrix text")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"bad matrix header: {lines[0]!r}")
    rows, cols = (int(tok) for tok in header)
    if rows < 0 or cols < 0:
        raise ValueError(f"bad matrix header: {lines[0]!r}")
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f"expected {rows} rows, found {len(body)}")

    values = np.empty((rows, cols), dtype=np.float64)
    for i, line in enumerate(body):
        tokens = line.split()
        if len(tokens) != cols:
            raise ValueError(f"row {i}: expected {cols} values, found {len(tokens)}")
        values[i] = [float(tok) for tok in tokens]
    if not np.all(np.isfinite(values)):
        raise ValueError("matrix has non-finite entries")
    return values


def write_matrix(path: str | Path, a: Matrix) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(format_matrix(a), encoding="utf-8")
    return target


def read_matrix(path: str | Path) -> Matrix:
    source = Path(path)
    if not source.exists():
        raise FileNotFoundError(f"Matrix file not found: {source}")
    return parse_matrix(source.read_text(encoding="utf-8"))
