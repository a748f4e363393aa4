"""Plot-ready series derived from a finished run.

Wide curve tables (``iter,loss_single,loss_double`` and the like) become
long ``series,x,y`` tables; the boundary table becomes predicted vs empirical
points. Inputs are checked against the manifest digests first.
"""
from __future__ import annotations

import csv
from dataclasses import replace
import logging
from pathlib import Path
import typing as t

from lab.artifacts import (
    MANIFEST_NAME,
    ArtifactWriter,
    load_manifest,
    verify_artifacts,
    write_manifest,
)
from lab.models import ArtifactRecord, RunManifest

logger = logging.getLogger(__name__)

PLOTDATA_DIR = "plotdata"
CURVE_ROLES = ("curve",)


class DigestMismatchError(ValueError):
    """Raised when artifacts on disk no longer match the manifest."""

    def __init__(self, problems: list[str]) -> None:
        self.problems = problems
        super().__init__("artifacts do not match the manifest: " + "; ".join(problems))


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        return [], []
    return rows[0], rows[1:]


def _series_name(column: str) -> str:
    return column.removeprefix("loss_")


def long_curve_rows(header: list[str], rows: list[list[str]]) -> t.Iterator[list[str]]:
    """Rows of ``series,x,y``: one per non-empty cell outside the first column."""
    for column in range(1, len(header)):
        name = _series_name(header[column])
        for row in rows:
            if column < len(row) and row[column] != "":
                yield [name, row[0], row[column]]


def boundary_rows(header: list[str], rows: list[list[str]]) -> t.Iterator[list[str]]:
    index = {name: i for i, name in enumerate(header)}
    for row in rows:
        yield [row[index["L"]], row[index["lambda"]], row[index["predicted"]], row[index["empirical"]]]


def emit_plotdata(manifest_path: str | Path) -> RunManifest:
    """Write ``plotdata/`` tables next to a run and add them to its manifest.

    Args:
        manifest_path: A ``manifest.json`` or the run directory holding one.

    Returns:
        The updated manifest.

    Raises:
        FileNotFoundError: If the manifest does not exist.
        ValueError: If the manifest is malformed.
        DigestMismatchError: If an artifact is missing or was modified.
    """
    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    run_dir = path.parent
    manifest = load_manifest(path)

    problems = verify_artifacts(manifest, run_dir)
    if problems:
        raise DigestMismatchError(problems)

    kept = [r for r in manifest.artifacts if not r.path.startswith(f"{PLOTDATA_DIR}/")]
    writer = ArtifactWriter(run_dir)
    for record in kept:
        source = run_dir / record.path
        if record.role in CURVE_ROLES:
            header, rows = _read_rows(source)
            writer.write_csv(
                f"{PLOTDATA_DIR}/{record.path}",
                ["series", "x", "y"],
                long_curve_rows(header, rows),
                role="plotdata",
            )
        elif record.role == "boundary":
            header, rows = _read_rows(source)
            writer.write_csv(
                f"{PLOTDATA_DIR}/{record.path}",
                ["L", "lambda", "predicted", "empirical"],
                boundary_rows(header, rows),
                role="plotdata",
            )

    emitted: list[ArtifactRecord] = writer.records
    logger.info("Wrote %d plot tables under %s", len(emitted), run_dir / PLOTDATA_DIR)
    updated = replace(manifest, artifacts=sorted([*kept, *emitted], key=lambda r: r.path))
    write_manifest(run_dir, updated)
    return updated
