"""Artifact files of a run and the manifest that lists them.

CSV values are written with a fixed format (floats as ``.16e``) so that the
same results always produce the same bytes; every file's SHA-256 digest is
recorded as it is written.
"""
from __future__ import annotations

import csv
from dataclasses import asdict
import hashlib
import io
import json
import math
from pathlib import Path
import threading
import typing as t

from lab.models import ArtifactRecord, RunManifest

MANIFEST_NAME = "manifest.json"


def format_value(value: t.Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.16e}"
    return str(value)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


class ArtifactWriter:
    """Writes files under one run directory and keeps their records.

    Each path may be written once per run.
    """

    def __init__(self, run_dir: str | Path) -> None:
        self.run_dir = Path(run_dir)
        self._records: dict[str, ArtifactRecord] = {}
        self._lock = threading.Lock()

    @property
    def records(self) -> list[ArtifactRecord]:
        return [self._records[path] for path in sorted(self._records)]

    def _write(self, relative: str, data: bytes, role: str) -> ArtifactRecord:
        with self._lock:
            if relative in self._records:
                raise ValueError(f"artifact already written in this run: {relative}")
            target = self.run_dir / relative
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
            record = ArtifactRecord(path=relative, sha256=sha256_bytes(data), role=role)
            self._records[relative] = record
            return record

    def write_csv(
            self,
            relative: str,
            header: t.Sequence[str],
            rows: t.Iterable[t.Sequence[t.Any]],
            role: str = "table",
    ) -> ArtifactRecord:
        buffer = io.StringIO()
        w = csv.writer(buffer, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
        return self._write(relative, buffer.getvalue().encode("utf-8"), role)

    def write_json(self, relative: str, data: t.Any, role: str) -> ArtifactRecord:
        text = json.dumps(data, indent=2, sort_keys=True) + "\n"
        return self._write(relative, text.encode("utf-8"), role)

    def write_text(self, relative: str, text: str, role: str) -> ArtifactRecord:
        return self._write(relative, text.encode("utf-8"), role)


# ---- manifests ----

def write_manifest(run_dir: str | Path, manifest: RunManifest) -> Path:
    """Write ``manifest.json``; called after every other artifact is on disk."""
    target = Path(run_dir) / MANIFEST_NAME
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(asdict(manifest), indent=2) + "\n", encoding="utf-8")
    return target


def load_manifest(path: str | Path) -> RunManifest:
    source = Path(path)
    if not source.exists():
        raise FileNotFoundError(f"Manifest not found: {source}")
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
        return RunManifest(
            config=data["config"],
            seed=data["seed"],
            started_at=data["started_at"],
            finished_at=data["finished_at"],
            artifacts=[ArtifactRecord(**a) for a in data["artifacts"]],
            summary=data.get("summary", {}),
        )
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise ValueError(f"Malformed manifest {source}: {e}") from e


def verify_artifacts(manifest: RunManifest, run_dir: str | Path) -> list[str]:
    """Artifacts that are missing or whose digest no longer matches."""
    problems = []
    for record in manifest.artifacts:
        path = Path(run_dir) / record.path
        if not path.exists():
            problems.append(f"{record.path}: missing")
        elif sha256_file(path) != record.sha256:
            problems.append(f"{record.path}: digest mismatch")
    return problems
