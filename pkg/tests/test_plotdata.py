"""Tests for long-format plot tables derived from finished runs."""
import csv
import json
from pathlib import Path

from click.testing import CliRunner
import pytest

from lab.artifacts import MANIFEST_NAME, load_manifest, verify_artifacts
from lab.cli import cli
from lab.plotdata import DigestMismatchError, boundary_rows, emit_plotdata, long_curve_rows


def _rows(path: Path) -> list[list[str]]:
    with open(path, newline="") as f:
        return list(csv.reader(f))


def _run(tmp_path: Path, name: str, kind: str, parameters: dict) -> Path:
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps({"kind": kind, "output_dir": str(tmp_path / "runs"), "parameters": parameters}))
    result = CliRunner().invoke(cli, ["run", str(path)])
    assert result.exit_code == 0, result.output
    return tmp_path / "runs" / name


@pytest.fixture
def matrix_run(tmp_path: Path) -> Path:
    return _run(tmp_path, "matrix", "MatrixSingleVsDouble",
                {"width": 3, "depth": 2, "seeds": [1], "iterations": 5, "orthogonal": True, "step": 0.2})


def test_long_curve_rows_skip_empty_cells() -> None:
    header = ["iter", "loss_single", "loss_double"]
    rows = [["0", "1", "2"], ["1", "0.5", ""]]
    assert list(long_curve_rows(header, rows)) == [
        ["single", "0", "1"],
        ["single", "1", "0.5"],
        ["double", "0", "2"],
    ]


def test_boundary_rows_pick_columns_by_name() -> None:
    header = ["L", "lambda", "kappa", "predicted", "empirical", "relative_gap", "probes"]
    rows = [["2", "4", "1", "0.25", "0.2501", "0.0004", "30"]]
    assert list(boundary_rows(header, rows)) == [["2", "4", "0.25", "0.2501"]]


def test_plotdata_writes_long_tables_and_updates_manifest(matrix_run: Path) -> None:
    manifest = emit_plotdata(matrix_run)

    table = _rows(matrix_run / "plotdata" / "losses" / "seed1.csv")
    assert table[0] == ["series", "x", "y"]
    assert {row[0] for row in table[1:]} == {"single", "double"}
    assert len(table) == 1 + 2 * 6

    plot_records = [r for r in manifest.artifacts if r.role == "plotdata"]
    assert [r.path for r in plot_records] == ["plotdata/losses/seed1.csv"]
    assert load_manifest(matrix_run / MANIFEST_NAME).artifacts == manifest.artifacts
    assert verify_artifacts(manifest, matrix_run) == []


def test_plotdata_is_repeatable(matrix_run: Path) -> None:
    first = emit_plotdata(matrix_run / MANIFEST_NAME)
    second = emit_plotdata(matrix_run / MANIFEST_NAME)
    assert [(r.path, r.sha256) for r in first.artifacts] == [(r.path, r.sha256) for r in second.artifacts]


def test_boundary_plotdata(tmp_path: Path) -> None:
    run_dir = _run(tmp_path, "boundary", "ScalarBoundary",
                   {"cases": [{"depth": 1, "lam": 2.0}], "rel_tol": 0.05, "probe_iterations": 2_000})

    emit_plotdata(run_dir)

    table = _rows(run_dir / "plotdata" / "boundary.csv")
    assert table[0] == ["L", "lambda", "predicted", "empirical"]
    assert table[1][0] == "1"
    assert float(table[1][2]) == pytest.approx(2.0)


def test_modified_artifact_is_rejected(matrix_run: Path) -> None:
    (matrix_run / "single_vs_double.csv").write_text("tampered\n")

    with pytest.raises(DigestMismatchError) as exc_info:
        emit_plotdata(matrix_run)
    assert exc_info.value.problems == ["single_vs_double.csv: digest mismatch"]

    result = CliRunner().invoke(cli, ["plotdata", str(matrix_run / MANIFEST_NAME)])
    assert result.exit_code == 2
    assert not (matrix_run / "plotdata").exists()


def test_plotdata_command(matrix_run: Path) -> None:
    result = CliRunner().invoke(cli, ["plotdata", str(matrix_run)])
    assert result.exit_code == 0, result.output
    assert "1 plot table(s) written" in result.output
