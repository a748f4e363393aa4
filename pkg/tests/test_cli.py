"""End-to-end tests for the lab command line."""
import csv
import json
from pathlib import Path

from click.testing import CliRunner
import pytest

from lab.artifacts import MANIFEST_NAME, load_manifest, verify_artifacts
from lab.cli import cli


def _config(tmp_path: Path, name: str, kind: str, parameters: dict, seed: int = 0) -> Path:
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps({
        "kind": kind,
        "seed": seed,
        "output_dir": str(tmp_path / "runs"),
        "parameters": parameters,
    }))
    return path


def _rows(path: Path) -> list[list[str]]:
    with open(path, newline="") as f:
        return list(csv.reader(f))


SMALL_CONFIGS = {
    "sweep": ("ScalarSweep", {"depths": [1, 2], "lambdas": [2.0, -1.0], "max_iters": 10_000,
                              "write_trajectories": True}),
    "boundary": ("ScalarBoundary", {"cases": [{"depth": 1, "lam": 2.0}], "rel_tol": 0.05,
                                    "probe_iterations": 2_000}),
    "matrix": ("MatrixSingleVsDouble", {"width": 3, "depth": 2, "seeds": [1, 2], "iterations": 100,
                                        "orthogonal": True, "step": 0.2}),
    "rates": ("MatrixRateCheck", {"width": 3, "depth": 2, "seeds": [1], "iterations": 300,
                                  "modal_steps": 20, "check_iterations": 3_000}),
    "fit": ("Fit1D", {"depth": 2, "grid_size": 11, "max_epochs": 20, "seeds": [1, 2],
                      "bias_ranges": [[0.0, 0.5], [0.0, 1.0]], "save_models": True}),
    "convexity": ("ConvexityAudit", {"networks": 12, "pairs": 20}),
    "optimality": ("OptCondAudit", {"grid_size": 10, "max_epochs": 20, "bias_init_range": [0.5, 1.0]}),
}


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.mark.parametrize("name", sorted(SMALL_CONFIGS))
def test_run_writes_manifest_with_matching_digests(runner: CliRunner, tmp_path: Path, name: str) -> None:
    kind, parameters = SMALL_CONFIGS[name]
    path = _config(tmp_path, name, kind, parameters)

    result = runner.invoke(cli, ["run", str(path)])

    assert result.exit_code == 0, result.output
    run_dir = tmp_path / "runs" / name
    manifest = load_manifest(run_dir / MANIFEST_NAME)
    assert manifest.config["kind"] == kind
    assert manifest.config["name"] == name
    assert manifest.artifacts
    assert verify_artifacts(manifest, run_dir) == []
    assert manifest.summary


def test_expected_artifact_layout(runner: CliRunner, tmp_path: Path) -> None:
    paths = [_config(tmp_path, name, *SMALL_CONFIGS[name]) for name in ("sweep", "matrix", "fit", "convexity")]
    assert runner.invoke(cli, ["run", *map(str, paths)]).exit_code == 0
    runs = tmp_path / "runs"

    assert (runs / "sweep" / "trajectories" / "L2_lambdam1.csv").exists()
    assert (runs / "sweep" / "trajectories" / "L1_lambda2.csv").exists()
    assert _rows(runs / "matrix" / "losses" / "seed1.csv")[0] == ["iter", "loss_single", "loss_double"]
    assert len(_rows(runs / "matrix" / "losses" / "seed2.csv")) == 102
    assert _rows(runs / "fit" / "fits" / "bias_0_1.csv")[0] == ["x", "target", "estimate_seed1", "estimate_seed2"]
    assert (runs / "fit" / "models" / "bias_0_0p5_seed2.json").exists()
    convexity = _rows(runs / "convexity" / "convexity.csv")
    assert [row[0] for row in convexity[1:]] == [str(i) for i in range(12)]

    manifest = load_manifest(runs / "fit" / MANIFEST_NAME)
    roles = {r.path: r.role for r in manifest.artifacts}
    assert roles["fit_1d.csv"] == "table"
    assert roles["models/bias_0_1_seed1.json"] == "model"
    assert roles["losses/bias_0_1_seed1.csv"] == "curve"


def test_rerun_produces_identical_files(runner: CliRunner, tmp_path: Path) -> None:
    path = _config(tmp_path, "matrix", *SMALL_CONFIGS["matrix"], seed=3)
    run_dir = tmp_path / "runs" / "matrix"

    assert runner.invoke(cli, ["run", str(path)]).exit_code == 0
    first = {r.path: r.sha256 for r in load_manifest(run_dir / MANIFEST_NAME).artifacts}
    assert runner.invoke(cli, ["run", str(path), "--max-concurrent", "1"]).exit_code == 0
    second = {r.path: r.sha256 for r in load_manifest(run_dir / MANIFEST_NAME).artifacts}

    assert first == second


def test_root_seed_changes_results(runner: CliRunner, tmp_path: Path) -> None:
    kind, parameters = SMALL_CONFIGS["matrix"]
    for seed in (0, 1):
        path = _config(tmp_path, f"matrix_seed{seed}", kind, parameters, seed=seed)
        assert runner.invoke(cli, ["run", str(path)]).exit_code == 0
    a = (tmp_path / "runs" / "matrix_seed0" / "single_vs_double.csv").read_bytes()
    b = (tmp_path / "runs" / "matrix_seed1" / "single_vs_double.csv").read_bytes()
    assert a != b


def test_directory_of_configs(runner: CliRunner, tmp_path: Path) -> None:
    configs = tmp_path / "configs"
    configs.mkdir()
    _config(configs, "convexity", *SMALL_CONFIGS["convexity"])
    _config(configs, "boundary", *SMALL_CONFIGS["boundary"])

    result = runner.invoke(cli, ["run", str(configs)])

    assert result.exit_code == 0, result.output
    assert (configs / "runs" / "convexity" / MANIFEST_NAME).exists()
    assert (configs / "runs" / "boundary" / MANIFEST_NAME).exists()


def test_dry_run_executes_nothing(runner: CliRunner, tmp_path: Path) -> None:
    path = _config(tmp_path, "fit", *SMALL_CONFIGS["fit"])

    result = runner.invoke(cli, ["run", str(path), "--dry-run"])

    assert result.exit_code == 0, result.output
    assert "Dry run mode" in result.output
    assert "range2_seed2" in result.output
    assert not (tmp_path / "runs").exists()


def test_invalid_config_exits_with_2(runner: CliRunner, tmp_path: Path) -> None:
    path = _config(tmp_path, "bad", "ScalarSweep", {"lambdas": [0.0]})

    result = runner.invoke(cli, ["run", str(path)])

    assert result.exit_code == 2
    assert "lambda must be nonzero" in result.output
    assert not (tmp_path / "runs").exists()


def test_unknown_key_exits_with_2(runner: CliRunner, tmp_path: Path) -> None:
    path = _config(tmp_path, "bad", "ConvexityAudit", {"networkz": 3})
    result = runner.invoke(cli, ["run", str(path)])
    assert result.exit_code == 2
    assert "parameters.networkz: unknown key" in result.output


def test_numerical_failure_exits_with_1(runner: CliRunner, tmp_path: Path) -> None:
    # one probe iteration can never show the lowest step to be stable
    path = _config(tmp_path, "nobracket", "ScalarBoundary",
                   {"cases": [{"depth": 2, "lam": 4.0}], "probe_iterations": 1})

    result = runner.invoke(cli, ["run", str(path)])

    assert result.exit_code == 1
    assert "Numerical failure" in result.output
    assert "bracket" in result.output
    assert not (tmp_path / "runs" / "nobracket" / MANIFEST_NAME).exists()


def test_verbose_run_prints_task_progress(runner: CliRunner, tmp_path: Path) -> None:
    path = _config(tmp_path, "convexity", *SMALL_CONFIGS["convexity"])

    result = runner.invoke(cli, ["run", str(path), "-v"])

    assert result.exit_code == 0, result.output
    assert "▶ Executing: block1 (convexity_batch)" in result.output
    assert "✓ Completed: summary (summarize_convexity)" in result.output


def test_validate_command(runner: CliRunner, tmp_path: Path) -> None:
    good = _config(tmp_path, "good", *SMALL_CONFIGS["convexity"])
    bad = _config(tmp_path, "bad", "Fit1D", {"step": -1.0, "seeds": []})

    ok = runner.invoke(cli, ["validate", str(good)])
    failed = runner.invoke(cli, ["validate", str(good), str(bad)])

    assert ok.exit_code == 0
    assert failed.exit_code == 2
    assert "step must be positive" in failed.output
    assert "seeds must not be empty" in failed.output
    assert not (tmp_path / "runs").exists()


def test_kinds_and_recipes(runner: CliRunner) -> None:
    kinds = runner.invoke(cli, ["kinds"])
    assert kinds.exit_code == 0
    for kind in ("ScalarSweep", "MatrixRateCheck", "OptCondAudit"):
        assert kind in kinds.output

    schemas = runner.invoke(cli, ["kinds", "--tasks"])
    assert schemas.exit_code == 0
    assert "summarize_fits" in schemas.output

    listing = runner.invoke(cli, ["recipe"])
    assert "fit_1d" in listing.output.split()

    recipe = runner.invoke(cli, ["recipe", "fit_1d"])
    assert recipe.exit_code == 0
    assert json.loads(recipe.output)["kind"] == "Fit1D"

    missing = runner.invoke(cli, ["recipe", "nope"])
    assert missing.exit_code == 2
