"""Tests for experiment config parsing and validation."""
import json
from pathlib import Path

import pytest

from lab.config import ConfigValidationError, config_to_dict, load_config, parse_config, validate, validate_file
from lab.models import ExperimentKind, Fit1DParams, ScalarBoundaryParams
from recipes import list_recipes, recipe_path


def _write(tmp_path: Path, data: dict, name: str = "config.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_defaults_fill_missing_parameters(tmp_path: Path) -> None:
    config = parse_config({"kind": "Fit1D", "output_dir": str(tmp_path)})
    assert config.kind is ExperimentKind.FIT_1D
    assert config.parameters == Fit1DParams()
    assert config.seed == 0
    assert validate(config) == []


def test_nested_cases_are_parsed() -> None:
    config = parse_config({
        "kind": "ScalarBoundary",
        "parameters": {"cases": [{"depth": 2, "lam": 4}, {"depth": 3, "lam": 8.0, "kappa": 2}]},
    })
    params: ScalarBoundaryParams = config.parameters
    assert [(c.depth, c.lam, c.kappa) for c in params.cases] == [(2, 4.0, 1.0), (3, 8.0, 2.0)]
    assert isinstance(params.cases[0].lam, float)


def test_unknown_keys_are_reported_with_their_path() -> None:
    with pytest.raises(ConfigValidationError) as exc_info:
        parse_config({
            "kind": "ScalarBoundary",
            "colour": "blue",
            "parameters": {"cases": [{"depth": 2, "lam": 4.0, "weight": 1}], "sigmaa": 1.0},
        })
    assert set(exc_info.value.violations) == {
        "colour: unknown key",
        "parameters.sigmaa: unknown key",
        "parameters.cases[0].weight: unknown key",
    }


def test_wrong_types_are_reported() -> None:
    with pytest.raises(ConfigValidationError) as exc_info:
        parse_config({
            "kind": "ScalarSweep",
            "seed": "zero",
            "parameters": {"depths": [1, 2.5], "sigma": "one", "write_trajectories": 1},
        })
    assert set(exc_info.value.violations) == {
        "seed: expected an integer",
        "parameters.depths[1]: expected an integer",
        "parameters.sigma: expected a number",
        "parameters.write_trajectories: expected true or false",
    }


def test_missing_required_case_field() -> None:
    with pytest.raises(ConfigValidationError, match=r"parameters.cases\[0\].lam: missing required key"):
        parse_config({"kind": "ScalarBoundary", "parameters": {"cases": [{"depth": 2}]}})


def test_unknown_kind() -> None:
    with pytest.raises(ConfigValidationError, match="unknown experiment kind 'Spiral'"):
        parse_config({"kind": "Spiral"})


@pytest.mark.parametrize(
    "kind, parameters, expected",
    [
        ("ScalarSweep", {"lambdas": [1.0, 0.0]}, "lambda must be nonzero"),
        ("ScalarSweep", {"depths": [0]}, "depth must be >= 1"),
        ("ScalarSweep", {"step_fraction": 1.5}, "step_fraction must lie in (0, 1]"),
        ("ScalarBoundary", {"rel_tol": 0.0}, "rel_tol must lie in (0, 1)"),
        ("MatrixSingleVsDouble", {"step": -0.1}, "step must be positive"),
        ("MatrixSingleVsDouble", {"eig_low": 2.0, "eig_high": 1.0}, "eig_low must not exceed eig_high"),
        ("MatrixRateCheck", {"eig_low": -1.0}, "rate check needs a positive spectrum (eig_low > 0)"),
        ("Fit1D", {"step": -1e-4}, "step must be positive"),
        ("Fit1D", {"bias_ranges": [[1.0, 0.0]]}, "bias range must satisfy low <= high"),
        ("Fit1D", {"seeds": [1, 1]}, "seeds must be distinct"),
        ("ConvexityAudit", {"networks": 0}, "networks must be >= 1"),
        ("OptCondAudit", {"target": "sine"}, "target must be one of linear, zigzag"),
    ],
)
def test_range_violations(tmp_path: Path, kind: str, parameters: dict, expected: str) -> None:
    config = parse_config({"kind": kind, "output_dir": str(tmp_path), "parameters": parameters})
    assert expected in validate(config)


def test_negative_seed_is_a_violation(tmp_path: Path) -> None:
    config = parse_config({"kind": "ConvexityAudit", "seed": -1, "output_dir": str(tmp_path)})
    assert validate(config) == ["seed must be nonnegative"]


def test_output_dir_under_a_file_is_rejected(tmp_path: Path) -> None:
    blocker = tmp_path / "file.txt"
    blocker.write_text("x")
    config = parse_config({"kind": "ConvexityAudit", "output_dir": str(blocker / "runs")})
    assert any(v.startswith("output_dir is not a directory") for v in validate(config))


def test_load_config_names_run_after_file(tmp_path: Path) -> None:
    path = _write(tmp_path, {"kind": "ConvexityAudit"}, "audit_small.json")
    config = load_config(path)
    assert config.name == "audit_small"
    assert config.output_dir == "runs"


def test_output_dir_environment_override(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("LYAPLAB_OUTPUT_DIR", str(tmp_path / "elsewhere"))
    config = load_config(_write(tmp_path, {"kind": "ConvexityAudit", "output_dir": "runs"}))
    assert config.output_dir == str(tmp_path / "elsewhere")


def test_invalid_json_and_missing_file(tmp_path: Path) -> None:
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigValidationError, match="invalid JSON"):
        load_config(broken)
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.json")


def test_validate_file_collects_violations(tmp_path: Path) -> None:
    path = _write(tmp_path, {"kind": "Fit1D", "output_dir": str(tmp_path), "parameters": {"step": 0, "extra": 1}})
    assert validate_file(path) == ["parameters.extra: unknown key"]

    path = _write(tmp_path, {"kind": "Fit1D", "output_dir": str(tmp_path), "parameters": {"step": 0}})
    assert validate_file(path) == ["step must be positive"]


def test_config_to_dict_round_trips(tmp_path: Path) -> None:
    config = parse_config({
        "kind": "ScalarBoundary", "seed": 3, "output_dir": str(tmp_path), "name": "b",
        "parameters": {"cases": [{"depth": 2, "lam": 4.0}]},
    })
    echoed = config_to_dict(config)
    assert echoed["parameters"]["cases"] == [{"depth": 2, "lam": 4.0, "kappa": 1.0}]
    assert parse_config(echoed) == config


@pytest.mark.parametrize("name", list_recipes())
def test_bundled_recipes_are_valid(name: str, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("LYAPLAB_OUTPUT_DIR", str(tmp_path))
    assert validate_file(recipe_path(name)) == []
