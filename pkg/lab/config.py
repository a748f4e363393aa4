"""Strict JSON experiment configs.

A config document is ``{"kind", "seed", "output_dir", "name", "parameters"}``.
``parameters`` is parsed into the kind's dataclass from ``lab.models``;
unknown keys and wrongly typed values are reported with their field path
(``parameters.cases[1].lam``). ``validate`` then checks numeric ranges and
the output directory, returning violations as data.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from pathlib import Path
import typing as t

from lab.models import (
    ConvexityAuditParams,
    ExperimentConfig,
    ExperimentKind,
    Fit1DParams,
    MatrixRateCheckParams,
    MatrixSingleVsDoubleParams,
    OptCondAuditParams,
    ScalarBoundaryParams,
    ScalarSweepParams,
)

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "LYAPLAB_OUTPUT_DIR"

PARAMS_BY_KIND: dict[ExperimentKind, type] = {
    ExperimentKind.SCALAR_SWEEP: ScalarSweepParams,
    ExperimentKind.SCALAR_BOUNDARY: ScalarBoundaryParams,
    ExperimentKind.MATRIX_SINGLE_VS_DOUBLE: MatrixSingleVsDoubleParams,
    ExperimentKind.MATRIX_RATE_CHECK: MatrixRateCheckParams,
    ExperimentKind.FIT_1D: Fit1DParams,
    ExperimentKind.CONVEXITY_AUDIT: ConvexityAuditParams,
    ExperimentKind.OPT_COND_AUDIT: OptCondAuditParams,
}

TOP_LEVEL_KEYS = ("kind", "seed", "output_dir", "name", "parameters")
OPT_COND_TARGETS = ("linear", "zigzag")


class ConfigValidationError(ValueError):
    """Raised with every field-level violation found in a config."""

    def __init__(self, violations: list[str]) -> None:
        self.violations = violations
        super().__init__("invalid config: " + "; ".join(violations))


# ---- parsing ----

def _is_number(value: t.Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _coerce(value: t.Any, hint: t.Any, path: str, errors: list[str]) -> t.Any:
    """Check ``value`` against a type hint, converting ints to floats where needed."""
    origin = t.get_origin(hint)
    args = t.get_args(hint)

    if origin is t.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(value, inner[0], path, errors)

    if origin is list:
        if not isinstance(value, list):
            errors.append(f"{path}: expected a list")
            return []
        return [_coerce(item, args[0], f"{path}[{i}]", errors) for i, item in enumerate(value)]

    if dataclasses.is_dataclass(hint):
        return _parse_dataclass(hint, value, path, errors)

    if hint is bool:
        if not isinstance(value, bool):
            errors.append(f"{path}: expected true or false")
        return value
    if hint is int:
        if not isinstance(value, int) or isinstance(value, bool):
            errors.append(f"{path}: expected an integer")
        return value
    if hint is float:
        if not _is_number(value):
            errors.append(f"{path}: expected a number")
            return value
        if not math.isfinite(value):
            errors.append(f"{path}: must be finite")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            errors.append(f"{path}: expected a string")
        return value
    return value


def _parse_dataclass(cls: type, data: t.Any, path: str, errors: list[str]) -> t.Any:
    if not isinstance(data, dict):
        errors.append(f"{path}: expected an object")
        return None
    fields = {f.name: f for f in dataclasses.fields(cls)}
    hints = t.get_type_hints(cls)

    for key in data:
        if key not in fields:
            errors.append(f"{path}.{key}: unknown key")

    kwargs = {}
    for name, f in fields.items():
        if name in data:
            kwargs[name] = _coerce(data[name], hints[name], f"{path}.{name}", errors)
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            errors.append(f"{path}.{name}: missing required key")

    try:
        return cls(**kwargs)
    except TypeError:
        # missing required keys, already reported
        return None


def parse_config(data: t.Any) -> ExperimentConfig:
    """Build an ``ExperimentConfig`` from a decoded JSON document.

    Raises:
        ConfigValidationError: On unknown keys, unknown kinds or mistyped values.
    """
    if not isinstance(data, dict):
        raise ConfigValidationError(["config: expected a JSON object"])

    errors = [f"{key}: unknown key" for key in data if key not in TOP_LEVEL_KEYS]

    raw_kind = data.get("kind")
    try:
        kind = ExperimentKind(raw_kind)
    except ValueError:
        known = ", ".join(k.value for k in ExperimentKind)
        errors.append(f"kind: unknown experiment kind {raw_kind!r} (expected one of {known})")
        raise ConfigValidationError(errors)

    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        errors.append("seed: expected an integer")
    output_dir = data.get("output_dir", "runs")
    if not isinstance(output_dir, str) or not output_dir:
        errors.append("output_dir: expected a non-empty string")
    name = data.get("name", "")
    if not isinstance(name, str):
        errors.append("name: expected a string")

    parameters = _parse_dataclass(PARAMS_BY_KIND[kind], data.get("parameters", {}), "parameters", errors)
    if errors:
        raise ConfigValidationError(errors)

    return ExperimentConfig(kind=kind, parameters=parameters, seed=seed, output_dir=output_dir, name=name)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and parse a config file, applying the output-directory override.

    Raises:
        FileNotFoundError: If the file does not exist.
        ConfigValidationError: On invalid JSON or an invalid document.
    """
    source = Path(path)
    if not source.exists():
        raise FileNotFoundError(f"Config file not found: {source}")
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigValidationError([f"{source}: invalid JSON: {e}"]) from e

    config = parse_config(data)
    override = os.environ.get(OUTPUT_DIR_ENV)
    if override:
        logger.debug("Output directory overridden by %s=%s", OUTPUT_DIR_ENV, override)
        config.output_dir = override
    if not config.name:
        config.name = source.stem
    return config


def config_to_dict(config: ExperimentConfig) -> dict[str, t.Any]:
    """JSON-ready echo of a config, as stored in the run manifest."""
    return {
        "kind": config.kind.value,
        "name": config.name,
        "seed": config.seed,
        "output_dir": config.output_dir,
        "parameters": dataclasses.asdict(config.parameters),
    }


# ---- range checks ----

def _positive(errors: list[str], name: str, value: float) -> None:
    if not value > 0:
        errors.append(f"{name} must be positive")


def _at_least(errors: list[str], name: str, value: int, low: int) -> None:
    if value < low:
        errors.append(f"{name} must be >= {low}")


def _check_range(errors: list[str], name: str, pair: t.Sequence[float], nonnegative: bool = True) -> None:
    if len(pair) != 2:
        errors.append(f"{name} must have exactly two entries")
        return
    low, high = pair
    if low > high:
        errors.append(f"{name} must satisfy low <= high")
    if nonnegative and low < 0:
        errors.append(f"{name} must be nonnegative")


def _check_seeds(errors: list[str], seeds: t.Sequence[int]) -> None:
    if not seeds:
        errors.append("seeds must not be empty")
    if any(s < 0 for s in seeds):
        errors.append("seeds must be nonnegative")
    if len(set(seeds)) != len(seeds):
        errors.append("seeds must be distinct")


def _check_scalar_sweep(p: ScalarSweepParams, errors: list[str]) -> None:
    if not p.depths:
        errors.append("depths must not be empty")
    for depth in p.depths:
        _at_least(errors, "depth", depth, 1)
    if not p.lambdas:
        errors.append("lambdas must not be empty")
    if any(lam == 0 for lam in p.lambdas):
        errors.append("lambda must be nonzero")
    _positive(errors, "sigma", p.sigma)
    if not 0 < p.step_fraction <= 1:
        errors.append("step_fraction must lie in (0, 1]")
    _at_least(errors, "max_iters", p.max_iters, 1)


def _check_scalar_boundary(p: ScalarBoundaryParams, errors: list[str]) -> None:
    if not p.cases:
        errors.append("cases must not be empty")
    for case in p.cases:
        _at_least(errors, "depth", case.depth, 1)
        if case.lam == 0:
            errors.append("lambda must be nonzero")
        _positive(errors, "kappa", case.kappa)
    _positive(errors, "sigma", p.sigma)
    if not 0 < p.rel_tol < 1:
        errors.append("rel_tol must lie in (0, 1)")
    _at_least(errors, "probe_iterations", p.probe_iterations, 1)
    _positive(errors, "perturbation", p.perturbation)
    if not p.escape_radius > p.perturbation:
        errors.append("escape_radius must exceed perturbation")


def _check_matrix_common(
        p: MatrixSingleVsDoubleParams | MatrixRateCheckParams,
        errors: list[str],
) -> None:
    _at_least(errors, "width", p.width, 1)
    _at_least(errors, "depth", p.depth, 1)
    if p.eig_low > p.eig_high:
        errors.append("eig_low must not exceed eig_high")
    if p.eig_low == 0 and p.eig_high == 0:
        errors.append("eigenvalue range must not be {0}")
    _check_seeds(errors, p.seeds)
    _at_least(errors, "iterations", p.iterations, 1)


def _check_single_vs_double(p: MatrixSingleVsDoubleParams, errors: list[str]) -> None:
    _check_matrix_common(p, errors)
    if p.step is not None:
        _positive(errors, "step", p.step)


def _check_rate_check(p: MatrixRateCheckParams, errors: list[str]) -> None:
    _check_matrix_common(p, errors)
    if not p.eig_low > 0:
        errors.append("rate check needs a positive spectrum (eig_low > 0)")
    _at_least(errors, "modal_steps", p.modal_steps, 1)
    _at_least(errors, "check_iterations", p.check_iterations, 1)
    if not 0 < p.stable_factor < 1:
        errors.append("stable_factor must lie in (0, 1)")
    if not p.unstable_factor > 1:
        errors.append("unstable_factor must exceed 1")
    _positive(errors, "perturbation", p.perturbation)
    if not p.escape_radius > p.perturbation:
        errors.append("escape_radius must exceed perturbation")


def _check_fit_1d(p: Fit1DParams, errors: list[str]) -> None:
    _at_least(errors, "depth", p.depth, 1)
    _at_least(errors, "grid_size", p.grid_size, 2)
    _positive(errors, "step", p.step)
    _at_least(errors, "max_epochs", p.max_epochs, 0)
    if not p.bias_ranges:
        errors.append("bias_ranges must not be empty")
    for bias_range in p.bias_ranges:
        _check_range(errors, "bias range", bias_range)
    _check_range(errors, "weight_init_range", p.weight_init_range)
    _check_seeds(errors, p.seeds)
    _positive(errors, "success_loss", p.success_loss)
    _positive(errors, "lipschitz_cap", p.lipschitz_cap)


def _check_convexity(p: ConvexityAuditParams, errors: list[str]) -> None:
    _at_least(errors, "networks", p.networks, 1)
    _at_least(errors, "pairs", p.pairs, 1)
    _at_least(errors, "input_dim", p.input_dim, 1)
    _at_least(errors, "depth", p.depth, 0)
    if p.width is not None:
        _at_least(errors, "width", p.width, 1)
    _positive(errors, "parameter_scale", p.parameter_scale)
    _positive(errors, "domain_high", p.domain_high)
    if p.tolerance < 0:
        errors.append("tolerance must be nonnegative")


def _check_opt_cond(p: OptCondAuditParams, errors: list[str]) -> None:
    if p.target not in OPT_COND_TARGETS:
        errors.append(f"target must be one of {', '.join(OPT_COND_TARGETS)}")
    _at_least(errors, "grid_size", p.grid_size, 2)
    _at_least(errors, "depth", p.depth, 1)
    _positive(errors, "step", p.step)
    _at_least(errors, "max_epochs", p.max_epochs, 0)
    _check_seeds(errors, p.seeds)
    _check_range(errors, "bias_init_range", p.bias_init_range)
    _positive(errors, "gradient_tolerance", p.gradient_tolerance)


CHECKS: dict[ExperimentKind, t.Callable[[t.Any, list[str]], None]] = {
    ExperimentKind.SCALAR_SWEEP: _check_scalar_sweep,
    ExperimentKind.SCALAR_BOUNDARY: _check_scalar_boundary,
    ExperimentKind.MATRIX_SINGLE_VS_DOUBLE: _check_single_vs_double,
    ExperimentKind.MATRIX_RATE_CHECK: _check_rate_check,
    ExperimentKind.FIT_1D: _check_fit_1d,
    ExperimentKind.CONVEXITY_AUDIT: _check_convexity,
    ExperimentKind.OPT_COND_AUDIT: _check_opt_cond,
}


def _output_dir_violation(output_dir: str) -> t.Optional[str]:
    """Writability of the directory, or of its nearest existing ancestor."""
    path = Path(output_dir).resolve()
    probe = path
    while not probe.exists():
        if probe.parent == probe:
            break
        probe = probe.parent
    if probe.exists() and not probe.is_dir():
        return f"output_dir is not a directory: {probe}"
    if not os.access(probe, os.W_OK):
        return f"output_dir is not writable: {path}"
    return None


def validate(config: ExperimentConfig) -> list[str]:
    """Range violations of a parsed config; empty iff ``run`` would pass its precondition checks."""
    errors: list[str] = []
    if config.seed < 0:
        errors.append("seed must be nonnegative")
    CHECKS[config.kind](config.parameters, errors)
    location = _output_dir_violation(config.output_dir)
    if location:
        errors.append(location)
    return errors


def validate_file(path: str | Path) -> list[str]:
    """Parse and range-check a config file, returning every violation found."""
    try:
        config = load_config(path)
    except ConfigValidationError as e:
        return e.violations
    return validate(config)
