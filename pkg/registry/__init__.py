# -*- coding: utf-8 -*-
"""Registries of task functions and experiment kinds."""
import inspect
import typing as t

from lab import experiments, tasks
from lab.models import ExperimentDefinition, ExperimentKind

# Task registry mapping task names to the functions the executor runs
TASK_REGISTRY: dict[str, t.Callable[..., t.Any]] = {
    "scalar_case": tasks.scalar_case,
    "boundary_case": tasks.boundary_case,
    "single_vs_double": tasks.single_vs_double,
    "rate_check": tasks.rate_check,
    "fit_1d": tasks.fit_1d,
    "convexity_batch": tasks.convexity_batch,
    "optimality_audit": tasks.optimality_audit,
    "summarize_scalar_sweep": tasks.summarize_scalar_sweep,
    "summarize_boundaries": tasks.summarize_boundaries,
    "summarize_single_vs_double": tasks.summarize_single_vs_double,
    "summarize_rate_checks": tasks.summarize_rate_checks,
    "summarize_fits": tasks.summarize_fits,
    "summarize_convexity": tasks.summarize_convexity,
    "summarize_optimality": tasks.summarize_optimality,
}

EXPERIMENT_REGISTRY: dict[ExperimentKind, ExperimentDefinition] = {
    ExperimentKind.SCALAR_SWEEP: ExperimentDefinition(
        kind=ExperimentKind.SCALAR_SWEEP,
        description="Identity-initialized scalar chains across depths and targets, checked against the rate envelope",
        build_plan=experiments.plan_scalar_sweep,
        write_artifacts=experiments.write_scalar_sweep,
        recipe="scalar_sweep",
    ),
    ExperimentKind.SCALAR_BOUNDARY: ExperimentDefinition(
        kind=ExperimentKind.SCALAR_BOUNDARY,
        description="Bisect the stability boundary of disproportionate equilibria",
        build_plan=experiments.plan_scalar_boundary,
        write_artifacts=experiments.write_scalar_boundary,
        recipe="scalar_boundary",
    ),
    ExperimentKind.MATRIX_SINGLE_VS_DOUBLE: ExperimentDefinition(
        kind=ExperimentKind.MATRIX_SINGLE_VS_DOUBLE,
        description="Single vs double linear residual network on targets with negative eigenvalues",
        build_plan=experiments.plan_single_vs_double,
        write_artifacts=experiments.write_single_vs_double,
        recipe="matrix_single_vs_double",
    ),
    ExperimentKind.MATRIX_RATE_CHECK: ExperimentDefinition(
        kind=ExperimentKind.MATRIX_RATE_CHECK,
        description="Convergence at the safe step and instability past the balanced-point threshold",
        build_plan=experiments.plan_rate_check,
        write_artifacts=experiments.write_rate_check,
        recipe="matrix_rate_check",
    ),
    ExperimentKind.FIT_1D: ExperimentDefinition(
        kind=ExperimentKind.FIT_1D,
        description="Fit a one-dimensional zigzag with a convex-concave residual pair",
        build_plan=experiments.plan_fit_1d,
        write_artifacts=experiments.write_fit_1d,
        recipe="fit_1d",
    ),
    ExperimentKind.CONVEXITY_AUDIT: ExperimentDefinition(
        kind=ExperimentKind.CONVEXITY_AUDIT,
        description="Midpoint convexity and trunk monotonicity of random feasible networks",
        build_plan=experiments.plan_convexity,
        write_artifacts=experiments.write_convexity,
        recipe="convexity_audit",
    ),
    ExperimentKind.OPT_COND_AUDIT: ExperimentDefinition(
        kind=ExperimentKind.OPT_COND_AUDIT,
        description="First-order optimality residuals of a trained pair",
        build_plan=experiments.plan_opt_cond,
        write_artifacts=experiments.write_opt_cond,
        recipe="opt_cond_audit",
    ),
}


def list_experiments() -> list[dict[str, str]]:
    """Kinds with their descriptions, in registry order."""
    return [
        {"kind": kind.value, "description": definition.description, "recipe": definition.recipe}
        for kind, definition in EXPERIMENT_REGISTRY.items()
    ]


def list_task_schemas() -> list[dict[str, t.Any]]:
    """Collect the name, description and parameters of every registered task."""
    schemas = []
    for name, func in TASK_REGISTRY.items():
        doc = inspect.getdoc(func) or ""
        parameters = {}
        for param in inspect.signature(func).parameters.values():
            entry: dict[str, t.Any] = {"annotation": str(param.annotation)}
            if param.default is not inspect.Parameter.empty:
                entry["default"] = param.default
            parameters[param.name] = entry
        schemas.append({
            "name": name,
            "description": doc.splitlines()[0] if doc else "",
            "parameters": parameters,
        })
    return schemas
