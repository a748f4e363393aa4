"""Experiment kinds: sweep plans, artifact layout and the ``run`` entry point.

Each kind turns its parameters into a ``SweepPlan`` of independent tasks
followed by one ``summary`` task that depends on all of them. Results are
written in plan order, so artifacts do not depend on how the executor
scheduled the tasks.
"""
from __future__ import annotations

import asyncio
from datetime import datetime, timezone
import logging
from pathlib import Path
import typing as t

from lab.artifacts import ArtifactWriter, write_manifest
from lab.config import ConfigValidationError, config_to_dict, validate
from lab.executor import ProgressCallback, execute_sweep, validate_sweep_plan
from lab.models import (
    ConvexityAuditParams,
    ExperimentConfig,
    Fit1DParams,
    FitResult,
    MatrixRateCheckParams,
    MatrixSingleVsDoubleParams,
    OptCondAuditParams,
    RunManifest,
    ScalarBoundaryParams,
    ScalarSweepParams,
    SweepPlan,
    SweepTask,
)
from numerics_core.errors import NumericalError

logger = logging.getLogger(__name__)

SUMMARY_TASK = "summary"
CONVEXITY_BLOCK = 10


def _with_summary(
        tasks: list[SweepTask],
        summary_name: str,
        argument: str,
        description: str,
        **extra: t.Any,
) -> SweepPlan:
    summary = SweepTask(
        id=SUMMARY_TASK,
        task_name=summary_name,
        arguments={argument: [f"${task.id}" for task in tasks], **extra},
        depends_on=[task.id for task in tasks],
    )
    return SweepPlan(tasks=[*tasks, summary], description=description)


def _case_results(plan: SweepPlan, results: dict[str, t.Any]) -> list[t.Any]:
    return [results[task.id] for task in plan.tasks if task.id != SUMMARY_TASK]


def _tag(value: float) -> str:
    """Filename-safe rendering of a number."""
    return f"{value:g}".replace("-", "m").replace(".", "p")


# ---- ScalarSweep ----

def plan_scalar_sweep(config: ExperimentConfig) -> SweepPlan:
    p: ScalarSweepParams = config.parameters
    tasks = [
        SweepTask(
            id=f"case{i + 1}",
            task_name="scalar_case",
            arguments={
                "depth": depth, "lam": lam, "sigma": p.sigma,
                "step_fraction": p.step_fraction, "max_iters": p.max_iters,
            },
        )
        for i, (depth, lam) in enumerate((d, lam) for d in p.depths for lam in p.lambdas)
    ]
    return _with_summary(
        tasks, "summarize_scalar_sweep", "cases",
        f"Identity-initialized scalar chains over {len(p.depths)} depths x {len(p.lambdas)} targets",
    )


def write_scalar_sweep(
        config: ExperimentConfig,
        plan: SweepPlan,
        results: dict[str, t.Any],
        writer: ArtifactWriter,
) -> None:
    p: ScalarSweepParams = config.parameters
    cases = _case_results(plan, results)
    writer.write_csv(
        "scalar_sweep.csv",
        ["L", "lambda", "step", "rate", "outcome", "iterations", "final_error", "envelope_violations",
         "max_abs_weight", "double_step", "double_outcome", "double_final_error"],
        (
            [c.depth, c.lam, c.step, c.rate, c.outcome, c.iterations, c.final_error, c.envelope_violations,
             c.max_abs_weight, c.double_step, c.double_outcome, c.double_final_error]
            for c in cases
        ),
    )
    if p.write_trajectories:
        for c in cases:
            writer.write_csv(
                f"trajectories/L{c.depth}_lambda{_tag(c.lam)}.csv",
                ["iter", "error"],
                enumerate(c.errors),
                role="curve",
            )


# ---- ScalarBoundary ----

def plan_scalar_boundary(config: ExperimentConfig) -> SweepPlan:
    p: ScalarBoundaryParams = config.parameters
    tasks = [
        SweepTask(
            id=f"case{i + 1}",
            task_name="boundary_case",
            arguments={
                "depth": case.depth, "lam": case.lam, "kappa": case.kappa, "sigma": p.sigma,
                "rel_tol": p.rel_tol, "probe_iterations": p.probe_iterations,
                "perturbation": p.perturbation, "escape_radius": p.escape_radius,
            },
        )
        for i, case in enumerate(p.cases)
    ]
    return _with_summary(tasks, "summarize_boundaries", "cases", f"Bisect {len(tasks)} stability boundaries")


def write_scalar_boundary(
        config: ExperimentConfig,
        plan: SweepPlan,
        results: dict[str, t.Any],
        writer: ArtifactWriter,
) -> None:
    writer.write_csv(
        "boundary.csv",
        ["L", "lambda", "kappa", "predicted", "empirical", "relative_gap", "probes"],
        (
            [c.depth, c.lam, c.kappa, c.predicted, c.empirical, c.relative_gap, c.probes]
            for c in _case_results(plan, results)
        ),
        role="boundary",
    )


# ---- MatrixSingleVsDouble ----

def plan_single_vs_double(config: ExperimentConfig) -> SweepPlan:
    p: MatrixSingleVsDoubleParams = config.parameters
    tasks = [
        SweepTask(
            id=f"seed{seed}",
            task_name="single_vs_double",
            arguments={
                "root_seed": config.seed, "seed": seed, "width": p.width, "depth": p.depth,
                "eig_low": p.eig_low, "eig_high": p.eig_high, "iterations": p.iterations,
                "orthogonal": p.orthogonal, "step": p.step,
            },
        )
        for seed in p.seeds
    ]
    return _with_summary(
        tasks, "summarize_single_vs_double", "runs",
        f"Single vs double residual network, n={p.width}, L={p.depth}, {len(tasks)} seeds",
    )


def _padded(values: list[float], length: int) -> list[t.Optional[float]]:
    return [*values, *([None] * (length - len(values)))]


def write_single_vs_double(
        config: ExperimentConfig,
        plan: SweepPlan,
        results: dict[str, t.Any],
        writer: ArtifactWriter,
) -> None:
    runs = _case_results(plan, results)
    for run in runs:
        length = max(len(run.single_losses), len(run.double_losses))
        writer.write_csv(
            f"losses/seed{run.seed}.csv",
            ["iter", "loss_single", "loss_double"],
            (
                [k, s, d]
                for k, (s, d) in enumerate(zip(_padded(run.single_losses, length), _padded(run.double_losses, length)))
            ),
            role="curve",
        )
    writer.write_csv(
        "single_vs_double.csv",
        ["seed", "spectral_radius", "step", "single_final", "double_final", "single_outcome", "double_outcome"],
        (
            [r.seed, r.spectral_radius, r.step, r.single_final, r.double_final, r.single_outcome, r.double_outcome]
            for r in runs
        ),
    )


# ---- MatrixRateCheck ----

def plan_rate_check(config: ExperimentConfig) -> SweepPlan:
    p: MatrixRateCheckParams = config.parameters
    tasks = [
        SweepTask(
            id=f"seed{seed}",
            task_name="rate_check",
            arguments={
                "root_seed": config.seed, "seed": seed, "width": p.width, "depth": p.depth,
                "eig_low": p.eig_low, "eig_high": p.eig_high, "iterations": p.iterations,
                "modal_steps": p.modal_steps, "stable_factor": p.stable_factor,
                "unstable_factor": p.unstable_factor, "perturbation": p.perturbation,
                "escape_radius": p.escape_radius, "check_iterations": p.check_iterations,
            },
        )
        for seed in p.seeds
    ]
    return _with_summary(
        tasks, "summarize_rate_checks", "runs",
        f"Safe-step convergence and threshold instability, n={p.width}, L={p.depth}, {len(tasks)} seeds",
    )


def write_rate_check(
        config: ExperimentConfig,
        plan: SweepPlan,
        results: dict[str, t.Any],
        writer: ArtifactWriter,
) -> None:
    runs = _case_results(plan, results)
    for run in runs:
        writer.write_csv(f"losses/seed{run.seed}.csv", ["iter", "loss"], enumerate(run.losses), role="curve")
    writer.write_csv(
        "rate_check.csv",
        ["seed", "safe_step", "threshold", "root_error", "stable_outcome", "unstable_outcome",
         "unstable_iterations", "modal_deviation"],
        (
            [r.seed, r.safe_step, r.threshold, r.root_error, r.stable_outcome, r.unstable_outcome,
             r.unstable_iterations, r.modal_deviation]
            for r in runs
        ),
    )


# ---- Fit1D ----

def plan_fit_1d(config: ExperimentConfig) -> SweepPlan:
    p: Fit1DParams = config.parameters
    tasks = [
        SweepTask(
            id=f"range{r + 1}_seed{seed}",
            task_name="fit_1d",
            arguments={
                "root_seed": config.seed, "seed": seed, "bias_range": list(bias_range),
                "depth": p.depth, "grid_size": p.grid_size, "step": p.step,
                "max_epochs": p.max_epochs, "weight_init_range": list(p.weight_init_range),
                "projection": p.projection, "keep_model": p.save_models,
            },
        )
        for r, bias_range in enumerate(p.bias_ranges)
        for seed in p.seeds
    ]
    return _with_summary(
        tasks, "summarize_fits", "runs",
        f"Fit the zigzag target with {len(p.bias_ranges)} bias ranges x {len(p.seeds)} seeds",
        success_loss=p.success_loss,
        lipschitz_cap=p.lipschitz_cap,
    )


def write_fit_1d(
        config: ExperimentConfig,
        plan: SweepPlan,
        results: dict[str, t.Any],
        writer: ArtifactWriter,
) -> None:
    p: Fit1DParams = config.parameters
    runs: list[FitResult] = _case_results(plan, results)
    writer.write_csv(
        "fit_1d.csv",
        ["bias_low", "bias_high", "seed", "final_loss", "lipschitz", "diverged", "epochs"],
        (
            [r.bias_range[0], r.bias_range[1], r.seed, r.final_loss, r.lipschitz, r.diverged, max(len(r.losses) - 1, 0)]
            for r in runs
        ),
    )

    for bias_range in p.bias_ranges:
        group = [r for r in runs if r.bias_range == list(bias_range)]
        tag = f"bias_{_tag(bias_range[0])}_{_tag(bias_range[1])}"
        grid = next((r for r in group if not r.diverged), None)
        if grid is not None:
            estimates = [r.estimate if not r.diverged else [None] * len(grid.x) for r in group]
            writer.write_csv(
                f"fits/{tag}.csv",
                ["x", "target", *[f"estimate_seed{r.seed}" for r in group]],
                ([x, y, *[e[i] for e in estimates]] for i, (x, y) in enumerate(zip(grid.x, grid.target))),
                role="curve",
            )
        for r in group:
            if r.losses:
                writer.write_csv(f"losses/{tag}_seed{r.seed}.csv", ["epoch", "loss"], enumerate(r.losses), role="curve")
            if r.model is not None:
                writer.write_json(f"models/{tag}_seed{r.seed}.json", r.model, role="model")


# ---- ConvexityAudit ----

def plan_convexity(config: ExperimentConfig) -> SweepPlan:
    p: ConvexityAuditParams = config.parameters
    tasks = [
        SweepTask(
            id=f"block{start // CONVEXITY_BLOCK + 1}",
            task_name="convexity_batch",
            arguments={
                "root_seed": config.seed, "start": start,
                "count": min(CONVEXITY_BLOCK, p.networks - start), "pairs": p.pairs,
                "input_dim": p.input_dim, "depth": p.depth, "width": p.width,
                "parameter_scale": p.parameter_scale, "domain_high": p.domain_high,
            },
        )
        for start in range(0, p.networks, CONVEXITY_BLOCK)
    ]
    return _with_summary(
        tasks, "summarize_convexity", "batches",
        f"Midpoint convexity of {p.networks} random networks on {p.pairs} point pairs each",
        tolerance=p.tolerance,
    )


def write_convexity(
        config: ExperimentConfig,
        plan: SweepPlan,
        results: dict[str, t.Any],
        writer: ArtifactWriter,
) -> None:
    writer.write_csv(
        "convexity.csv",
        ["network", "worst_gap", "monotone"],
        (
            [batch.start + i, gap, monotone]
            for batch in _case_results(plan, results)
            for i, (gap, monotone) in enumerate(zip(batch.gaps, batch.monotone))
        ),
    )


# ---- OptCondAudit ----

def plan_opt_cond(config: ExperimentConfig) -> SweepPlan:
    p: OptCondAuditParams = config.parameters
    tasks = [
        SweepTask(
            id=f"seed{seed}",
            task_name="optimality_audit",
            arguments={
                "root_seed": config.seed, "seed": seed, "target": p.target, "slope": p.slope,
                "grid_size": p.grid_size, "depth": p.depth, "step": p.step,
                "max_epochs": p.max_epochs, "bias_init_range": list(p.bias_init_range),
                "projection": p.projection,
            },
        )
        for seed in p.seeds
    ]
    return _with_summary(
        tasks, "summarize_optimality", "runs",
        f"Optimality residuals of {len(tasks)} trained pair(s) on the {p.target} target",
        gradient_tolerance=p.gradient_tolerance,
    )


def write_opt_cond(
        config: ExperimentConfig,
        plan: SweepPlan,
        results: dict[str, t.Any],
        writer: ArtifactWriter,
) -> None:
    runs = _case_results(plan, results)
    writer.write_csv(
        "optimality.csv",
        ["seed", "final_loss", "gradient_norm", "largest_residual", "threshold", "bias_formula_error"],
        ([r.seed, r.final_loss, r.gradient_norm, r.largest_residual, r.threshold, r.bias_formula_error] for r in runs),
    )
    writer.write_csv(
        "optimality_residuals.csv",
        ["seed", "net", "block", "norm"],
        (
            [r.seed, net, "c" if i == len(norms) - 1 else f"W{i + 1}", value]
            for r in runs
            for net, norms in (("plus", r.plus_residuals), ("minus", r.minus_residuals))
            for i, value in enumerate(norms)
        ),
    )
    for r in runs:
        writer.write_csv(f"losses/seed{r.seed}.csv", ["epoch", "loss"], enumerate(r.losses), role="curve")


# ---- running ----

def build_plan(config: ExperimentConfig) -> SweepPlan:
    from registry import EXPERIMENT_REGISTRY
    return EXPERIMENT_REGISTRY[config.kind].build_plan(config)


def run_dir_for(config: ExperimentConfig) -> Path:
    return Path(config.output_dir) / (config.name or config.kind.value)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


async def run_experiment(
        config: ExperimentConfig,
        progress_callback: t.Optional[ProgressCallback] = None,
        max_concurrent: t.Optional[int] = None,
) -> RunManifest:
    """Validate, execute and record one experiment.

    Writes every CSV into ``output_dir/name`` and the manifest last.

    Raises:
        ConfigValidationError: If ``validate`` reports violations.
        RuntimeError: If a task fails; the message names the run and the task.
    """
    from registry import EXPERIMENT_REGISTRY, TASK_REGISTRY

    violations = validate(config)
    if violations:
        raise ConfigValidationError(violations)

    experiment = EXPERIMENT_REGISTRY[config.kind]
    plan = experiment.build_plan(config)
    plan_errors = validate_sweep_plan(plan, TASK_REGISTRY)
    if plan_errors:
        raise RuntimeError(f"Invalid sweep plan for '{config.name}': {'; '.join(plan_errors)}")

    started = _now()
    logger.info("Running %s (%s): %d tasks", config.name, config.kind.value, len(plan.tasks))
    try:
        results = await execute_sweep(plan, progress_callback=progress_callback, max_concurrent=max_concurrent)
    except RuntimeError as e:
        raise RuntimeError(f"Run '{config.name}' ({config.kind.value}) failed: {e}") from e

    run_dir = run_dir_for(config)
    writer = ArtifactWriter(run_dir)
    experiment.write_artifacts(config, plan, results, writer)
    manifest = RunManifest(
        config=config_to_dict(config),
        seed=config.seed,
        started_at=started,
        finished_at=_now(),
        artifacts=writer.records,
        summary=results[SUMMARY_TASK],
    )
    path = write_manifest(run_dir, manifest)
    logger.info("Wrote %d artifacts and %s", len(manifest.artifacts), path)
    return manifest


def run(config: ExperimentConfig, max_concurrent: t.Optional[int] = None) -> RunManifest:
    """Synchronous wrapper around ``run_experiment``."""
    return asyncio.run(run_experiment(config, max_concurrent=max_concurrent))


def is_numeric_failure(error: BaseException) -> bool:
    """True when a failed run traces back to a ``NumericalError``."""
    seen: t.Optional[BaseException] = error
    while seen is not None:
        if isinstance(seen, NumericalError):
            return True
        seen = seen.__cause__
    return False
