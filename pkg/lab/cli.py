"""Command line for running stability experiments.

Subcommands: ``run``, ``validate``, ``plotdata``, ``kinds`` and ``recipe``.
Exit codes are 0 on success, 2 on a validation failure and 1 when a run
fails numerically.
"""
import asyncio
from dataclasses import asdict
import json
import logging
import typing as t

import click
from rich.json import JSON
from rich.logging import RichHandler
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from lab.config import ConfigValidationError, config_to_dict, load_config, validate
from lab.experiments import build_plan, is_numeric_failure, run_dir_for, run_experiment
from lab.models import ExperimentConfig, SweepPlan, SweepTask
from lab.plotdata import DigestMismatchError, emit_plotdata
from lab.utils import console, err_console, expand_config_paths
from numerics_core.errors import NumericalError

EXIT_VALIDATION = 2
EXIT_NUMERIC = 1

logger = logging.getLogger("lab")


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def format_result_for_display(result: t.Any) -> None:
    """Print a task result as JSON; large per-step series are left to the CSVs."""
    if hasattr(result, "__dataclass_fields__"):
        data = {k: v for k, v in asdict(result).items() if not isinstance(v, (list, dict))}
        console.print("    [dim]Result:[/dim]")
        console.print(JSON(json.dumps(data, default=str)))
    elif isinstance(result, dict):
        console.print("    [dim]Result:[/dim]")
        console.print(JSON(json.dumps(result, default=str)))


def create_progress_callback(
        verbose: bool,
        progress: t.Optional[Progress] = None,
        progress_task: t.Optional[int] = None,
) -> t.Callable[[int, int, SweepTask, t.Optional[t.Any]], None]:
    """Create a progress callback: per-task lines when verbose, a spinner otherwise."""
    def progress_callback(current: int, total: int, task: SweepTask, result: t.Optional[t.Any]) -> None:
        if verbose:
            if result is None:
                console.print(f"  [{current}/{total}] ▶ Executing: {task.id} ({task.task_name})")
            else:
                console.print(f"  [{current}/{total}] ✓ Completed: {task.id} ({task.task_name})")
                format_result_for_display(result)
        elif progress is not None and progress_task is not None and result is not None:
            progress.update(progress_task, description=f"[{current}/{total}] {task.id}")

    return progress_callback


def _plan_table(plan: SweepPlan, verbose: bool) -> Table:
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Task", style="cyan")
    table.add_column("Function", style="yellow")
    table.add_column("Dependencies", style="blue")
    if verbose:
        table.add_column("Arguments", style="white")

    for task in plan.tasks:
        deps = ", ".join(task.depends_on) if task.depends_on else "(none)"
        if len(task.depends_on) > 4:
            deps = f"{', '.join(task.depends_on[:3])}, ... ({len(task.depends_on)} tasks)"
        row = [task.id, task.task_name, deps]
        if verbose:
            args_str = json.dumps(task.arguments)
            row.append(args_str if len(args_str) <= 60 else args_str[:60] + "...")
        table.add_row(*row)
    return table


def _summary_table(summary: dict[str, t.Any]) -> Table:
    table = Table(show_header=False)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green", justify="right")
    for key, value in summary.items():
        shown = json.dumps(value, default=str) if isinstance(value, (dict, list)) else str(value)
        table.add_row(key, shown)
    return table


def _load_or_exit(path: str) -> ExperimentConfig:
    try:
        config = load_config(path)
    except (FileNotFoundError, ConfigValidationError) as e:
        violations = getattr(e, "violations", [str(e)])
        err_console.print(f"[red]❌ Invalid config {path}:[/red]")
        for violation in violations:
            err_console.print(f"  • {violation}")
        raise SystemExit(EXIT_VALIDATION)

    violations = validate(config)
    if violations:
        err_console.print(f"[red]❌ Config validation failed for {path}:[/red]")
        for violation in violations:
            err_console.print(f"  • {violation}")
        raise SystemExit(EXIT_VALIDATION)
    return config


async def async_main(
        config_paths: tuple[str, ...],
        dry_run: bool,
        verbose: bool = False,
        max_concurrent: t.Optional[int] = None,
) -> None:
    """Validate every config, then run them one after another.

    Args:
        config_paths: Config files or directories of configs
        dry_run: If True, show the resolved config and plan without executing
        verbose: If True, show per-task progress and results
        max_concurrent: Optional cap on tasks running at once within a run
    """
    configs = [(path, _load_or_exit(path)) for path in expand_config_paths(config_paths)]

    for path, config in configs:
        plan = build_plan(config)
        console.print(
            Panel.fit(
                f"[bold blue]{config.kind.value}[/bold blue] [dim]{path}[/dim]\n"
                f"{plan.description}\n"
                f"Seed: [cyan]{config.seed}[/cyan]  Tasks: [cyan]{len(plan.tasks)}[/cyan]  "
                f"Output: [cyan]{run_dir_for(config)}[/cyan]",
                border_style="blue",
            )
        )

        if dry_run:
            console.print("[dim]Resolved config (JSON):[/dim]")
            console.print(JSON(json.dumps(config_to_dict(config), indent=2)))
            console.print(_plan_table(plan, verbose))
            console.print("[yellow]Dry run mode - execution skipped[/yellow]")
            continue

        try:
            if verbose:
                console.print("\n[bold green]Executing sweep...[/bold green]")
                manifest = await run_experiment(
                    config,
                    progress_callback=create_progress_callback(verbose),
                    max_concurrent=max_concurrent,
                )
            else:
                with Progress(
                    SpinnerColumn(),
                    TextColumn("[progress.description]{task.description}"),
                    console=console,
                    transient=True,
                ) as progress:
                    progress_task = progress.add_task(f"Running {len(plan.tasks)} tasks...", total=None)
                    manifest = await run_experiment(
                        config,
                        progress_callback=create_progress_callback(verbose, progress, progress_task),
                        max_concurrent=max_concurrent,
                    )
        except ConfigValidationError as e:
            err_console.print(f"[red]❌ Config validation failed for {path}:[/red]")
            for violation in e.violations:
                err_console.print(f"  • {violation}")
            raise SystemExit(EXIT_VALIDATION)
        except (RuntimeError, NumericalError) as e:
            kind = "Numerical failure" if is_numeric_failure(e) else "Execution failed"
            err_console.print(f"[red]❌ {kind}:[/red] {e}")
            raise SystemExit(EXIT_NUMERIC)

        console.print(_summary_table(manifest.summary))
        console.print(
            f"[green]✓[/green] {len(manifest.artifacts)} artifact(s) in {run_dir_for(config)}"
        )


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def cli() -> None:
    """Gradient-descent stability experiments for deep linear and convex residual networks."""
    pass


@cli.command()
@click.argument(
    "configs",
    nargs=-1,
    type=click.Path(exists=True),
    required=True,
)
@click.option(
    "--verbose",
    "-v",
    is_flag=True,
    help="Print per-task progress, results and debug logging.",
)
@click.option(
    "--dry-run",
    is_flag=True,
    help="Validate and show the sweep plan without executing.",
)
@click.option(
    "--max-concurrent",
    type=click.IntRange(min=1),
    default=None,
    help="Maximum number of tasks running at once (default: unlimited).",
)
def run(configs: tuple[str, ...], verbose: bool, dry_run: bool, max_concurrent: t.Optional[int]) -> None:
    """Run one or more experiment configs (files or directories of *.json)."""
    configure_logging(verbose)
    asyncio.run(async_main(configs, dry_run=dry_run, verbose=verbose, max_concurrent=max_concurrent))


@cli.command(name="validate")
@click.argument(
    "configs",
    nargs=-1,
    type=click.Path(exists=True),
    required=True,
)
def validate_command(configs: tuple[str, ...]) -> None:
    """Check configs and list every violation."""
    failed = False
    for path in expand_config_paths(configs):
        try:
            violations = validate(load_config(path))
        except ConfigValidationError as e:
            violations = e.violations
        if violations:
            failed = True
            console.print(f"[red]❌ {path}[/red]")
            for violation in violations:
                console.print(f"  • {violation}")
        else:
            console.print(f"[green]✓[/green] {path}")
    if failed:
        raise SystemExit(EXIT_VALIDATION)


@cli.command()
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--verbose", "-v", is_flag=True, help="Show debug logging.")
def plotdata(manifest: str, verbose: bool) -> None:
    """Write long-format plot tables for a finished run."""
    configure_logging(verbose)
    try:
        updated = emit_plotdata(manifest)
    except (DigestMismatchError, ValueError, FileNotFoundError) as e:
        err_console.print(f"[red]Error:[/red] {e}")
        raise SystemExit(EXIT_VALIDATION)

    emitted = [r.path for r in updated.artifacts if r.role == "plotdata"]
    for path in emitted:
        console.print(f"  [green]✓[/green] {path}")
    console.print(f"[green]{len(emitted)} plot table(s) written[/green]")


@cli.command()
@click.option("--tasks", "show_tasks", is_flag=True, help="List registered task functions as JSON.")
def kinds(show_tasks: bool) -> None:
    """List experiment kinds."""
    from registry import list_experiments, list_task_schemas

    if show_tasks:
        console.print(JSON(json.dumps(list_task_schemas(), indent=2, default=str)))
        return

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Kind", style="cyan")
    table.add_column("Recipe", style="yellow")
    table.add_column("Description", style="white")
    for entry in list_experiments():
        table.add_row(entry["kind"], entry["recipe"], entry["description"])
    console.print(table)


@cli.command()
@click.argument("name", required=False)
def recipe(name: t.Optional[str]) -> None:
    """Print a bundled recipe, or list them when NAME is omitted."""
    from recipes import list_recipes, load_recipe

    if name is None:
        for recipe_name in list_recipes():
            console.print(recipe_name)
        return
    try:
        text = load_recipe(name)
    except FileNotFoundError:
        err_console.print(f"[red]Error:[/red] Unknown recipe '{name}'. Available: {', '.join(list_recipes())}")
        raise SystemExit(EXIT_VALIDATION)
    click.echo(text, nl=False)


if __name__ == "__main__":
    cli()
