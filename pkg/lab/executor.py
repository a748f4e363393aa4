"""Execution engine for sweep plans.

Runs the tasks of a ``SweepPlan`` with dependency resolution, variable
substitution and registered task functions executed in worker threads.
"""
import asyncio
import logging
import typing as t

from lab.models import SweepPlan, SweepTask

logger = logging.getLogger(__name__)

ProgressCallback = t.Callable[[int, int, SweepTask, t.Optional[t.Any]], None]


async def execute_sweep(
    plan: SweepPlan,
    progress_callback: t.Optional[ProgressCallback] = None,
    max_concurrent: t.Optional[int] = None,
) -> dict[str, t.Any]:
    """Execute a sweep plan and return the results.

    Tasks with satisfied dependencies are executed in parallel batches.

    Args:
        plan: The sweep plan to execute
        progress_callback: Optional callback called before and after each task
                          with (current_task_num, total_tasks, task, result).
                          - Before execution: result is None
                          - After execution: result contains the task's output
        max_concurrent: Optional limit on the number of tasks running at once.
                       If None (default), all ready tasks run in parallel.

    Returns:
        Dictionary mapping task IDs to their results

    Raises:
        RuntimeError: If a task fails, is not registered, or the plan cannot make progress
    """
    results: dict[str, t.Any] = {}
    completed: set[str] = set()
    semaphore = asyncio.Semaphore(max_concurrent) if max_concurrent else None

    while len(completed) < len(plan.tasks):
        ready: list[SweepTask] = [
            task for task in plan.tasks
            if task.id not in completed and all(dep in completed for dep in task.depends_on)
        ]

        if not ready:
            remaining = [task.id for task in plan.tasks if task.id not in completed]
            raise RuntimeError(
                f"Cannot execute plan: circular dependency or missing tasks. "
                f"Remaining tasks: {remaining}"
            )

        logger.debug("Running batch of %d task(s)", len(ready))
        batch = [
            _execute_task(
                task=task,
                results=results,
                progress_callback=progress_callback,
                total_tasks=len(plan.tasks),
                task_number=len(completed) + i + 1,
                semaphore=semaphore,
            )
            for i, task in enumerate(ready)
        ]
        batch_results = await asyncio.gather(*batch)

        for task, result in zip(ready, batch_results):
            results[task.id] = result
            completed.add(task.id)
            if progress_callback:
                progress_callback(len(completed), len(plan.tasks), task, result)

    return results


async def _execute_task(
    task: SweepTask,
    results: dict[str, t.Any],
    progress_callback: t.Optional[ProgressCallback],
    total_tasks: int,
    task_number: int,
    semaphore: t.Optional[asyncio.Semaphore],
) -> t.Any:
    """Execute a single task, potentially in parallel with other tasks.

    Raises:
        RuntimeError: If the task function is not registered or raises
    """
    from registry import TASK_REGISTRY

    if semaphore:
        await semaphore.acquire()

    try:
        if progress_callback:
            progress_callback(task_number, total_tasks, task, None)

        func = TASK_REGISTRY.get(task.task_name)
        if func is None:
            raise RuntimeError(
                f"Task not found: {task.task_name}. "
                f"Available tasks: {sorted(TASK_REGISTRY.keys())}"
            )

        try:
            resolved_args = _resolve_arguments(task.arguments, results)
            if asyncio.iscoroutinefunction(func):
                return await func(**resolved_args)
            # numerical work runs in a worker thread
            return await asyncio.to_thread(func, **resolved_args)
        except Exception as e:
            raise RuntimeError(
                f"Error executing task '{task.id}' ({task.task_name}): {e}"
            ) from e
    finally:
        if semaphore:
            semaphore.release()


def _resolve_arguments(
    arguments: dict[str, t.Any],
    results: dict[str, t.Any],
) -> dict[str, t.Any]:
    """Resolve variable references in arguments.

    Supports:
    - $task - entire task output
    - $task.field - specific field from task output
    - $task.field.nested - nested field access
    - lists of any of the above
    """
    resolved = {}

    for key, value in arguments.items():
        if isinstance(value, str) and value.startswith("$"):
            resolved[key] = _resolve_variable(value, results)
        elif isinstance(value, list):
            resolved[key] = [
                _resolve_variable(item, results) if isinstance(item, str) and item.startswith("$")
                else item
                for item in value
            ]
        else:
            resolved[key] = value

    return resolved


def _resolve_variable(var_ref: str, results: dict[str, t.Any]) -> t.Any:
    """Resolve a single ``$task.field`` reference.

    Raises:
        KeyError: If the task or a field is missing
        TypeError: If a field is requested from a value that has none
    """
    parts = var_ref[1:].split(".")
    task_id = parts[0]

    if task_id not in results:
        raise KeyError(f"Task '{task_id}' not found in results")

    value = results[task_id]
    for field in parts[1:]:
        if isinstance(value, dict):
            if field not in value:
                raise KeyError(f"Field '{field}' not found in task '{task_id}' result")
            value = value[field]
        elif hasattr(value, "__dataclass_fields__"):
            if not hasattr(value, field):
                raise KeyError(f"Field '{field}' not found in task '{task_id}' result")
            value = getattr(value, field)
        else:
            raise TypeError(
                f"Cannot access field '{field}' on non-dict/non-dataclass value from task '{task_id}'"
            )

    return value


def validate_sweep_plan(plan: SweepPlan, available_tasks: t.Iterable[str]) -> list[str]:
    """Check task names, duplicate ids and dependencies.

    Returns:
        List of validation errors (empty if the plan is valid)
    """
    errors = []
    known = set(available_tasks)
    seen: set[str] = set()
    task_ids = {task.id for task in plan.tasks}

    for task in plan.tasks:
        if task.id in seen:
            errors.append(f"Task '{task.id}': duplicate task id")
        seen.add(task.id)

        if task.task_name not in known:
            errors.append(f"Task '{task.id}': Task function '{task.task_name}' not found in registry")

        for dep in task.depends_on:
            if dep not in task_ids:
                errors.append(f"Task '{task.id}': Dependency '{dep}' not found in plan")

    return errors
