"""Tests for the sweep executor.

This module tests parallel execution, dependency resolution, and error handling.
"""
import asyncio
import threading
import time
import typing as t
from dataclasses import dataclass

import pytest

from lab.executor import execute_sweep, validate_sweep_plan
from lab.models import SweepPlan, SweepTask


@pytest.fixture
def task_registry(monkeypatch: pytest.MonkeyPatch) -> dict[str, t.Callable[..., t.Any]]:
    """Replace the task registry with an empty dict the test fills in."""
    registry: dict[str, t.Callable[..., t.Any]] = {}
    monkeypatch.setattr("registry.TASK_REGISTRY", registry)
    return registry


@pytest.mark.asyncio
async def test_parallel_execution_of_independent_tasks(task_registry: dict) -> None:
    """Independent tasks run in worker threads at the same time."""
    def slow(label: str) -> str:
        time.sleep(0.1)
        return label

    task_registry["slow"] = slow
    plan = SweepPlan(
        tasks=[
            SweepTask(id=f"seed{i}", task_name="slow", arguments={"label": f"r{i}"})
            for i in range(1, 4)
        ],
        description="Test parallel execution",
    )

    start_time = time.time()
    results = await execute_sweep(plan)
    total_time = time.time() - start_time

    assert results == {"seed1": "r1", "seed2": "r2", "seed3": "r3"}
    # serial execution would take ~0.3s
    assert total_time < 0.25, f"Expected parallel execution (~0.1s), but took {total_time:.2f}s"


@pytest.mark.asyncio
async def test_dependency_ordering_is_respected(task_registry: dict) -> None:
    execution_order: list[str] = []

    def first() -> str:
        execution_order.append("case1")
        return "a"

    def then(input_val: str) -> str:
        execution_order.append(f"after_{input_val}")
        return f"{input_val}_b"

    task_registry.update({"first": first, "then": then})
    plan = SweepPlan(
        tasks=[
            SweepTask(id="case2", task_name="then", arguments={"input_val": "$case1"}, depends_on=["case1"]),
            SweepTask(id="case1", task_name="first", arguments={}),
            SweepTask(id="case3", task_name="then", arguments={"input_val": "$case2"}, depends_on=["case2"]),
        ],
        description="Test dependency ordering",
    )

    results = await execute_sweep(plan)

    assert execution_order == ["case1", "after_a", "after_a_b"]
    assert results["case3"] == "a_b_b"


@pytest.mark.asyncio
async def test_summary_receives_list_of_results(task_registry: dict) -> None:
    """A summary task gets a list of ``$task`` references resolved in order."""
    task_registry["square"] = lambda x: x * x
    task_registry["total"] = lambda values, offset: sum(values) + offset
    plan = SweepPlan(
        tasks=[
            SweepTask(id="case1", task_name="square", arguments={"x": 2}),
            SweepTask(id="case2", task_name="square", arguments={"x": 3}),
            SweepTask(
                id="summary",
                task_name="total",
                arguments={"values": ["$case1", "$case2"], "offset": 1},
                depends_on=["case1", "case2"],
            ),
        ],
        description="Test summary lists",
    )

    results = await execute_sweep(plan)

    assert results["summary"] == 14


@pytest.mark.asyncio
async def test_max_concurrent_limiting(task_registry: dict) -> None:
    running = 0
    peak = 0
    lock = threading.Lock()

    def track() -> str:
        nonlocal running, peak
        with lock:
            running += 1
            peak = max(peak, running)
        time.sleep(0.05)
        with lock:
            running -= 1
        return "done"

    task_registry["track"] = track
    plan = SweepPlan(
        tasks=[SweepTask(id=f"seed{i}", task_name="track", arguments={}) for i in range(5)],
        description="Test concurrency limiting",
    )

    await execute_sweep(plan, max_concurrent=2)

    assert peak <= 2, f"Expected max 2 concurrent, but observed {peak}"


@pytest.mark.asyncio
async def test_async_task_functions_are_awaited(task_registry: dict) -> None:
    async def later(value: int) -> int:
        await asyncio.sleep(0.01)
        return value + 1

    task_registry["later"] = later
    plan = SweepPlan(tasks=[SweepTask(id="case1", task_name="later", arguments={"value": 1})], description="")

    assert (await execute_sweep(plan))["case1"] == 2


@pytest.mark.asyncio
async def test_task_errors_name_the_failing_task(task_registry: dict) -> None:
    def failing() -> str:
        raise ValueError("Intentional failure")

    task_registry.update({"ok": lambda: "success", "fail": failing})
    plan = SweepPlan(
        tasks=[
            SweepTask(id="case1", task_name="ok", arguments={}),
            SweepTask(id="case2", task_name="fail", arguments={}),
        ],
        description="Test error handling",
    )

    with pytest.raises(RuntimeError) as exc_info:
        await execute_sweep(plan)

    message = str(exc_info.value)
    assert "Intentional failure" in message
    assert "case2" in message
    assert isinstance(exc_info.value.__cause__, ValueError)


@pytest.mark.asyncio
async def test_unknown_task_function_fails(task_registry: dict) -> None:
    plan = SweepPlan(tasks=[SweepTask(id="case1", task_name="missing", arguments={})], description="")

    with pytest.raises(RuntimeError, match="Task not found: missing"):
        await execute_sweep(plan)


@pytest.mark.asyncio
async def test_circular_dependency_is_reported(task_registry: dict) -> None:
    task_registry["noop"] = lambda: None
    plan = SweepPlan(
        tasks=[
            SweepTask(id="a", task_name="noop", arguments={}, depends_on=["b"]),
            SweepTask(id="b", task_name="noop", arguments={}, depends_on=["a"]),
        ],
        description="",
    )

    with pytest.raises(RuntimeError, match="circular dependency"):
        await execute_sweep(plan)


@pytest.mark.asyncio
async def test_progress_callback_is_called(task_registry: dict) -> None:
    callback_calls: list[tuple[int, int, str, bool]] = []

    def callback(current: int, total: int, task: SweepTask, result: t.Optional[t.Any]) -> None:
        callback_calls.append((current, total, task.id, result is not None))

    task_registry["task"] = lambda: "done"
    plan = SweepPlan(tasks=[SweepTask(id="case1", task_name="task", arguments={})], description="")

    await execute_sweep(plan, progress_callback=callback)

    # once before (result=None) and once after
    assert callback_calls == [(1, 1, "case1", False), (1, 1, "case1", True)]


@pytest.mark.asyncio
async def test_variable_resolution_with_nested_fields(task_registry: dict) -> None:
    @dataclass
    class ComplexResult:
        field1: str
        field2: dict[str, str]

    task_registry["make"] = lambda: ComplexResult(field1="value1", field2={"nested": "nested_value"})
    task_registry["use"] = lambda a, b: f"{a}/{b}"
    plan = SweepPlan(
        tasks=[
            SweepTask(id="case1", task_name="make", arguments={}),
            SweepTask(
                id="case2",
                task_name="use",
                arguments={"a": "$case1.field1", "b": "$case1.field2.nested"},
                depends_on=["case1"],
            ),
        ],
        description="Test nested field access",
    )

    results = await execute_sweep(plan)

    assert results["case2"] == "value1/nested_value"


def test_validate_sweep_plan_reports_problems() -> None:
    plan = SweepPlan(
        tasks=[
            SweepTask(id="case1", task_name="known", arguments={}),
            SweepTask(id="case1", task_name="unknown", arguments={}, depends_on=["ghost"]),
        ],
        description="",
    )

    errors = validate_sweep_plan(plan, ["known"])

    assert any("duplicate task id" in e for e in errors)
    assert any("'unknown' not found in registry" in e for e in errors)
    assert any("Dependency 'ghost' not found" in e for e in errors)
    assert validate_sweep_plan(SweepPlan(tasks=plan.tasks[:1], description=""), ["known"]) == []
