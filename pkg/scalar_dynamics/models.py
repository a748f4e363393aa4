"""
Data models for gradient-descent simulations of deep linear chains.

``Trajectory`` and ``StabilityVerdict`` are shared with the matrix chains,
which record their loss curve in the same structure.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import math
import typing as t


class Outcome(Enum):
    """Classification of a simulated trajectory."""
    CONVERGED = "converged"
    DIVERGED = "diverged"
    UNDECIDED = "undecided"


class Mode(Enum):
    """Single chain, or a double chain whose products are subtracted."""
    SINGLE = "single"
    DOUBLE = "double"


def _check_finite(values: t.Iterable[float], what: str) -> None:
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"{what} must be finite")


@dataclass(frozen=True)
class ScalarChain:
    """Scalar weights ``w_1 ... w_L`` whose product models the target."""
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.weights:
            raise ValueError("a chain needs at least one weight")

    @classmethod
    def constant(cls, depth: int, value: float = 1.0) -> "ScalarChain":
        return cls(weights=(value,) * depth)

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def is_finite(self) -> bool:
        return all(math.isfinite(w) for w in self.weights)

    @property
    def product(self) -> float:
        return math.prod(self.weights)


@dataclass(frozen=True)
class DoubleScalarChain:
    """Two chains with effective map ``prod(plus) - prod(minus)``."""
    plus: ScalarChain
    minus: ScalarChain

    def __post_init__(self) -> None:
        if self.plus.depth != self.minus.depth:
            raise ValueError(
                f"dimension mismatch: plus depth {self.plus.depth} != minus depth {self.minus.depth}"
            )

    @property
    def depth(self) -> int:
        return self.plus.depth

    @property
    def product(self) -> float:
        return self.plus.product - self.minus.product


@dataclass(frozen=True)
class ScalarProblem:
    """Target ``lam``, input second moment ``sigma``, depth and step size."""
    lam: float
    sigma: float
    depth: int
    step: float

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        _check_finite((self.lam, self.sigma, self.step), "problem parameters")

    def with_step(self, step: float) -> "ScalarProblem":
        return ScalarProblem(lam=self.lam, sigma=self.sigma, depth=self.depth, step=step)


@dataclass
class StabilityVerdict:
    """Outcome of a simulation plus optional bound bookkeeping."""
    outcome: Outcome
    final_error: float
    predicted_bound: t.Optional[float] = None
    empirical_boundary: t.Optional[float] = None


@dataclass
class Trajectory:
    """Per-iteration error record of one simulation.

    ``errors[k]`` is the error after ``k`` updates, so ``errors`` always holds
    ``iterations_run + 1`` entries. ``snapshots`` holds ``(k, state)`` pairs
    when thinning was requested.
    """
    errors: list[float]
    iterations_run: int
    verdict: StabilityVerdict
    final_state: t.Any = None
    snapshots: list[tuple[int, t.Any]] = field(default_factory=list)

    @property
    def outcome(self) -> Outcome:
        return self.verdict.outcome

    @property
    def final_error(self) -> float:
        return self.verdict.final_error
