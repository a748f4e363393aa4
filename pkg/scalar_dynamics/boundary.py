"""Empirical location of the step-size stability boundary by bisection.

Each probe perturbs the equilibrium multiplicatively by ``1 + perturbation``
and simulates with an escape test against the unperturbed equilibrium.
Probes that end Undecided count as stable only when ``|e|`` decreased
monotonically over the last ``MONOTONE_WINDOW`` iterations; otherwise the
probe continues for one more budget and is classified again, unresolved
probes then counting as unstable.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
import typing as t

from numerics_core.errors import NumericalError
from scalar_dynamics.bounds import delta_max, stability_bound
from scalar_dynamics.dynamics import DEFAULT_ESCAPE_RADIUS, simulate_scalar
from scalar_dynamics.models import Mode, Outcome, ScalarChain, ScalarProblem, StabilityVerdict

logger = logging.getLogger(__name__)

PROBE_ITERATIONS = 100_000
PROBE_PERTURBATION = 1e-3
MONOTONE_WINDOW = 1_000
LOWER_STEP = 1e-9
UPPER_FACTOR = 10.0
EQUILIBRIUM_TOLERANCE = 1e-12


class NoBracketError(NumericalError):
    """Raised when the initial step interval does not straddle the boundary."""


@dataclass
class ProbeRecord:
    step: float
    stable: bool
    outcome: Outcome
    iterations: int


@dataclass
class BoundaryResult:
    """Located boundary with its closed-form prediction and probe history."""
    boundary: float
    predicted: float
    lower: float
    upper: float
    probes: list[ProbeRecord] = field(default_factory=list)

    @property
    def relative_gap(self) -> float:
        return abs(self.boundary - self.predicted) / self.predicted

    def verdict(self) -> StabilityVerdict:
        return StabilityVerdict(
            outcome=Outcome.UNDECIDED,
            final_error=0.0,
            predicted_bound=self.predicted,
            empirical_boundary=self.boundary,
        )


def _monotone_tail(errors: t.Sequence[float], window: int) -> bool:
    if len(errors) <= window:
        return False
    tail = errors[-(window + 1):]
    return all(abs(b) <= abs(a) for a, b in zip(tail, tail[1:]))


def probe_step(
        equilibrium: ScalarChain,
        prob: ScalarProblem,
        *,
        iterations: int = PROBE_ITERATIONS,
        perturbation: float = PROBE_PERTURBATION,
        escape_radius: float = DEFAULT_ESCAPE_RADIUS,
) -> ProbeRecord:
    """Classify ``prob.step`` as stable or unstable for ``equilibrium``."""
    start = ScalarChain(weights=tuple(w * (1.0 + perturbation) for w in equilibrium.weights))
    state = start
    used = 0
    for attempt in range(2):
        trajectory = simulate_scalar(
            state, prob, iterations, Mode.SINGLE,
            reference=equilibrium, escape_radius=escape_radius,
        )
        used += trajectory.iterations_run
        if trajectory.outcome is not Outcome.UNDECIDED:
            stable = trajectory.outcome is Outcome.CONVERGED
            return ProbeRecord(prob.step, stable, trajectory.outcome, used)
        if _monotone_tail(trajectory.errors, MONOTONE_WINDOW):
            return ProbeRecord(prob.step, True, Outcome.UNDECIDED, used)
        if trajectory.iterations_run < iterations:
            # stopped on a fixed point off the target
            break
        logger.debug("Probe at step %.6g undecided after %d iterations; extending", prob.step, used)
        state = trajectory.final_state
    return ProbeRecord(prob.step, False, Outcome.UNDECIDED, used)


def locate_stability_boundary(
        depth: int,
        lam: float,
        sigma: float,
        equilibrium: t.Sequence[float] | ScalarChain,
        rel_tol: float = 1e-2,
        *,
        probe_iterations: int = PROBE_ITERATIONS,
        perturbation: float = PROBE_PERTURBATION,
        escape_radius: float = DEFAULT_ESCAPE_RADIUS,
        on_probe: t.Optional[t.Callable[[ProbeRecord], None]] = None,
) -> BoundaryResult:
    """Bisect the step size between a stable and an unstable probe.

    The bracket starts at ``[1e-9, 10 * delta_max]`` and halves until its
    width relative to the midpoint drops below ``rel_tol``.

    Raises:
        ValueError: If ``equilibrium`` is not one, or ``rel_tol`` is outside (0, 1).
        NoBracketError: If the lower end is unstable or the upper end stable.
    """
    if not 0 < rel_tol < 1:
        raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    chain = equilibrium if isinstance(equilibrium, ScalarChain) else ScalarChain(tuple(equilibrium))
    if chain.depth != depth:
        raise ValueError(f"dimension mismatch: {chain.depth} weights for depth {depth}")
    if abs(chain.product - lam) > EQUILIBRIUM_TOLERANCE * max(1.0, abs(lam)):
        raise ValueError(f"weights are not an equilibrium: product {chain.product!r} != {lam!r}")

    predicted = stability_bound(chain.weights, sigma)
    lower, upper = LOWER_STEP, UPPER_FACTOR * delta_max(depth, lam, sigma)
    probes: list[ProbeRecord] = []

    def probe(step: float) -> ProbeRecord:
        record = probe_step(
            chain,
            ScalarProblem(lam=lam, sigma=sigma, depth=depth, step=step),
            iterations=probe_iterations,
            perturbation=perturbation,
            escape_radius=escape_radius,
        )
        probes.append(record)
        logger.debug("probe step=%.8g stable=%s (%s, %d iterations)",
                     step, record.stable, record.outcome.value, record.iterations)
        if on_probe:
            on_probe(record)
        return record

    if not probe(lower).stable:
        raise NoBracketError(f"no bracket found: step {lower:g} is already unstable")
    if probe(upper).stable:
        raise NoBracketError(f"no bracket found: step {upper:g} is still stable")

    while True:
        mid = 0.5 * (lower + upper)
        if (upper - lower) / mid < rel_tol or not math.isfinite(mid):
            break
        if probe(mid).stable:
            lower = mid
        else:
            upper = mid

    return BoundaryResult(boundary=mid, predicted=predicted, lower=lower, upper=upper, probes=probes)


def empirical_stability_boundary(
        depth: int,
        lam: float,
        sigma: float,
        equilibrium: t.Sequence[float] | ScalarChain,
        rel_tol: float = 1e-2,
        **kwargs: t.Any,
) -> float:
    """Midpoint of the final bisection bracket; see ``locate_stability_boundary``."""
    return locate_stability_boundary(depth, lam, sigma, equilibrium, rel_tol, **kwargs).boundary
