"""Gradient-descent updates and trajectory simulation for scalar chains."""
from __future__ import annotations

import logging
import math
import typing as t

from scalar_dynamics.models import (
    DoubleScalarChain,
    Mode,
    Outcome,
    ScalarChain,
    ScalarProblem,
    StabilityVerdict,
    Trajectory,
)

logger = logging.getLogger(__name__)

CONVERGED_ERROR = 1e-10
DIVERGED_ERROR = 1e6
DEFAULT_ESCAPE_RADIUS = 1e-2

ChainState = t.Union[ScalarChain, DoubleScalarChain]


def _products_without_each(w: tuple[float, ...]) -> list[float]:
    """``prod_{j != i} w_j`` for every ``i``; equal weights give bit-equal results."""
    if all(w):
        total = math.prod(w)
        return [total / wi for wi in w]
    return [math.prod(w[:i] + w[i + 1:]) for i in range(len(w))]


def _check_depth(depth: int, prob: ScalarProblem) -> None:
    if depth != prob.depth:
        raise ValueError(f"dimension mismatch: chain depth {depth} != problem depth {prob.depth}")


def scalar_chain_step(chain: ScalarChain, prob: ScalarProblem) -> ScalarChain:
    """One simultaneous update ``w_i -= step * sigma * e * prod_{j != i} w_j``."""
    _check_depth(chain.depth, prob)
    w = chain.weights
    error = math.prod(w) - prob.lam
    scale = prob.step * prob.sigma * error
    return ScalarChain(weights=tuple(
        wi - scale * others for wi, others in zip(w, _products_without_each(w))
    ))


def double_scalar_step(w: float, z: float, prob: ScalarProblem) -> tuple[float, float]:
    """Symmetric double-chain update on one representative weight per chain."""
    w_rest = math.prod((w,) * (prob.depth - 1))
    z_rest = math.prod((z,) * (prob.depth - 1))
    error = w_rest * w - z_rest * z - prob.lam
    scale = prob.step * prob.sigma * error
    return w - scale * w_rest, z + scale * z_rest


def double_chain_step(chain: DoubleScalarChain, prob: ScalarProblem) -> DoubleScalarChain:
    """General double-chain update; the minus chain ascends along the shared error."""
    _check_depth(chain.depth, prob)
    w = chain.plus.weights
    z = chain.minus.weights
    error = math.prod(w) - math.prod(z) - prob.lam
    scale = prob.step * prob.sigma * error
    plus = tuple(wi - scale * others for wi, others in zip(w, _products_without_each(w)))
    minus = tuple(zi + scale * others for zi, others in zip(z, _products_without_each(z)))
    return DoubleScalarChain(plus=ScalarChain(plus), minus=ScalarChain(minus))


def _weights_of(state: ChainState) -> tuple[float, ...]:
    if isinstance(state, DoubleScalarChain):
        return state.plus.weights + state.minus.weights
    return state.weights


def _relative_drift(weights: tuple[float, ...], reference: tuple[float, ...]) -> float:
    return max(
        abs(w - r) / abs(r) if r != 0 else abs(w)
        for w, r in zip(weights, reference)
    )


def _is_finite_state(weights: tuple[float, ...]) -> bool:
    return all(math.isfinite(w) for w in weights)


def simulate_scalar(
        chain0: ChainState,
        prob: ScalarProblem,
        max_iters: int,
        mode: Mode = Mode.SINGLE,
        *,
        reference: t.Optional[ChainState] = None,
        escape_radius: float = DEFAULT_ESCAPE_RADIUS,
        converged_error: float = CONVERGED_ERROR,
        diverged_error: float = DIVERGED_ERROR,
        snapshot_every: t.Optional[int] = None,
        on_step: t.Optional[t.Callable[[int, ChainState], None]] = None,
) -> Trajectory:
    """Iterate the chain update and classify the outcome.

    The run stops on ``|e| < converged_error`` (Converged), on a non-finite
    state or ``|e| > diverged_error`` (Diverged), or when the update leaves the
    state bit-for-bit unchanged (a fixed point away from the target is
    reported Undecided). When ``reference`` is given the run is also Diverged
    as soon as any weight drifts further than ``escape_radius`` (relative)
    from the matching reference weight.

    In ``Mode.DOUBLE`` a plain ``ScalarChain`` start is used for both chains.
    ``on_step(k, state)`` sees every state after its update.
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")

    state: ChainState
    if mode is Mode.DOUBLE:
        state = chain0 if isinstance(chain0, DoubleScalarChain) else DoubleScalarChain(chain0, chain0)
        step = double_chain_step
    else:
        if isinstance(chain0, DoubleScalarChain):
            raise ValueError("single-mode simulation needs a ScalarChain")
        state = chain0
        step = scalar_chain_step
    _check_depth(state.depth, prob)
    if not _is_finite_state(_weights_of(state)):
        raise ValueError("initial weights must be finite")

    ref_weights = _weights_of(reference) if reference is not None else None
    if ref_weights is not None and len(ref_weights) != len(_weights_of(state)):
        raise ValueError("dimension mismatch: reference does not match the chain")

    errors = [state.product - prob.lam]
    snapshots: list[tuple[int, t.Any]] = []
    if snapshot_every:
        snapshots.append((0, state))

    outcome = Outcome.CONVERGED if abs(errors[0]) < converged_error else Outcome.UNDECIDED
    k = 0
    while outcome is Outcome.UNDECIDED and k < max_iters:
        new_state = step(state, prob)  # type: ignore[arg-type]
        k += 1
        weights = _weights_of(new_state)
        error = new_state.product - prob.lam
        errors.append(error)
        if snapshot_every and k % snapshot_every == 0:
            snapshots.append((k, new_state))
        if on_step:
            on_step(k, new_state)

        stalled = new_state == state
        state = new_state

        if not (_is_finite_state(weights) and math.isfinite(error)) or abs(error) > diverged_error:
            outcome = Outcome.DIVERGED
        elif ref_weights is not None and _relative_drift(weights, ref_weights) > escape_radius:
            outcome = Outcome.DIVERGED
        elif abs(error) < converged_error:
            outcome = Outcome.CONVERGED
        elif stalled:
            logger.debug("Fixed point at iteration %d with error %.3e", k, error)
            break

    return Trajectory(
        errors=errors,
        iterations_run=k,
        verdict=StabilityVerdict(outcome=outcome, final_error=errors[-1]),
        final_state=state,
        snapshots=snapshots,
    )
