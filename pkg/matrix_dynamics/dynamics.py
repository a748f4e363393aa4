"""Gradient descent on products of square matrices.

The gradient of ``0.5 tr((F - R) Sigma (F - R)^T)`` with respect to ``W_i``
is ``S_i^T (F - R) Sigma P_{i-1}^T`` where ``P_{i-1} = W_{i-1} ... W_1`` and
``S_i = W_L ... W_{i+1}`` (both the identity when empty).
"""
from __future__ import annotations

import logging
import typing as t

import numpy as np
import numpy.typing as npt

from numerics_core.errors import NumericalError
from numerics_core.models import Matrix
from matrix_dynamics.models import ChainState, DoubleMatrixChain, MatrixChain, MatrixProblem
from scalar_dynamics.models import Mode, Outcome, StabilityVerdict, Trajectory

logger = logging.getLogger(__name__)

CONVERGED_LOSS = 1e-12
DIVERGED_LOSS = 1e9
DEFAULT_ESCAPE_RADIUS = 1e-2
SINGULAR_BASIS_CONDITION = 1e12


def _check_dims(chain: MatrixChain, prob: MatrixProblem) -> None:
    if chain.width != prob.width:
        raise ValueError(f"dimension mismatch: chain width {chain.width} != problem width {prob.width}")


def _prefix_suffix(layers: tuple[Matrix, ...]) -> tuple[list[Matrix], list[Matrix]]:
    """``prefix[i] = W_i ... W_1`` (``prefix[0] = I``), ``suffix[i] = W_L ... W_{i+1}``."""
    n = layers[0].shape[0]
    depth = len(layers)
    prefix = [np.eye(n)]
    for w in layers:
        prefix.append(w @ prefix[-1])
    suffix: list[Matrix] = [np.eye(n)] * (depth + 1)
    for i in range(depth - 1, -1, -1):
        suffix[i] = suffix[i + 1] @ layers[i]
    return prefix, suffix


def _gradients(chain: MatrixChain, weighted_error: Matrix) -> list[Matrix]:
    """Layer gradients for an error already multiplied by ``Sigma`` on the right."""
    prefix, suffix = _prefix_suffix(chain.layers)
    return [
        suffix[i + 1].T @ weighted_error @ prefix[i].T
        for i in range(chain.depth)
    ]


def chain_gradients(chain: MatrixChain, prob: MatrixProblem) -> list[Matrix]:
    """Gradient of ``chain_loss`` with respect to every layer."""
    _check_dims(chain, prob)
    error = chain.product() - prob.target
    return _gradients(chain, error @ prob.sigma)


def matrix_chain_step(chain: MatrixChain, prob: MatrixProblem) -> MatrixChain:
    """Simultaneous gradient step on every layer."""
    grads = chain_gradients(chain, prob)
    return MatrixChain(layers=tuple(w - prob.step * g for w, g in zip(chain.layers, grads)))


def _half_trace(error: Matrix, sigma: Matrix) -> float:
    return 0.5 * float(np.trace(error @ sigma @ error.T))


def chain_loss(chain: MatrixChain, prob: MatrixProblem) -> float:
    """Population loss ``0.5 tr((F - R) Sigma (F - R)^T)``."""
    _check_dims(chain, prob)
    return _half_trace(chain.product() - prob.target, prob.sigma)


def double_chain_loss(chain: DoubleMatrixChain, prob: MatrixProblem) -> float:
    _check_dims(chain.plus, prob)
    return _half_trace(chain.product() - prob.target, prob.sigma)


def double_chain_gradients(
        chain: DoubleMatrixChain,
        prob: MatrixProblem,
) -> tuple[list[Matrix], list[Matrix]]:
    """Loss gradients for the plus and minus layers."""
    _check_dims(chain.plus, prob)
    weighted = (chain.product() - prob.target) @ prob.sigma
    plus = _gradients(chain.plus, weighted)
    minus = [-g for g in _gradients(chain.minus, weighted)]
    return plus, minus


def double_matrix_step(chain: DoubleMatrixChain, prob: MatrixProblem) -> DoubleMatrixChain:
    """Simultaneous gradient step on both chains of a double network."""
    plus_grads, minus_grads = double_chain_gradients(chain, prob)
    return DoubleMatrixChain(
        plus=MatrixChain(tuple(w - prob.step * g for w, g in zip(chain.plus.layers, plus_grads))),
        minus=MatrixChain(tuple(z - prob.step * g for z, g in zip(chain.minus.layers, minus_grads))),
    )


def _layers_of(state: ChainState) -> tuple[Matrix, ...]:
    if isinstance(state, DoubleMatrixChain):
        return state.plus.layers + state.minus.layers
    return state.layers


def _relative_drift(layers: tuple[Matrix, ...], reference: tuple[Matrix, ...]) -> float:
    drift = 0.0
    for w, r in zip(layers, reference):
        scale = float(np.linalg.norm(r, 2)) or 1.0
        drift = max(drift, float(np.linalg.norm(w - r, 2)) / scale)
    return drift


def simulate_matrix(
        chain0: ChainState,
        prob: MatrixProblem,
        max_iters: int,
        mode: Mode = Mode.SINGLE,
        *,
        reference: t.Optional[ChainState] = None,
        escape_radius: float = DEFAULT_ESCAPE_RADIUS,
        converged_loss: float = CONVERGED_LOSS,
        diverged_loss: float = DIVERGED_LOSS,
        snapshot_every: t.Optional[int] = None,
) -> Trajectory:
    """Iterate the matrix update, recording the loss after every step.

    Stop rules mirror ``scalar_dynamics.dynamics.simulate_scalar`` with loss
    thresholds; the escape test measures relative spectral-norm distance of
    each layer from ``reference``.
    """
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")

    state: ChainState
    if mode is Mode.DOUBLE:
        if isinstance(chain0, DoubleMatrixChain):
            state = chain0
        else:
            state = DoubleMatrixChain(plus=chain0, minus=chain0)
        step: t.Callable[[t.Any, MatrixProblem], ChainState] = double_matrix_step
        loss: t.Callable[[t.Any, MatrixProblem], float] = double_chain_loss
    else:
        if isinstance(chain0, DoubleMatrixChain):
            raise ValueError("single-mode simulation needs a MatrixChain")
        state = chain0
        step = matrix_chain_step
        loss = chain_loss
    if not state.is_finite:
        raise ValueError("initial layers must be finite")

    ref_layers = _layers_of(reference) if reference is not None else None
    if ref_layers is not None and len(ref_layers) != len(_layers_of(state)):
        raise ValueError("dimension mismatch: reference does not match the chain")

    losses = [loss(state, prob)]
    snapshots: list[tuple[int, t.Any]] = [(0, state)] if snapshot_every else []
    outcome = Outcome.CONVERGED if losses[0] < converged_loss else Outcome.UNDECIDED

    k = 0
    while outcome is Outcome.UNDECIDED and k < max_iters:
        new_state = step(state, prob)
        k += 1
        with np.errstate(over="ignore", invalid="ignore"):
            value = loss(new_state, prob) if new_state.is_finite else float("inf")
        losses.append(value)
        if snapshot_every and k % snapshot_every == 0:
            snapshots.append((k, new_state))

        stalled = all(np.array_equal(a, b) for a, b in zip(_layers_of(new_state), _layers_of(state)))
        state = new_state

        if not np.isfinite(value) or value > diverged_loss:
            outcome = Outcome.DIVERGED
        elif ref_layers is not None and _relative_drift(_layers_of(state), ref_layers) > escape_radius:
            outcome = Outcome.DIVERGED
        elif value < converged_loss:
            outcome = Outcome.CONVERGED
        elif stalled:
            logger.debug("Fixed point at iteration %d with loss %.3e", k, value)
            break

    return Trajectory(
        errors=losses,
        iterations_run=k,
        verdict=StabilityVerdict(outcome=outcome, final_error=losses[-1]),
        final_state=state,
        snapshots=snapshots,
    )


# ---- eigenbasis diagnostics ----

def _basis_inverse(basis: Matrix) -> Matrix:
    basis = np.asarray(basis, dtype=np.float64)
    if basis.ndim != 2 or basis.shape[0] != basis.shape[1]:
        raise ValueError(f"dimension mismatch: basis has shape {basis.shape}")
    condition = float(np.linalg.cond(basis))
    if not np.isfinite(condition) or condition > SINGULAR_BASIS_CONDITION:
        raise NumericalError(f"singular basis: condition {condition:.3e}")
    return np.linalg.inv(basis)


def decoupling_check(chain: MatrixChain, basis: Matrix) -> float:
    """Largest off-diagonal magnitude of ``M^-1 W_i M`` over all layers."""
    inverse = _basis_inverse(basis)
    worst = 0.0
    for w in chain.layers:
        d = inverse @ w @ basis
        off = d - np.diag(np.diag(d))
        worst = max(worst, float(np.max(np.abs(off), initial=0.0)))
    return worst


def modal_weights(chain: MatrixChain, basis: Matrix) -> npt.NDArray[np.float64]:
    """Diagonal of ``M^-1 W_i M`` per layer, shape ``(L, n)``."""
    inverse = _basis_inverse(basis)
    return np.array([np.diag(inverse @ w @ basis) for w in chain.layers])


def covariance_from_points(points: npt.ArrayLike) -> Matrix:
    """Empirical second moment ``(1/N) sum_i x_i x_i^T`` of the rows of ``points``."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"points must be a non-empty (N, n) array, got shape {x.shape}")
    sigma = x.T @ x / x.shape[0]
    return 0.5 * (sigma + sigma.T)
