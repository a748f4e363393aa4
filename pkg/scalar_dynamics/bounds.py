"""Closed-form step-size bounds and rates for scalar chains.

Throughout, ``lam ** (2 (L - 1) / L)`` is read as ``|lam| ** (2 (L - 1) / L)``;
the quantity enters only through squared products.
"""
from __future__ import annotations

import math
import typing as t

from scalar_dynamics.models import ScalarChain

CRITICAL_STEP_SLACK = 1e-12


def _balanced_power(depth: int, lam: float) -> float:
    return abs(lam) ** (2.0 * (depth - 1) / depth)


def _require_positive(name: str, value: float) -> None:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


def stability_bound(weights: t.Sequence[float], sigma: float) -> float:
    """Largest step for which the equilibrium ``weights`` can be stable.

    Returns ``2 / (sigma * sum_i prod_{j != i} w_j^2)``.

    Raises:
        ValueError: "degenerate equilibrium" when the sum vanishes.
    """
    _require_positive("sigma", sigma)
    w = [float(x) for x in weights]
    if not w:
        raise ValueError("degenerate equilibrium: no weights")
    denominator = sum(math.prod(x * x for j, x in enumerate(w) if j != i) for i in range(len(w)))
    if denominator == 0.0:
        raise ValueError("degenerate equilibrium: more than one zero weight")
    return 2.0 / (sigma * denominator)


def delta_max(depth: int, lam: float, sigma: float) -> float:
    """``stability_bound`` at the balanced equilibrium, its largest value."""
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    _require_positive("sigma", sigma)
    return 2.0 / (sigma * depth * _balanced_power(depth, lam))


def critical_step(depth: int, lam: float, sigma: float) -> float:
    """Step size up to which identity-initialized descent converges monotonically.

    The ``lam >= 1`` branch is used at exactly ``lam == 1``; both branches
    give ``1 / (depth * sigma)`` there.
    """
    if lam <= 0:
        raise ValueError(f"requires positive lambda, got {lam}")
    _require_positive("sigma", sigma)
    if lam >= 1.0:
        return 1.0 / (depth * sigma) * lam ** (-2.0 * (depth - 1) / depth)
    return (1.0 - lam ** (1.0 / depth)) / (sigma * (1.0 - lam))


def convergence_rate(depth: int, lam: float, sigma: float, delta: float) -> float:
    """Geometric rate ``rho`` with ``|w[k] - lam^(1/L)| <= rho^k |1 - lam^(1/L)|``.

    The result lies in ``[0, 1)``.

    Raises:
        ValueError: "step exceeds critical value" above the critical step, or
            "step too small" when the rate rounds to one.
    """
    _require_positive("delta", delta)
    bound = critical_step(depth, lam, sigma)
    if delta > bound * (1.0 + CRITICAL_STEP_SLACK):
        raise ValueError(f"step exceeds critical value: {delta} > {bound}")
    if lam > 1.0:
        rate = 1.0 - delta * sigma * (lam - 1.0) / (lam ** (1.0 / depth) - 1.0)
    else:
        rate = 1.0 - delta * sigma * depth * _balanced_power(depth, lam)
    if rate >= 1.0:
        raise ValueError(f"step too small: rate rounds to one at delta={delta}")
    return max(rate, 0.0)


def contraction_factor(w: float, depth: int, lam: float, sigma: float, delta: float) -> float:
    """Ratio ``(w' - r) / (w - r)`` of one symmetric update, ``r = lam^(1/L)``."""
    if lam <= 0:
        raise ValueError(f"requires positive lambda, got {lam}")
    total = sum(w ** j * lam ** ((depth - 1 - j) / depth) for j in range(depth))
    return 1.0 - delta * sigma * w ** (depth - 1) * total


def negative_lambda_bound(lam: float, sigma: float) -> float:
    """Step above which identity-initialized descent may escape the origin for ``lam < 0``."""
    if lam >= 0:
        raise ValueError(f"requires negative lambda, got {lam}")
    _require_positive("sigma", sigma)
    return 1.0 / (sigma * (1.0 - lam))


# ---- equilibria and initializations ----

def disproportionate_equilibrium(depth: int, lam: float, kappa: float = 1.0) -> ScalarChain:
    """Equilibrium with ``L - 1`` weights scaled by ``kappa`` and the last compensating.

    ``kappa = 1`` gives the balanced equilibrium; a negative ``lam`` puts its
    sign on the last weight.
    """
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    root = abs(lam) ** (1.0 / depth)
    last = kappa ** (1 - depth) * root
    if lam < 0:
        last = -last
    return ScalarChain(weights=(kappa * root,) * (depth - 1) + (last,))


def balanced_equilibrium(depth: int, lam: float) -> ScalarChain:
    return disproportionate_equilibrium(depth, lam, 1.0)


def signed_initialization(depth: int, lam: float) -> ScalarChain:
    """All-ones start, with the first weight flipped to -1 for a negative target."""
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    head = -1.0 if lam < 0 else 1.0
    return ScalarChain(weights=(head,) + (1.0,) * (depth - 1))
