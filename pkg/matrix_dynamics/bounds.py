"""Step-size thresholds for matrix chains."""
from __future__ import annotations

import numpy as np

from numerics_core.linalg import as_matrix
from numerics_core.models import Matrix


def _require_depth_and_radius(depth: int, rho: float) -> None:
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    if not rho > 0:
        raise ValueError(f"spectral radius must be positive, got {rho}")


def instability_threshold(depth: int, rho: float) -> float:
    """Step above which no whitened equilibrium with product ``R`` is stable.

    ``rho`` is the spectral radius of ``R``.
    """
    _require_depth_and_radius(depth, rho)
    return 2.0 / (depth * rho ** (2.0 * (depth - 1) / depth))


def safe_step(depth: int, rho: float) -> float:
    """Step at which identity-initialized descent reaches ``R^(1/L)`` for a positive spectrum."""
    _require_depth_and_radius(depth, rho)
    return min(1.0, rho ** (-2.0 * (depth - 1) / depth)) / depth


def least_squares_bound(sigma: Matrix) -> float:
    """Classical single-layer bound ``2 / lambda_max(Sigma)``."""
    sigma = as_matrix(sigma, name="Sigma")
    top = float(np.max(np.linalg.eigvalsh(sigma)))
    if not top > 0:
        raise ValueError("Sigma must have a positive eigenvalue")
    return 2.0 / top
