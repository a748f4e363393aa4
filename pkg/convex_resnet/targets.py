"""Regression targets on the unit interval."""
from __future__ import annotations

import numpy as np

from convex_resnet.models import Array, Dataset, PiecewiseAffine1D


def zigzag_target() -> PiecewiseAffine1D:
    """Slopes 1, -2, 1, -1 with kinks at 0.3, 0.5 and 0.7, starting at 0."""
    return PiecewiseAffine1D(breakpoints=(0.3, 0.5, 0.7), slopes=(1.0, -2.0, 1.0, -1.0))


def evaluate_piecewise(target: PiecewiseAffine1D, x: Array) -> Array:
    """Integral of the slope function from 0, plus the intercept."""
    x = np.asarray(x, dtype=np.float64)
    knots = np.array((0.0,) + target.breakpoints)
    slopes = np.array(target.slopes)
    # value at each knot, accumulated from the left
    widths = np.diff(np.append(knots, 1.0))
    knot_values = target.intercept + np.concatenate(([0.0], np.cumsum(slopes[:-1] * widths[:-1])))
    piece = np.clip(np.searchsorted(knots, x, side="right") - 1, 0, len(slopes) - 1)
    return knot_values[piece] + slopes[piece] * (x - knots[piece])


def uniform_grid(grid_size: int) -> Array:
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")
    return np.linspace(0.0, 1.0, grid_size)


def piecewise_target(target: PiecewiseAffine1D, grid_size: int) -> Dataset:
    """Sample ``target`` on ``grid_size`` evenly spaced points of ``[0, 1]``."""
    x = uniform_grid(grid_size)
    return Dataset(points=x[:, np.newaxis], labels=evaluate_piecewise(target, x))


def linear_target(slope: float, grid_size: int, intercept: float = 0.0) -> Dataset:
    x = uniform_grid(grid_size)
    return Dataset(points=x[:, np.newaxis], labels=intercept + slope * x)
