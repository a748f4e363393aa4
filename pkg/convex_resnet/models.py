"""
Data models for convex ReLU residual networks and their convex-concave pairs.

A network maps ``x`` through

    h_0 = x
    h_l = h_{l-1} + W_l max(0, V_l^T h_{l-1} - b_l)
    f(x) = c^T h_L + d

and is convex in ``x`` whenever every ``W_l``, ``V_l``, ``b_l`` entry is
nonnegative and every ``c`` entry is positive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import typing as t

import numpy as np
import numpy.typing as npt

Array = npt.NDArray[np.float64]

DEFAULT_C_FLOOR = 1e-6


@dataclass
class ResidualLayer:
    """One residual block: ``W`` and ``V`` are ``n x m``, ``b`` has ``m`` entries."""
    W: Array
    V: Array
    b: Array

    def __post_init__(self) -> None:
        self.W = np.array(self.W, dtype=np.float64, ndmin=2)
        self.V = np.array(self.V, dtype=np.float64, ndmin=2)
        self.b = np.array(self.b, dtype=np.float64, ndmin=1)
        if self.W.shape != self.V.shape or self.b.shape != (self.W.shape[1],):
            raise ValueError(
                f"dimension mismatch: W {self.W.shape}, V {self.V.shape}, b {self.b.shape}"
            )

    @property
    def width(self) -> int:
        return int(self.W.shape[1])

    def copy(self) -> "ResidualLayer":
        return ResidualLayer(W=self.W.copy(), V=self.V.copy(), b=self.b.copy())


@dataclass
class ConvexResNet:
    """Residual trunk with linear head ``c`` and scalar offset ``d``."""
    layers: list[ResidualLayer]
    c: Array
    d: float = 0.0

    def __post_init__(self) -> None:
        self.c = np.array(self.c, dtype=np.float64, ndmin=1)
        self.d = float(self.d)
        n = self.c.shape[0]
        for i, layer in enumerate(self.layers):
            if layer.W.shape[0] != n:
                raise ValueError(
                    f"dimension mismatch: layer {i + 1} acts on {layer.W.shape[0]} inputs, head has {n}"
                )

    @property
    def input_dim(self) -> int:
        return int(self.c.shape[0])

    @property
    def depth(self) -> int:
        return len(self.layers)

    def copy(self) -> "ConvexResNet":
        return ConvexResNet(layers=[layer.copy() for layer in self.layers], c=self.c.copy(), d=self.d)

    def is_feasible(self, c_floor: float = DEFAULT_C_FLOOR) -> bool:
        """Sign constraints that make the network convex."""
        trunk_ok = all(
            np.all(layer.W >= 0) and np.all(layer.V >= 0) and np.all(layer.b >= 0)
            for layer in self.layers
        )
        return bool(trunk_ok and np.all(self.c >= c_floor))

    def has_identity_v(self) -> bool:
        return all(
            layer.V.shape[0] == layer.V.shape[1] and np.array_equal(layer.V, np.eye(layer.V.shape[0]))
            for layer in self.layers
        )


@dataclass
class ConvexConcavePair:
    """Estimate ``plus(x) - minus(x) + offset``."""
    plus: ConvexResNet
    minus: ConvexResNet
    offset: float = 0.0

    def __post_init__(self) -> None:
        self.offset = float(self.offset)
        if self.plus.input_dim != self.minus.input_dim:
            raise ValueError(
                f"dimension mismatch: plus input {self.plus.input_dim} != minus input {self.minus.input_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.plus.input_dim

    def copy(self) -> "ConvexConcavePair":
        return ConvexConcavePair(plus=self.plus.copy(), minus=self.minus.copy(), offset=self.offset)


@dataclass
class Dataset:
    """Inputs ``points`` (``N x n``) with scalar ``labels``."""
    points: Array
    labels: Array

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim == 1:
            points = points[:, np.newaxis]
        labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        if points.ndim != 2 or points.shape[0] != labels.shape[0]:
            raise ValueError(f"dimension mismatch: {points.shape[0]} points, {labels.shape[0]} labels")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(labels))):
            raise ValueError("dataset has non-finite entries")
        self.points = points
        self.labels = labels

    @property
    def count(self) -> int:
        return int(self.labels.shape[0])

    @property
    def input_dim(self) -> int:
        return int(self.points.shape[1])


@dataclass(frozen=True)
class PiecewiseAffine1D:
    """Continuous piecewise-affine function on ``[0, 1]``.

    ``breakpoints`` are the interior kinks; ``slopes`` has one entry per
    interval, so ``len(slopes) == len(breakpoints) + 1``.
    """
    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    intercept: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "slopes", tuple(float(s) for s in self.slopes))
        if len(self.slopes) != len(self.breakpoints) + 1:
            raise ValueError(
                f"need {len(self.breakpoints) + 1} slopes for {len(self.breakpoints)} breakpoints, "
                f"got {len(self.slopes)}"
            )
        knots = (0.0,) + self.breakpoints + (1.0,)
        if any(b <= a for a, b in zip(knots, knots[1:])):
            raise ValueError("breakpoints must be strictly increasing inside (0, 1)")

    @property
    def max_abs_slope(self) -> float:
        return max(abs(s) for s in self.slopes)


@dataclass
class TrainConfig:
    """Projected Nesterov training settings.

    The loss ``0.5 * sum_i (f(x_i) - y_i)^2`` carries no ``1/N``, so ``step``
    has to shrink as the dataset grows.
    """
    step: float = 1.5e-4
    max_epochs: int = 8000
    bias_init_range: tuple[float, float] = (0.0, 1.0)
    weight_init_range: tuple[float, float] = (0.0, 0.1)
    seed: int = 0
    projection: bool = True
    fixed_v: bool = False
    train_net_offsets: bool = False
    c_floor: float = DEFAULT_C_FLOOR
    divergence_loss: float = 1e12
    loss_tol: float = 0.0
    log_every: int = 1000
    widths: t.Optional[list[int]] = field(default=None)

    def violations(self) -> list[str]:
        errors: list[str] = []
        if not self.step > 0:
            errors.append("step must be positive")
        if self.max_epochs < 0:
            errors.append("max_epochs must be >= 0")
        for name in ("bias_init_range", "weight_init_range"):
            low, high = getattr(self, name)
            if low < 0 or high < 0:
                errors.append(f"{name} must be nonnegative")
            if low > high:
                errors.append(f"{name} must satisfy low <= high")
        if not self.c_floor > 0:
            errors.append("c_floor must be positive")
        if self.widths is not None and any(w < 1 for w in self.widths):
            errors.append("widths must be >= 1")
        return errors

    def validate(self) -> None:
        errors = self.violations()
        if errors:
            raise ValueError("invalid training config: " + "; ".join(errors))
