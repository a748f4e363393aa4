"""
Data models for products of square matrices trained by gradient descent.
"""
from __future__ import annotations

from dataclasses import dataclass
import typing as t

import numpy as np

from numerics_core.linalg import as_matrix
from numerics_core.models import Matrix

SYMMETRY_TOLERANCE = 1e-12
PSD_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class MatrixChain:
    """Layers ``W_1 ... W_L`` (``layers[0]`` is applied first)."""
    layers: tuple[Matrix, ...]

    def __post_init__(self) -> None:
        layers = tuple(np.asarray(w, dtype=np.float64) for w in self.layers)
        if not layers:
            raise ValueError("a chain needs at least one layer")
        n = layers[0].shape[0] if layers[0].ndim == 2 else -1
        for i, w in enumerate(layers):
            if w.ndim != 2 or w.shape != (n, n):
                raise ValueError(f"dimension mismatch: layer {i + 1} has shape {w.shape}, expected ({n}, {n})")
        object.__setattr__(self, "layers", layers)

    @classmethod
    def identity(cls, depth: int, width: int) -> "MatrixChain":
        return cls(layers=tuple(np.eye(width) for _ in range(depth)))

    @classmethod
    def repeated(cls, layer: Matrix, depth: int) -> "MatrixChain":
        return cls(layers=tuple(np.array(layer, dtype=np.float64) for _ in range(depth)))

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def width(self) -> int:
        return int(self.layers[0].shape[0])

    @property
    def is_finite(self) -> bool:
        return all(bool(np.all(np.isfinite(w))) for w in self.layers)

    def product(self) -> Matrix:
        """End-to-end map ``W_L ... W_1``."""
        out = self.layers[0]
        for w in self.layers[1:]:
            out = w @ out
        return out

    def scaled(self, factor: float) -> "MatrixChain":
        return MatrixChain(layers=tuple(factor * w for w in self.layers))


@dataclass(frozen=True, eq=False)
class DoubleMatrixChain:
    """Two chains with end-to-end map ``plus.product() - minus.product()``."""
    plus: MatrixChain
    minus: MatrixChain

    def __post_init__(self) -> None:
        if self.plus.depth != self.minus.depth or self.plus.width != self.minus.width:
            raise ValueError("dimension mismatch: plus and minus chains must share depth and width")

    @classmethod
    def identity(cls, depth: int, width: int) -> "DoubleMatrixChain":
        return cls(plus=MatrixChain.identity(depth, width), minus=MatrixChain.identity(depth, width))

    @property
    def depth(self) -> int:
        return self.plus.depth

    @property
    def width(self) -> int:
        return self.plus.width

    @property
    def is_finite(self) -> bool:
        return self.plus.is_finite and self.minus.is_finite

    def product(self) -> Matrix:
        return self.plus.product() - self.minus.product()


@dataclass(frozen=True, eq=False)
class MatrixProblem:
    """Target ``R``, input covariance ``Sigma`` and step size."""
    target: Matrix
    sigma: Matrix
    step: float

    def __post_init__(self) -> None:
        target = as_matrix(self.target, name="target")
        sigma = as_matrix(self.sigma, name="Sigma")
        n = target.shape[0]
        if target.shape != (n, n) or sigma.shape != (n, n):
            raise ValueError(f"dimension mismatch: target {target.shape}, Sigma {sigma.shape}")
        if np.max(np.abs(sigma - sigma.T), initial=0.0) > SYMMETRY_TOLERANCE:
            raise ValueError("Sigma must be symmetric")
        if n and np.min(np.linalg.eigvalsh(sigma)) < -PSD_TOLERANCE:
            raise ValueError("Sigma must be positive semidefinite")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def whitened(cls, target: Matrix, step: float) -> "MatrixProblem":
        """Problem with ``Sigma = I``."""
        target = np.asarray(target, dtype=np.float64)
        return cls(target=target, sigma=np.eye(target.shape[0]), step=step)

    @property
    def width(self) -> int:
        return int(self.target.shape[0])

    def with_step(self, step: float) -> "MatrixProblem":
        return MatrixProblem(target=self.target, sigma=self.sigma, step=step)


ChainState = t.Union[MatrixChain, DoubleMatrixChain]
