"""
Data models for the dense linear-algebra layer.

Matrices are plain ``numpy`` float64 arrays; the only structured type is the
eigendecomposition record shared by the dynamics packages.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]


@dataclass(frozen=True)
class Spectrum:
    """Real eigendecomposition ``M diag(eigenvalues) M^-1``."""
    eigenvalues: Vector
    eigenvector_matrix: Matrix
    inverse_eigenvector_matrix: Matrix

    @property
    def size(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def reconstruct(self) -> Matrix:
        """Rebuild the source matrix from the decomposition."""
        scaled = self.eigenvector_matrix * self.eigenvalues[np.newaxis, :]
        return scaled @ self.inverse_eigenvector_matrix

    def map_eigenvalues(self, values: Vector) -> Matrix:
        """Matrix sharing this eigenbasis with ``values`` on the diagonal."""
        scaled = self.eigenvector_matrix * np.asarray(values, dtype=np.float64)[np.newaxis, :]
        return scaled @ self.inverse_eigenvector_matrix
