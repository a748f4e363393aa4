"""Eigendecomposition helpers for diagonalizable real matrices.

All functions take and return ``numpy`` float64 arrays and never mutate their
arguments.
"""
from __future__ import annotations

import logging
import typing as t

import numpy as np

from numerics_core.errors import NumericalError
from numerics_core.models import Matrix, Spectrum, Vector
from numerics_core.rng import SeededRng

logger = logging.getLogger(__name__)

IMAGINARY_TOLERANCE = 1e-8
DECOMPOSE_MAX_CONDITION = 1e10
GENERATE_MAX_CONDITION = 1e6
RECONSTRUCTION_TOLERANCE = 1e-8
MAX_REGENERATIONS = 100


def as_matrix(a: t.Any, *, name: str = "matrix") -> Matrix:
    """Coerce ``a`` to a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _require_square(a: Matrix) -> None:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"dimension mismatch: expected a square matrix, got {a.shape}")


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product ``a @ b``.

    Raises:
        ValueError: If ``a.cols != b.rows`` ("dimension mismatch").
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def _normalize_columns(vectors: Matrix) -> Matrix:
    norms = np.linalg.norm(vectors, axis=0)
    out = vectors / norms[np.newaxis, :]
    # largest-magnitude component of each column positive
    pivots = np.argmax(np.abs(out), axis=0)
    signs = np.sign(out[pivots, np.arange(out.shape[1])])
    signs[signs == 0] = 1.0
    return out * signs[np.newaxis, :]


def _sorted_order(eigenvalues: Vector, vectors: Matrix) -> list[int]:
    return sorted(
        range(eigenvalues.shape[0]),
        key=lambda i: (-eigenvalues[i], tuple(vectors[:, i])),
    )


def decompose(a: Matrix) -> Spectrum:
    """Real eigendecomposition of a diagonalizable matrix.

    Eigenvalues are sorted in descending order, ties broken by the
    lexicographic order of their unit-norm eigenvectors.

    Raises:
        ValueError: If ``a`` is not square.
        NumericalError: "complex or defective spectrum" when an eigenvalue has
            a relative imaginary part above 1e-8 or the eigenvector matrix has
            condition number above 1e10.
    """
    a = as_matrix(a)
    _require_square(a)

    values, vectors = np.linalg.eig(a)
    scale = max(1.0, float(np.max(np.abs(values))) if values.size else 1.0)
    if np.any(np.abs(values.imag) > IMAGINARY_TOLERANCE * scale):
        raise NumericalError("complex or defective spectrum: eigenvalues are not real")

    values = values.real.astype(np.float64)
    vectors = _normalize_columns(vectors.real.astype(np.float64))

    condition = float(np.linalg.cond(vectors))
    if not np.isfinite(condition) or condition > DECOMPOSE_MAX_CONDITION:
        raise NumericalError(
            f"complex or defective spectrum: eigenvector condition {condition:.3e}"
        )

    order = _sorted_order(values, vectors)
    values = values[order]
    vectors = vectors[:, order]
    spectrum = Spectrum(
        eigenvalues=values,
        eigenvector_matrix=vectors,
        inverse_eigenvector_matrix=np.linalg.inv(vectors),
    )

    error = float(np.max(np.abs(spectrum.reconstruct() - a))) if a.size else 0.0
    if error > RECONSTRUCTION_TOLERANCE * max(1.0, float(np.max(np.abs(a)))):
        raise NumericalError(f"complex or defective spectrum: reconstruction error {error:.3e}")
    return spectrum


def spectral_radius(a: Matrix) -> float:
    """Largest absolute eigenvalue of a real-diagonalizable matrix."""
    return decompose(a).radius


def matrix_lth_root(a: Matrix, depth: int) -> Matrix:
    """Principal real ``depth``-th root ``M diag(lambda^(1/L)) M^-1``.

    Raises:
        NumericalError: "nonpositive eigenvalue" if any eigenvalue is <= 0.
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    spectrum = decompose(a)
    if np.any(spectrum.eigenvalues <= 0.0):
        raise NumericalError(
            f"nonpositive eigenvalue: min eigenvalue {float(spectrum.eigenvalues.min()):.6g}"
        )
    return spectrum.map_eigenvalues(spectrum.eigenvalues ** (1.0 / depth))


def random_orthogonal(n: int, rng: SeededRng) -> Matrix:
    """Haar-distributed orthogonal matrix from the QR factor of a normal draw."""
    q, r = np.linalg.qr(rng.normal((n, n)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs[np.newaxis, :]


def random_diagonalizable(
        n: int,
        eig_low: float,
        eig_high: float,
        rng: SeededRng,
        *,
        orthogonal: bool = False,
) -> tuple[Matrix, Spectrum]:
    """Draw ``R = M diag(lambda) M^-1`` with a planted real spectrum.

    Eigenvalues are drawn first (``n`` uniform draws on ``[eig_low, eig_high]``),
    then the eigenvector matrix: i.i.d. standard normal entries in row-major
    order, or the sign-fixed Q factor of such a draw when ``orthogonal`` is set
    (``R`` is then symmetric). The planted spectrum is returned sorted in
    descending order.

    Raises:
        ValueError: If ``n < 1`` or ``eig_low > eig_high``.
        NumericalError: "degenerate eigenvector draw" after 100 ill-conditioned
            eigenvector matrices.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if eig_low > eig_high:
        raise ValueError(f"eig_low must not exceed eig_high ({eig_low} > {eig_high})")

    eigenvalues = np.sort(rng.uniform(eig_low, eig_high, size=n))[::-1].copy()

    for attempt in range(MAX_REGENERATIONS):
        basis = random_orthogonal(n, rng) if orthogonal else rng.normal((n, n))
        condition = float(np.linalg.cond(basis))
        if not np.isfinite(condition) or condition > GENERATE_MAX_CONDITION:
            logger.debug("Regenerating eigenvectors (attempt %d, cond=%.3e)", attempt + 1, condition)
            continue
        inverse = basis.T.copy() if orthogonal else np.linalg.inv(basis)
        spectrum = Spectrum(
            eigenvalues=eigenvalues,
            eigenvector_matrix=basis,
            inverse_eigenvector_matrix=inverse,
        )
        target = spectrum.reconstruct()
        if orthogonal:
            target = 0.5 * (target + target.T)
        return target, spectrum

    raise NumericalError(
        f"degenerate eigenvector draw: {MAX_REGENERATIONS} draws exceeded condition {GENERATE_MAX_CONDITION:.0e}"
    )


def max_abs(a: t.Any) -> float:
    """Max-abs norm, 0 for empty input."""
    arr = np.asarray(a, dtype=np.float64)
    return float(np.max(np.abs(arr))) if arr.size else 0.0
