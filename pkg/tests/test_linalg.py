"""Tests for the eigendecomposition helpers."""
import numpy as np
import pytest

from numerics_core.errors import NumericalError
from numerics_core.linalg import (
    decompose,
    mat_mul,
    matrix_lth_root,
    max_abs,
    random_diagonalizable,
    random_orthogonal,
    spectral_radius,
)
from numerics_core.rng import SeededRng


def test_mat_mul_checks_dimensions() -> None:
    a = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(mat_mul(a, np.eye(3)), a)
    with pytest.raises(ValueError, match="dimension mismatch"):
        mat_mul(a, np.eye(2))


def test_decompose_sorts_descending_and_reconstructs() -> None:
    a = np.array([[2.0, 1.0], [0.0, -1.0]])
    spectrum = decompose(a)
    np.testing.assert_allclose(spectrum.eigenvalues, [2.0, -1.0])
    np.testing.assert_allclose(spectrum.reconstruct(), a, atol=1e-12)
    assert spectrum.radius == pytest.approx(2.0)


def test_decompose_rejects_rotation() -> None:
    with pytest.raises(NumericalError, match="complex or defective spectrum"):
        decompose(np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_decompose_rejects_jordan_block() -> None:
    with pytest.raises(NumericalError, match="complex or defective spectrum"):
        decompose(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_decompose_rejects_non_square() -> None:
    with pytest.raises(ValueError, match="dimension mismatch"):
        decompose(np.ones((2, 3)))


def test_spectral_radius_of_diagonal() -> None:
    assert spectral_radius(np.diag([0.5, -3.0, 2.0])) == pytest.approx(3.0)


def test_lth_root_powers_back() -> None:
    rng = SeededRng(1)
    target, _ = random_diagonalizable(4, 0.5, 1.5, rng)
    root = matrix_lth_root(target, 3)
    np.testing.assert_allclose(root @ root @ root, target, atol=1e-9)


def test_lth_root_needs_positive_spectrum() -> None:
    with pytest.raises(NumericalError, match="nonpositive eigenvalue"):
        matrix_lth_root(np.diag([1.0, -1.0]), 2)


def test_random_orthogonal_is_orthogonal() -> None:
    q = random_orthogonal(5, SeededRng(2))
    np.testing.assert_allclose(q.T @ q, np.eye(5), atol=1e-12)


def test_random_diagonalizable_plants_spectrum() -> None:
    target, spectrum = random_diagonalizable(6, -1.5, 1.5, SeededRng(3))
    assert np.all(np.diff(spectrum.eigenvalues) <= 0)
    assert spectrum.eigenvalues.min() >= -1.5 and spectrum.eigenvalues.max() <= 1.5
    np.testing.assert_allclose(
        np.sort(np.linalg.eigvals(target).real), np.sort(spectrum.eigenvalues), atol=1e-8,
    )


def test_random_diagonalizable_orthogonal_is_symmetric() -> None:
    target, spectrum = random_diagonalizable(5, 0.5, 1.5, SeededRng(4), orthogonal=True)
    np.testing.assert_array_equal(target, target.T)
    np.testing.assert_allclose(spectrum.inverse_eigenvector_matrix @ spectrum.eigenvector_matrix, np.eye(5), atol=1e-12)


def test_random_diagonalizable_is_deterministic() -> None:
    a, _ = random_diagonalizable(4, -1.0, 1.0, SeededRng(8))
    b, _ = random_diagonalizable(4, -1.0, 1.0, SeededRng(8))
    np.testing.assert_array_equal(a, b)


def test_random_diagonalizable_checks_range() -> None:
    with pytest.raises(ValueError):
        random_diagonalizable(3, 1.0, 0.0, SeededRng(0))
    with pytest.raises(ValueError):
        random_diagonalizable(0, 0.0, 1.0, SeededRng(0))


def test_max_abs() -> None:
    assert max_abs(np.array([[1.0, -4.0], [2.0, 3.0]])) == 4.0
    assert max_abs(np.empty((0, 0))) == 0.0
