"""Tests for gradient descent on products of matrices."""
import numpy as np
import pytest

from matrix_dynamics.bounds import instability_threshold, least_squares_bound, safe_step
from matrix_dynamics.dynamics import (
    chain_gradients,
    chain_loss,
    covariance_from_points,
    decoupling_check,
    double_chain_gradients,
    double_chain_loss,
    matrix_chain_step,
    modal_weights,
    simulate_matrix,
)
from matrix_dynamics.models import DoubleMatrixChain, MatrixChain, MatrixProblem
from numerics_core.errors import NumericalError
from numerics_core.linalg import matrix_lth_root, random_diagonalizable
from numerics_core.rng import SeededRng
from scalar_dynamics.bounds import critical_step
from scalar_dynamics.dynamics import scalar_chain_step
from scalar_dynamics.models import Mode, Outcome, ScalarChain, ScalarProblem


def _random_problem(n: int, depth: int, seed: int) -> tuple[MatrixChain, MatrixProblem]:
    rng = SeededRng(seed)
    layers = tuple(np.eye(n) + 0.1 * rng.normal((n, n)) for _ in range(depth))
    a = rng.normal((n, n))
    sigma = a @ a.T / n + np.eye(n)
    sigma = 0.5 * (sigma + sigma.T)
    return MatrixChain(layers), MatrixProblem(target=rng.normal((n, n)), sigma=sigma, step=0.01)


def _finite_difference(loss, layers: list[np.ndarray], h: float = 1e-6) -> list[np.ndarray]:
    grads = []
    for i, w in enumerate(layers):
        g = np.zeros_like(w)
        for index in np.ndindex(w.shape):
            up = [x.copy() for x in layers]
            down = [x.copy() for x in layers]
            up[i][index] += h
            down[i][index] -= h
            g[index] = (loss(up) - loss(down)) / (2 * h)
        grads.append(g)
    return grads


def test_bounds_values() -> None:
    assert instability_threshold(3, 8.0) == pytest.approx(1.0 / 24.0)
    assert safe_step(3, 8.0) == pytest.approx(1.0 / 48.0)
    assert safe_step(2, 0.5) == pytest.approx(0.5)
    assert least_squares_bound(np.diag([1.0, 4.0])) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        instability_threshold(0, 1.0)


def test_covariance_from_points() -> None:
    points = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 2.0], [0.0, 0.0]])
    np.testing.assert_allclose(covariance_from_points(points), [[0.5, 0.5], [0.5, 2.0]])


@pytest.mark.parametrize("seed", range(100))
def test_gradient_matches_finite_differences(seed: int) -> None:
    n, depth = 2 + seed % 3, 1 + seed % 4
    chain, prob = _random_problem(n, depth, seed=seed)
    exact = chain_gradients(chain, prob)
    numeric = _finite_difference(lambda layers: chain_loss(MatrixChain(tuple(layers)), prob), list(chain.layers))
    for e, fd in zip(exact, numeric):
        np.testing.assert_allclose(e, fd, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("seed", range(100))
def test_double_gradient_matches_finite_differences(seed: int) -> None:
    n, depth = 2 + seed % 2, 1 + seed % 3
    plus, prob = _random_problem(n, depth, seed=seed)
    minus, _ = _random_problem(n, depth, seed=seed + 1000)
    chain = DoubleMatrixChain(plus, minus)
    exact_plus, exact_minus = double_chain_gradients(chain, prob)

    def loss(layers: list[np.ndarray]) -> float:
        return double_chain_loss(
            DoubleMatrixChain(MatrixChain(tuple(layers[:depth])), MatrixChain(tuple(layers[depth:]))), prob,
        )

    numeric = _finite_difference(loss, list(plus.layers) + list(minus.layers))
    for e, fd in zip(exact_plus + exact_minus, numeric):
        np.testing.assert_allclose(e, fd, rtol=1e-5, atol=1e-7)


def test_width_one_matches_scalar_chain() -> None:
    depth, lam = 4, 2.0
    step = 0.5 * critical_step(depth, lam, 1.0)
    scalar = ScalarChain((1.0, 0.9, 1.1, 1.0))
    matrix = MatrixChain(tuple(np.array([[w]]) for w in scalar.weights))
    s_prob = ScalarProblem(lam=lam, sigma=1.0, depth=depth, step=step)
    m_prob = MatrixProblem.whitened(np.array([[lam]]), step)
    for _ in range(200):
        scalar = scalar_chain_step(scalar, s_prob)
        matrix = matrix_chain_step(matrix, m_prob)
        got = [float(w[0, 0]) for w in matrix.layers]
        assert got == pytest.approx(list(scalar.weights), rel=1e-12)


def test_width_one_matches_scalar_chain_on_random_problems() -> None:
    rng = SeededRng(2024)
    for _ in range(100):
        depth = 2 + int(5 * rng.random())
        lam = rng.uniform(0.2, 3.0)
        sigma = rng.uniform(0.5, 2.0)
        step = 0.2 * critical_step(depth, lam, sigma)
        scalar = ScalarChain(tuple(rng.uniform(0.9, 1.1) for _ in range(depth)))
        matrix = MatrixChain(tuple(np.array([[w]]) for w in scalar.weights))
        s_prob = ScalarProblem(lam=lam, sigma=sigma, depth=depth, step=step)
        m_prob = MatrixProblem(target=np.array([[lam]]), sigma=np.array([[sigma]]), step=step)
        for _ in range(50):
            scalar = scalar_chain_step(scalar, s_prob)
            matrix = matrix_chain_step(matrix, m_prob)
        got = [float(w[0, 0]) for w in matrix.layers]
        assert got == pytest.approx(list(scalar.weights), rel=1e-12)


def test_width_one_gradients_break_layer_symmetry_in_last_bits() -> None:
    # prefix/suffix products round differently per layer; the scalar cofactor does not
    rng = SeededRng(11)
    depth = 6
    asymmetric = 0
    for _ in range(200):
        c = rng.uniform(0.9, 1.1)
        chain = MatrixChain.repeated(np.array([[c]]), depth)
        prob = MatrixProblem.whitened(np.array([[2.0]]), 0.01)
        grads = {float(g[0, 0]) for g in chain_gradients(chain, prob)}
        asymmetric += len(grads) > 1

        scalar = scalar_chain_step(ScalarChain((c,) * depth), ScalarProblem(lam=2.0, sigma=1.0, depth=depth, step=0.01))
        assert len(set(scalar.weights)) == 1
    assert asymmetric > 0


def test_dimension_mismatch() -> None:
    with pytest.raises(ValueError, match="dimension mismatch"):
        chain_loss(MatrixChain.identity(2, 3), MatrixProblem.whitened(np.eye(2), 0.1))
    with pytest.raises(ValueError, match="dimension mismatch"):
        MatrixChain((np.eye(2), np.eye(3)))


def test_problem_rejects_asymmetric_sigma() -> None:
    with pytest.raises(ValueError, match="symmetric"):
        MatrixProblem(target=np.eye(2), sigma=np.array([[1.0, 0.5], [0.0, 1.0]]), step=0.1)


def test_safe_step_reaches_lth_root() -> None:
    depth = 3
    target, spectrum = random_diagonalizable(5, 0.5, 1.5, SeededRng(5), orthogonal=True)
    prob = MatrixProblem.whitened(target, safe_step(depth, spectrum.radius))
    trajectory = simulate_matrix(MatrixChain.identity(depth, 5), prob, 2000, converged_loss=0.0)

    root = matrix_lth_root(target, depth)
    assert trajectory.outcome is not Outcome.DIVERGED
    for w in trajectory.final_state.layers:
        np.testing.assert_allclose(w, root, atol=1e-9)


def test_threshold_separates_stable_and_unstable_steps() -> None:
    depth = 3
    target, spectrum = random_diagonalizable(5, 0.5, 1.5, SeededRng(6), orthogonal=True)
    threshold = instability_threshold(depth, spectrum.radius)
    balanced = MatrixChain.repeated(matrix_lth_root(target, depth), depth)
    start = balanced.scaled(1.001)

    stable = simulate_matrix(
        start, MatrixProblem.whitened(target, 0.9 * threshold), 20_000, reference=balanced,
    )
    unstable = simulate_matrix(
        start, MatrixProblem.whitened(target, 1.1 * threshold), 20_000, reference=balanced,
    )
    assert stable.outcome is not Outcome.DIVERGED
    assert unstable.outcome is Outcome.DIVERGED


def test_symmetric_target_keeps_layers_in_eigenbasis() -> None:
    depth = 4
    target, spectrum = random_diagonalizable(5, 0.5, 1.5, SeededRng(7), orthogonal=True)
    prob = MatrixProblem.whitened(target, safe_step(depth, spectrum.radius))
    trajectory = simulate_matrix(MatrixChain.identity(depth, 5), prob, 300, snapshot_every=50, converged_loss=0.0)

    basis = spectrum.eigenvector_matrix
    for _, state in trajectory.snapshots:
        assert decoupling_check(state, basis) < 1e-10


def test_modal_weights_follow_scalar_chains() -> None:
    depth = 3
    target, spectrum = random_diagonalizable(5, 0.5, 1.5, SeededRng(8), orthogonal=True)
    step = safe_step(depth, spectrum.radius)
    prob = MatrixProblem.whitened(target, step)
    chain = MatrixChain.identity(depth, 5)
    scalars = [ScalarChain.constant(depth) for _ in spectrum.eigenvalues]
    problems = [ScalarProblem(lam=float(lam), sigma=1.0, depth=depth, step=step) for lam in spectrum.eigenvalues]

    for _ in range(100):
        chain = matrix_chain_step(chain, prob)
        scalars = [scalar_chain_step(s, p) for s, p in zip(scalars, problems)]

    expected = np.array([s.weights for s in scalars]).T
    np.testing.assert_allclose(modal_weights(chain, spectrum.eigenvector_matrix), expected, atol=1e-10)


def test_singular_basis_is_rejected() -> None:
    with pytest.raises(NumericalError, match="singular basis"):
        modal_weights(MatrixChain.identity(2, 2), np.array([[1.0, 1.0], [1.0, 1.0]]))


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_double_network_fits_negative_eigenvalues(seed: int) -> None:
    depth, width = 2, 4
    target, spectrum = random_diagonalizable(width, -1.5, 1.5, SeededRng(seed), orthogonal=True)
    prob = MatrixProblem.whitened(target, 0.2)
    start = MatrixChain.identity(depth, width)

    single = simulate_matrix(start, prob, 2000, Mode.SINGLE, converged_loss=0.0)
    double = simulate_matrix(start, prob, 2000, Mode.DOUBLE, converged_loss=0.0)

    negative = spectrum.eigenvalues[spectrum.eigenvalues < 0]
    plateau = 0.5 * float(np.sum(negative ** 2))
    assert double.final_error < 1e-8
    assert single.final_error >= 0.99 * plateau
    if negative.size:
        assert double.final_error < single.final_error


@pytest.mark.slow
def test_double_beats_single_at_full_scale() -> None:
    from lab.tasks import single_vs_double

    runs = [single_vs_double(0, seed) for seed in range(1, 11)]
    better = sum(1 for r in runs if r.double_final <= r.single_final)
    assert better >= 9
    assert all(r.double_outcome != Outcome.DIVERGED.value for r in runs)
