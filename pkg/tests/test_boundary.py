"""Tests for the bisected stability boundary."""
import pytest

from numerics_core.errors import NumericalError
from scalar_dynamics.boundary import (
    NoBracketError,
    empirical_stability_boundary,
    locate_stability_boundary,
    probe_step,
)
from scalar_dynamics.bounds import disproportionate_equilibrium
from scalar_dynamics.models import ScalarChain, ScalarProblem


def test_probe_classifies_both_sides() -> None:
    eq = ScalarChain((2.0, 2.0))
    below = probe_step(eq, ScalarProblem(lam=4.0, sigma=1.0, depth=2, step=0.2))
    above = probe_step(eq, ScalarProblem(lam=4.0, sigma=1.0, depth=2, step=0.3))
    assert below.stable
    assert not above.stable


def test_balanced_two_layer_boundary() -> None:
    result = locate_stability_boundary(2, 4.0, 1.0, [2.0, 2.0], 1e-2)
    assert result.predicted == pytest.approx(0.25)
    assert result.relative_gap <= 0.05
    assert result.lower <= result.boundary <= result.upper
    assert result.probes[0].stable and not result.probes[1].stable


def test_disproportionate_boundary() -> None:
    eq = disproportionate_equilibrium(2, 4.0, 4.0)
    result = locate_stability_boundary(2, 4.0, 1.0, eq, 1e-2)
    assert result.predicted == pytest.approx(2.0 / 64.25)
    assert result.relative_gap <= 0.05


def test_empirical_boundary_returns_midpoint() -> None:
    boundary = empirical_stability_boundary(2, 4.0, 1.0, [2.0, 2.0], 1e-2)
    assert boundary == pytest.approx(0.25, rel=0.05)


def test_rejects_non_equilibrium() -> None:
    with pytest.raises(ValueError, match="not an equilibrium"):
        locate_stability_boundary(2, 4.0, 1.0, [1.0, 1.0])


def test_rejects_bad_tolerance() -> None:
    with pytest.raises(ValueError, match="rel_tol"):
        locate_stability_boundary(2, 4.0, 1.0, [2.0, 2.0], 1.5)


def test_no_bracket_error_is_numerical() -> None:
    assert issubclass(NoBracketError, NumericalError)


@pytest.mark.slow
@pytest.mark.parametrize("depth,lam,kappa", [
    (2, 4.0, 1.0),
    (3, 8.0, 1.0),
    (5, 2.0, 1.0),
    (10, 1.5, 1.0),
    (2, 4.0, 4.0),
])
def test_boundary_within_five_percent(depth: int, lam: float, kappa: float) -> None:
    eq = disproportionate_equilibrium(depth, lam, kappa)
    result = locate_stability_boundary(depth, lam, 1.0, eq, 1e-2)
    assert result.relative_gap <= 0.05
