"""Task functions run by the sweep executor.

Every task takes plain JSON-compatible arguments, builds its own generator
from ``(root_seed, seed)`` and returns a result dataclass, so plans can be
printed, validated and resolved with ``$task.field`` references. Summary
tasks at the end of each plan reduce the per-case results to the numbers
recorded in the run manifest.
"""
from __future__ import annotations

import logging
import math
import typing as t

import numpy as np

from convex_resnet.diagnostics import (
    bias_gradient_formula,
    lipschitz_1d,
    midpoint_convexity_gap,
    pair_optimality_residuals,
    random_feasible_network,
    trunk_is_monotone,
)
from convex_resnet.models import Dataset, TrainConfig
from convex_resnet.network import backprop, pair_values
from convex_resnet.serialization import pair_to_dict
from convex_resnet.targets import linear_target, piecewise_target, zigzag_target
from convex_resnet.training import TrainingDivergedError, init_pair, nesterov_train
from lab.models import (
    BoundaryCaseResult,
    ConvexityBatch,
    FitResult,
    MatrixComparison,
    OptCondResult,
    RateCheckResult,
    ScalarCaseResult,
)
from matrix_dynamics.bounds import instability_threshold, safe_step
from matrix_dynamics.dynamics import matrix_chain_step, modal_weights, simulate_matrix
from matrix_dynamics.models import MatrixChain, MatrixProblem
from numerics_core.linalg import matrix_lth_root, max_abs, random_diagonalizable
from numerics_core.rng import SeededRng
from scalar_dynamics.boundary import locate_stability_boundary
from scalar_dynamics.bounds import (
    convergence_rate,
    critical_step,
    disproportionate_equilibrium,
    negative_lambda_bound,
)
from scalar_dynamics.dynamics import scalar_chain_step, simulate_scalar
from scalar_dynamics.models import Mode, Outcome, ScalarChain, ScalarProblem

logger = logging.getLogger(__name__)

ENVELOPE_SLACK = 1e-12


def seeded_rng(root_seed: int, seed: int) -> SeededRng:
    """Generator for one seed of a sweep: child ``seed`` of the config's root generator."""
    return SeededRng(root_seed).spawn(seed)


# ---- scalar chains ----

def scalar_case(
        depth: int,
        lam: float,
        sigma: float = 1.0,
        step_fraction: float = 1.0,
        max_iters: int = 1_000_000,
) -> ScalarCaseResult:
    """Identity-initialized run for one (depth, lambda) cell.

    ``lam > 0``: runs at ``step_fraction * critical_step`` and counts
    iterations where ``|w[k] - lam^(1/L)|`` exceeds ``rho^k |1 - lam^(1/L)|``.
    ``lam < 0``: runs the single chain at the negative-target bound (weights
    should collapse to 0) and the double chain at half of it (the product
    should reach ``lam``).
    """
    start = ScalarChain.constant(depth, 1.0)

    if lam > 0:
        step = step_fraction * critical_step(depth, lam, sigma)
        rate = convergence_rate(depth, lam, sigma, step)
        root = lam ** (1.0 / depth)
        initial_gap = abs(1.0 - root)
        violations = 0

        def check_envelope(k: int, state: t.Any) -> None:
            nonlocal violations
            bound = rate ** k * initial_gap + ENVELOPE_SLACK
            if any(abs(w - root) > bound for w in state.weights):
                violations += 1

        prob = ScalarProblem(lam=lam, sigma=sigma, depth=depth, step=step)
        trajectory = simulate_scalar(start, prob, max_iters, on_step=check_envelope)
        if violations:
            logger.warning("Envelope violated %d times at L=%d, lambda=%g", violations, depth, lam)
        return ScalarCaseResult(
            depth=depth,
            lam=lam,
            step=step,
            outcome=trajectory.outcome.value,
            iterations=trajectory.iterations_run,
            final_error=trajectory.final_error,
            errors=trajectory.errors,
            rate=rate,
            envelope_violations=violations,
        )

    step = negative_lambda_bound(lam, sigma)
    prob = ScalarProblem(lam=lam, sigma=sigma, depth=depth, step=step)
    single = simulate_scalar(start, prob, max_iters)
    double = simulate_scalar(start, prob.with_step(0.5 * step), max_iters, Mode.DOUBLE)
    return ScalarCaseResult(
        depth=depth,
        lam=lam,
        step=step,
        outcome=single.outcome.value,
        iterations=single.iterations_run,
        final_error=single.final_error,
        errors=single.errors,
        max_abs_weight=max(abs(w) for w in single.final_state.weights),
        double_step=0.5 * step,
        double_outcome=double.outcome.value,
        double_final_error=double.final_error,
    )


def boundary_case(
        depth: int,
        lam: float,
        kappa: float = 1.0,
        sigma: float = 1.0,
        rel_tol: float = 1e-2,
        probe_iterations: int = 100_000,
        perturbation: float = 1e-3,
        escape_radius: float = 1e-2,
) -> BoundaryCaseResult:
    """Bisected stability boundary of one equilibrium against its closed form."""
    equilibrium = disproportionate_equilibrium(depth, lam, kappa)
    result = locate_stability_boundary(
        depth, lam, sigma, equilibrium, rel_tol,
        probe_iterations=probe_iterations,
        perturbation=perturbation,
        escape_radius=escape_radius,
    )
    logger.info(
        "L=%d lambda=%g kappa=%g: predicted %.6g, empirical %.6g (%d probes)",
        depth, lam, kappa, result.predicted, result.boundary, len(result.probes),
    )
    return BoundaryCaseResult(
        depth=depth,
        lam=lam,
        kappa=kappa,
        predicted=result.predicted,
        empirical=result.boundary,
        relative_gap=result.relative_gap,
        probes=len(result.probes),
    )


# ---- matrix chains ----

def single_vs_double(
        root_seed: int,
        seed: int,
        width: int = 20,
        depth: int = 20,
        eig_low: float = -1.5,
        eig_high: float = 1.5,
        iterations: int = 10_000,
        orthogonal: bool = False,
        step: t.Optional[float] = None,
) -> MatrixComparison:
    """Train a single and a double residual network on one random target.

    Both start from identity layers with ``Sigma = I`` and run the full
    iteration budget.
    """
    rng = seeded_rng(root_seed, seed)
    target, spectrum = random_diagonalizable(width, eig_low, eig_high, rng, orthogonal=orthogonal)
    radius = spectrum.radius
    delta = step if step is not None else safe_step(depth, radius)
    prob = MatrixProblem.whitened(target, delta)
    start = MatrixChain.identity(depth, width)

    single = simulate_matrix(start, prob, iterations, Mode.SINGLE, converged_loss=0.0)
    double = simulate_matrix(start, prob, iterations, Mode.DOUBLE, converged_loss=0.0)
    logger.info(
        "seed %d: rho=%.4f step=%.4g single %.4e (%s), double %.4e (%s)",
        seed, radius, delta, single.final_error, single.outcome.value,
        double.final_error, double.outcome.value,
    )
    return MatrixComparison(
        seed=seed,
        step=delta,
        spectral_radius=radius,
        single_losses=single.errors,
        double_losses=double.errors,
        single_outcome=single.outcome.value,
        double_outcome=double.outcome.value,
    )


def rate_check(
        root_seed: int,
        seed: int,
        width: int = 5,
        depth: int = 5,
        eig_low: float = 0.5,
        eig_high: float = 1.5,
        iterations: int = 2_000,
        modal_steps: int = 1_000,
        stable_factor: float = 0.9,
        unstable_factor: float = 1.1,
        perturbation: float = 1e-3,
        escape_radius: float = 1e-2,
        check_iterations: int = 20_000,
) -> RateCheckResult:
    """Safe-step convergence, threshold instability and modal decoupling on a symmetric target.

    ``root_error`` is the max-abs distance of the trained layers from
    ``R^(1/L)``; ``modal_deviation`` is the largest gap between the modal
    weights of the matrix chain and scalar chains run on each eigenvalue.
    """
    rng = seeded_rng(root_seed, seed)
    target, spectrum = random_diagonalizable(width, eig_low, eig_high, rng, orthogonal=True)
    radius = spectrum.radius
    delta = safe_step(depth, radius)
    threshold = instability_threshold(depth, radius)
    prob = MatrixProblem.whitened(target, delta)
    root = matrix_lth_root(target, depth)

    trained = simulate_matrix(MatrixChain.identity(depth, width), prob, iterations, converged_loss=0.0)
    root_error = max(max_abs(w - root) for w in trained.final_state.layers)

    balanced = MatrixChain.repeated(root, depth)
    perturbed = balanced.scaled(1.0 + perturbation)
    outcomes = []
    unstable_iterations = 0
    for factor in (stable_factor, unstable_factor):
        run = simulate_matrix(
            perturbed, prob.with_step(factor * threshold), check_iterations,
            reference=balanced, escape_radius=escape_radius,
        )
        outcomes.append(run.outcome.value)
        unstable_iterations = run.iterations_run

    modal_deviation = modal_deviation_from_scalar(
        prob, spectrum.eigenvector_matrix, spectrum.eigenvalues, depth, modal_steps,
    )
    logger.info(
        "seed %d: root error %.3e, stable side %s, unstable side %s, modal gap %.3e",
        seed, root_error, outcomes[0], outcomes[1], modal_deviation,
    )
    return RateCheckResult(
        seed=seed,
        safe_step=delta,
        threshold=threshold,
        root_error=root_error,
        stable_outcome=outcomes[0],
        unstable_outcome=outcomes[1],
        unstable_iterations=unstable_iterations,
        modal_deviation=modal_deviation,
        losses=trained.errors,
    )


def modal_deviation_from_scalar(
        prob: MatrixProblem,
        basis: t.Any,
        eigenvalues: t.Sequence[float],
        depth: int,
        steps: int,
) -> float:
    """Largest gap between the modal weights of a matrix chain and per-eigenvalue scalar chains.

    Both start from identity / all-ones and take ``steps`` updates with the
    problem's step size; ``Sigma`` must be the identity.
    """
    chain = MatrixChain.identity(depth, prob.width)
    scalars = [
        (ScalarChain.constant(depth, 1.0), ScalarProblem(lam=float(lam), sigma=1.0, depth=depth, step=prob.step))
        for lam in eigenvalues
    ]
    worst = 0.0
    for _ in range(steps):
        chain = matrix_chain_step(chain, prob)
        scalars = [(scalar_chain_step(state, p), p) for state, p in scalars]
        modes = modal_weights(chain, basis)  # (L, n)
        expected = np.array([state.weights for state, _ in scalars]).T
        worst = max(worst, max_abs(modes - expected))
    return worst


# ---- convex-concave pairs ----

def _fit_config(
        step: float,
        max_epochs: int,
        bias_range: t.Sequence[float],
        weight_init_range: t.Sequence[float],
        projection: bool,
) -> TrainConfig:
    return TrainConfig(
        step=step,
        max_epochs=max_epochs,
        bias_init_range=(float(bias_range[0]), float(bias_range[1])),
        weight_init_range=(float(weight_init_range[0]), float(weight_init_range[1])),
        projection=projection,
        fixed_v=True,
    )


def fit_1d(
        root_seed: int,
        seed: int,
        bias_range: list[float],
        depth: int = 10,
        grid_size: int = 51,
        step: float = 1.5e-4,
        max_epochs: int = 8_000,
        weight_init_range: t.Optional[list[float]] = None,
        projection: bool = True,
        keep_model: bool = False,
) -> FitResult:
    """Fit a pair of scalar residual chains to the zigzag target.

    Seeds are shared across bias ranges: the same draws are rescaled, so
    results pair up seed by seed. A run that blows up is reported with an
    infinite final loss instead of failing the sweep. Trunk weights start in
    ``[0, 0.01]``, which keeps every initial kink within 0.05 left of its bias.
    """
    cfg = _fit_config(step, max_epochs, bias_range, weight_init_range or [0.0, 0.01], projection)
    data = piecewise_target(zigzag_target(), grid_size)
    pair = init_pair(1, depth, cfg, seeded_rng(root_seed, seed))

    try:
        result = nesterov_train(pair, data, cfg)
    except TrainingDivergedError as e:
        logger.warning("seed %d, bias range %s: %s", seed, bias_range, e)
        return FitResult(
            seed=seed, bias_range=list(bias_range), losses=[], final_loss=math.inf,
            lipschitz=math.inf, diverged=True,
        )

    x = data.points[:, 0]
    return FitResult(
        seed=seed,
        bias_range=list(bias_range),
        losses=result.losses,
        final_loss=result.final_loss,
        lipschitz=lipschitz_1d(result.pair),
        diverged=False,
        x=x.tolist(),
        target=data.labels.tolist(),
        estimate=pair_values(result.pair, data.points).tolist(),
        model=pair_to_dict(result.pair) if keep_model else None,
    )


def convexity_batch(
        root_seed: int,
        start: int,
        count: int,
        pairs: int = 1_000,
        input_dim: int = 3,
        depth: int = 3,
        width: t.Optional[int] = None,
        parameter_scale: float = 1.0,
        domain_high: float = 2.0,
) -> ConvexityBatch:
    """Midpoint gaps of networks ``start .. start + count - 1`` on random point pairs in ``[0, domain_high]^n``."""
    gaps: list[float] = []
    monotone: list[bool] = []
    for index in range(start, start + count):
        rng = seeded_rng(root_seed, index)
        net = random_feasible_network(input_dim, depth, rng, width=width, scale=parameter_scale)
        a = rng.uniform(0.0, domain_high, size=(pairs, input_dim))
        b = rng.uniform(0.0, domain_high, size=(pairs, input_dim))
        gaps.append(midpoint_convexity_gap(net, a, b))
        monotone.append(trunk_is_monotone(net, a))
    return ConvexityBatch(start=start, gaps=gaps, monotone=monotone)


def optimality_audit(
        root_seed: int,
        seed: int,
        target: str = "linear",
        slope: float = 2.0,
        grid_size: int = 50,
        depth: int = 1,
        step: float = 1e-2,
        max_epochs: int = 20_000,
        bias_init_range: t.Optional[list[float]] = None,
        projection: bool = True,
) -> OptCondResult:
    """Train one pair and evaluate its first-order optimality residuals.

    ``threshold`` is ``1e-6 * N * max|y|``; ``bias_formula_error`` compares
    the closed-form bias gradient with backpropagation.
    """
    if target == "linear":
        data: Dataset = linear_target(slope, grid_size)
    elif target == "zigzag":
        data = piecewise_target(zigzag_target(), grid_size)
    else:
        raise ValueError(f"unknown target '{target}'")
    cfg = _fit_config(step, max_epochs, bias_init_range or [0.5, 1.0], [0.0, 0.1], projection)
    pair = init_pair(1, depth, cfg, seeded_rng(root_seed, seed))
    result = nesterov_train(pair, data, cfg)
    trained = result.pair

    plus_res, minus_res = pair_optimality_residuals(trained, data)
    residual = pair_values(trained, data.points) - data.labels
    grad = backprop(trained, data)
    formula_error = 0.0
    for net, net_grad, r in ((trained.plus, grad.plus, residual), (trained.minus, grad.minus, -residual)):
        for formula, exact in zip(bias_gradient_formula(net, data, r), net_grad.b):
            formula_error = max(formula_error, max_abs(formula - exact))

    return OptCondResult(
        seed=seed,
        final_loss=result.final_loss,
        gradient_norm=result.gradient_norm,
        plus_residuals=[*plus_res.layer_norms, plus_res.head_norm],
        minus_residuals=[*minus_res.layer_norms, minus_res.head_norm],
        largest_residual=max(plus_res.largest, minus_res.largest),
        threshold=1e-6 * data.count * float(np.max(np.abs(data.labels))),
        bias_formula_error=formula_error,
        losses=result.losses,
    )


# ---- summaries ----

def summarize_scalar_sweep(cases: list[ScalarCaseResult]) -> dict[str, t.Any]:
    positive = [c for c in cases if c.envelope_violations is not None]
    negative = [c for c in cases if c.max_abs_weight is not None]
    return {
        "cases": len(cases),
        "envelope_cases": len(positive),
        "envelope_violations": sum(c.envelope_violations or 0 for c in positive),
        "collapse_cases": len(negative),
        "collapsed_to_zero": sum(1 for c in negative if (c.max_abs_weight or 0.0) < 1e-6),
        "double_reached_target": sum(
            1 for c in negative if c.double_final_error is not None and abs(c.double_final_error) < 1e-8
        ),
    }


def summarize_boundaries(cases: list[BoundaryCaseResult]) -> dict[str, t.Any]:
    return {
        "cases": len(cases),
        "within_5_percent": sum(1 for c in cases if c.relative_gap <= 0.05),
        "largest_relative_gap": max((c.relative_gap for c in cases), default=0.0),
    }


def summarize_single_vs_double(runs: list[MatrixComparison]) -> dict[str, t.Any]:
    return {
        "seeds": len(runs),
        "double_better": sum(1 for r in runs if r.double_final < r.single_final),
        "double_diverged": sum(1 for r in runs if r.double_outcome == Outcome.DIVERGED.value),
        "single_diverged": sum(1 for r in runs if r.single_outcome == Outcome.DIVERGED.value),
    }


def summarize_rate_checks(runs: list[RateCheckResult]) -> dict[str, t.Any]:
    return {
        "seeds": len(runs),
        "largest_root_error": max((r.root_error for r in runs), default=0.0),
        "unstable_escaped": sum(1 for r in runs if r.unstable_outcome == Outcome.DIVERGED.value),
        "stable_held": sum(1 for r in runs if r.stable_outcome != Outcome.DIVERGED.value),
        "largest_modal_deviation": max((r.modal_deviation for r in runs), default=0.0),
    }


def summarize_fits(
        runs: list[FitResult],
        success_loss: float = 1e-4,
        lipschitz_cap: float = 2.1,
) -> dict[str, t.Any]:
    """Per bias range: successes and diverged runs.

    The first bias range is compared seed by seed against the last one.
    """
    by_range: dict[tuple[float, ...], dict[int, FitResult]] = {}
    for run in runs:
        by_range.setdefault(tuple(run.bias_range), {})[run.seed] = run

    ranges = list(by_range)
    summary: dict[str, t.Any] = {
        "ranges": {
            f"[{low:g},{high:g}]": {
                "seeds": len(group),
                "successes": sum(1 for r in group.values() if r.final_loss < success_loss),
                "diverged": sum(1 for r in group.values() if r.diverged),
            }
            for (low, high), group in by_range.items()
        }
    }
    if len(ranges) >= 2:
        first, last = by_range[ranges[0]], by_range[ranges[-1]]
        shared = sorted(set(first) & set(last))
        underfit = [first[s] for s in first if first[s].final_loss >= success_loss]
        summary["strictly_higher"] = sum(1 for s in shared if first[s].final_loss > last[s].final_loss)
        summary["compared_seeds"] = len(shared)
        summary["underfitting"] = len(underfit)
        summary["underfitting_within_cap"] = sum(1 for r in underfit if r.lipschitz <= lipschitz_cap)
    return summary


def summarize_convexity(batches: list[ConvexityBatch], tolerance: float = 1e-9) -> dict[str, t.Any]:
    gaps = [g for b in batches for g in b.gaps]
    return {
        "networks": len(gaps),
        "worst_gap": max(gaps, default=0.0),
        "violations": sum(1 for g in gaps if g > tolerance),
        "non_monotone": sum(1 for b in batches for m in b.monotone if not m),
    }


def summarize_optimality(runs: list[OptCondResult], gradient_tolerance: float = 1e-8) -> dict[str, t.Any]:
    stationary = [r for r in runs if r.gradient_norm < gradient_tolerance]
    return {
        "runs": len(runs),
        "stationary": len(stationary),
        "stationary_within_threshold": sum(1 for r in stationary if r.largest_residual < r.threshold),
        "largest_bias_formula_error": max((r.bias_formula_error for r in runs), default=0.0),
    }
