"""
Data models for experiment configs, sweep plans and run manifests.

Each experiment kind has a parameter dataclass whose defaults reproduce the
corresponding bundled recipe at laptop scale.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
import typing as t


class ExperimentKind(Enum):
    """Experiment kinds accepted in the ``kind`` field of a config."""
    SCALAR_SWEEP = "ScalarSweep"
    SCALAR_BOUNDARY = "ScalarBoundary"
    MATRIX_SINGLE_VS_DOUBLE = "MatrixSingleVsDouble"
    MATRIX_RATE_CHECK = "MatrixRateCheck"
    FIT_1D = "Fit1D"
    CONVEXITY_AUDIT = "ConvexityAudit"
    OPT_COND_AUDIT = "OptCondAudit"


# ---- per-kind parameters ----

@dataclass
class ScalarSweepParams:
    """Identity-initialized scalar chains over a depth x target grid.

    Positive targets run at ``step_fraction * critical_step`` and are checked
    against the geometric envelope; negative targets run the single chain at
    the negative-target bound and the double chain at half of it.
    """
    depths: list[int] = field(default_factory=lambda: [1, 2, 5, 10, 20])
    lambdas: list[float] = field(default_factory=lambda: [0.1, 0.5, 1.0, 2.0, 10.0, -0.5, -1.0, -3.0])
    sigma: float = 1.0
    step_fraction: float = 1.0
    max_iters: int = 1_000_000
    write_trajectories: bool = False


@dataclass
class BoundaryCase:
    depth: int
    lam: float
    kappa: float = 1.0


@dataclass
class ScalarBoundaryParams:
    """Bisection of the stability boundary for each equilibrium in ``cases``."""
    cases: list[BoundaryCase] = field(default_factory=lambda: [
        BoundaryCase(2, 4.0), BoundaryCase(3, 8.0), BoundaryCase(5, 2.0),
        BoundaryCase(10, 1.5), BoundaryCase(2, 4.0, 4.0),
    ])
    sigma: float = 1.0
    rel_tol: float = 1e-2
    probe_iterations: int = 100_000
    perturbation: float = 1e-3
    escape_radius: float = 1e-2


@dataclass
class MatrixSingleVsDoubleParams:
    """Single versus double residual network on random diagonalizable targets.

    ``step`` of ``None`` uses the safe step of the drawn target.
    """
    width: int = 20
    depth: int = 20
    eig_low: float = -1.5
    eig_high: float = 1.5
    seeds: list[int] = field(default_factory=lambda: list(range(1, 11)))
    iterations: int = 10_000
    orthogonal: bool = False
    step: t.Optional[float] = None


@dataclass
class MatrixRateCheckParams:
    """Convergence to the L-th root at the safe step and instability above the threshold."""
    width: int = 5
    depth: int = 5
    eig_low: float = 0.5
    eig_high: float = 1.5
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    iterations: int = 2_000
    modal_steps: int = 1_000
    stable_factor: float = 0.9
    unstable_factor: float = 1.1
    perturbation: float = 1e-3
    escape_radius: float = 1e-2
    check_iterations: int = 20_000


@dataclass
class Fit1DParams:
    """Convex-concave pairs of scalar residual chains fit to the zigzag target."""
    depth: int = 10
    grid_size: int = 51
    step: float = 1.5e-4
    max_epochs: int = 8_000
    bias_ranges: list[list[float]] = field(default_factory=lambda: [[0.0, 0.5], [0.0, 1.0]])
    weight_init_range: list[float] = field(default_factory=lambda: [0.0, 0.01])
    seeds: list[int] = field(default_factory=lambda: list(range(1, 11)))
    projection: bool = True
    success_loss: float = 1e-4
    lipschitz_cap: float = 2.1
    save_models: bool = False


@dataclass
class ConvexityAuditParams:
    """Midpoint-convexity audit of random feasible networks."""
    networks: int = 100
    pairs: int = 1_000
    input_dim: int = 3
    depth: int = 3
    width: t.Optional[int] = None
    parameter_scale: float = 1.0
    domain_high: float = 2.0
    tolerance: float = 1e-9


@dataclass
class OptCondAuditParams:
    """Train pairs to stationarity and evaluate the first-order optimality residuals."""
    target: str = "linear"
    slope: float = 2.0
    grid_size: int = 50
    depth: int = 1
    step: float = 1e-2
    max_epochs: int = 20_000
    seeds: list[int] = field(default_factory=lambda: [1])
    bias_init_range: list[float] = field(default_factory=lambda: [0.5, 1.0])
    projection: bool = True
    gradient_tolerance: float = 1e-8


ExperimentParams = t.Union[
    ScalarSweepParams,
    ScalarBoundaryParams,
    MatrixSingleVsDoubleParams,
    MatrixRateCheckParams,
    Fit1DParams,
    ConvexityAuditParams,
    OptCondAuditParams,
]


@dataclass
class ExperimentConfig:
    """A parsed config file."""
    kind: ExperimentKind
    parameters: t.Any
    seed: int = 0
    output_dir: str = "runs"
    name: str = ""


# ---- sweep plans ----

@dataclass
class SweepTask:
    """One unit of work: a registered task function and its arguments.

    String arguments of the form ``$task_id`` or ``$task_id.field`` are
    replaced by (fields of) earlier results before the call.
    """
    id: str
    task_name: str
    arguments: dict[str, t.Any]
    depends_on: list[str] = field(default_factory=list)


@dataclass
class SweepPlan:
    tasks: list[SweepTask]
    description: str


# ---- manifests ----

@dataclass
class ArtifactRecord:
    """A written file, relative to the run directory, with its SHA-256 digest."""
    path: str
    sha256: str
    role: str


@dataclass
class RunManifest:
    config: dict[str, t.Any]
    seed: int
    started_at: str
    finished_at: str
    artifacts: list[ArtifactRecord] = field(default_factory=list)
    summary: dict[str, t.Any] = field(default_factory=dict)


# ---- task results ----

@dataclass
class ScalarCaseResult:
    """One (depth, lambda) cell of a scalar sweep.

    Positive targets fill ``envelope_violations``; negative targets fill the
    single-chain ``max_abs_weight`` and the double-chain fields.
    """
    depth: int
    lam: float
    step: float
    outcome: str
    iterations: int
    final_error: float
    errors: list[float] = field(default_factory=list)
    rate: t.Optional[float] = None
    envelope_violations: t.Optional[int] = None
    max_abs_weight: t.Optional[float] = None
    double_step: t.Optional[float] = None
    double_outcome: t.Optional[str] = None
    double_final_error: t.Optional[float] = None


@dataclass
class BoundaryCaseResult:
    depth: int
    lam: float
    kappa: float
    predicted: float
    empirical: float
    relative_gap: float
    probes: int


@dataclass
class MatrixComparison:
    """Paired single/double loss curves for one random target."""
    seed: int
    step: float
    spectral_radius: float
    single_losses: list[float]
    double_losses: list[float]
    single_outcome: str
    double_outcome: str

    @property
    def single_final(self) -> float:
        return self.single_losses[-1]

    @property
    def double_final(self) -> float:
        return self.double_losses[-1]


@dataclass
class RateCheckResult:
    seed: int
    safe_step: float
    threshold: float
    root_error: float
    stable_outcome: str
    unstable_outcome: str
    unstable_iterations: int
    modal_deviation: float
    losses: list[float] = field(default_factory=list)


@dataclass
class FitResult:
    seed: int
    bias_range: list[float]
    losses: list[float]
    final_loss: float
    lipschitz: float
    diverged: bool
    x: list[float] = field(default_factory=list)
    target: list[float] = field(default_factory=list)
    estimate: list[float] = field(default_factory=list)
    model: t.Optional[dict[str, t.Any]] = None


@dataclass
class ConvexityBatch:
    """Worst midpoint gap and trunk monotonicity for a block of random networks."""
    start: int
    gaps: list[float]
    monotone: list[bool]


@dataclass
class OptCondResult:
    seed: int
    final_loss: float
    gradient_norm: float
    plus_residuals: list[float]
    minus_residuals: list[float]
    largest_residual: float
    threshold: float
    bias_formula_error: float
    losses: list[float] = field(default_factory=list)


@dataclass
class ExperimentDefinition:
    """Registry entry: how a kind is planned and how its results become artifacts."""
    kind: ExperimentKind
    description: str
    build_plan: t.Callable[[ExperimentConfig], SweepPlan]
    write_artifacts: t.Callable[..., None]
    recipe: str
