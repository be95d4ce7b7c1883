"""Noise-level estimation from arbitrary point sets.

Difference-table noise estimates, Newton-form curves through point sets,
min-max selection of previously evaluated points, and seeded Monte-Carlo
experiments comparing sampling geometries.
"""

__version__ = "0.1.0"

from .curve import (  # noqa: E402
    DerivativeBound,
    NewtonCurve,
    derivative_bound,
    divided_differences,
    eval_curve,
    lagrange_derivative_max,
    newton_curve,
)
from .diff_engine import (  # noqa: E402
    DifferenceTable,
    HeuristicOptions,
    NoiseEstimate,
    PointSet,
    Status,
    TooFewPointsError,
    build_table,
    estimate_at_order,
    estimate_noise,
    gamma,
    optimal_fd_interval,
)
from .harness import (  # noqa: E402
    ExperimentConfig,
    ExperimentKind,
    ExperimentResult,
    TrialRecord,
    preset,
    run_experiment,
    run_geometry,
    run_grid,
    run_reuse,
)
from .models import (  # noqa: E402
    GroundTruth,
    NoiseKind,
    NoisyFunctionSpec,
    SeededRng,
    arbitrary_points,
    evaluate,
    random_base_and_direction,
    standard_points,
)
from .select import (  # noqa: E402
    Free,
    PoolIndex,
    SelectionError,
    SelectionProblem,
    SelectionSolution,
    brute_force_selection,
    free_point_subproblem,
    solve_selection,
)
from .stats import EcdfSummary, KsResult, ecdf, histogram, ks_two_sample  # noqa: E402
