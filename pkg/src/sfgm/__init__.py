"""Fast gradient methods with heavy-ball memory in the estimating sequences."""

__version__ = "0.1.0"

from .oracle import (  # noqa: E402
    DiagonalQuadratic,
    GroundTruth,
    LogisticProblem,
    ObjectiveOracle,
    QuadraticProblem,
    check_gradient,
    estimate_lipschitz,
    ground_truth,
)
from .data import (  # noqa: E402
    DiagonalSpectrum,
    GaussianLeastSquares,
    SparseBinaryClassification,
    SyntheticSpec,
    gen_diagonal_quadratic,
    load_libsvm,
    parse_libsvm,
    starting_point,
)
from .diagnostics import EstimatingTracker, certify_run, iteration_lower_bounds  # noqa: E402
from .solvers import (  # noqa: E402
    DIST_TO_OPT,
    GRAD_NORM,
    MAX_ITERS,
    BetaSchedule,
    Method,
    SolverConfig,
    StoppingRule,
    run,
    step,
)

__all__ = [
    "DIST_TO_OPT", "GRAD_NORM", "MAX_ITERS", "DiagonalSpectrum", "EstimatingTracker",
    "GaussianLeastSquares", "SparseBinaryClassification", "SyntheticSpec", "certify_run",
    "gen_diagonal_quadratic", "iteration_lower_bounds", "load_libsvm", "parse_libsvm",
    "starting_point", "BetaSchedule", "DiagonalQuadratic", "GroundTruth", "LogisticProblem", "Method",
    "ObjectiveOracle", "QuadraticProblem", "SolverConfig", "StoppingRule", "check_gradient",
    "estimate_lipschitz", "ground_truth", "run", "step",
]
