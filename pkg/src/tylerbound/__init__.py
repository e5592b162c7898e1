"""Tyler's shape-matrix M-estimator, its non-asymptotic error bounds, and
Monte Carlo checks of those bounds."""

from .bounds import (
    BoundQuery,
    BoundResult,
    gradient_tail,
    hessian_discount_tail,
    matrix_bernstein_tail,
    optimize_bound,
    radius,
    success_probability,
    theorem1_bound,
    vector_bernstein_tail,
)
from .estimator import (
    EstimatorResult,
    SampleShape,
    SolverConfig,
    TylerShape,
    fixed_point_residual,
    scm_estimate,
    tyler_estimate,
)
from .likelihood import (
    MomentSpec,
    PerturbationDirection,
    expected_hessian_at_truth,
    grad_form,
    hessian_form,
    moment_even_bound,
    moment_mc_oracle,
    moment_r,
    neg_loglik,
    sample_avg,
)
from .sampling import SampleSet, SeededStream, normalize_rows, sample_acg, sample_compound_gaussian
from .shape import ShapeMatrix, SphericityStats, frobenius_distance_of_inverses, make_shape, sphericity

__version__ = "0.1.0"
