"""Signed multiple solutions of quasilinear elliptic Dirichlet problems with
concave-convex power nonlinearities.

The pipeline certifies the structural constants of a Lagrangian family,
builds the scalar truncation machinery from discrete embedding constants,
minimizes the truncated energy to a negative-level local minimum per sign,
and runs a mountain-pass path algorithm to a positive-level critical point
per sign, producing up to four signed weak solutions on P1 finite elements.
"""

from .mesh import (
    DiscreteFunction,
    Mesh,
    build_mesh,
    estimate_embedding_constant,
    norm_lp,
    seminorm_w1p,
)
from .problem import (
    HypothesisReport,
    LagrangianFamily,
    PLaplacian,
    ProblemSpec,
    SamplingPlan,
    WeightedPLaplacian,
    check_hypotheses,
    evaluate_lagrangian,
    make_family,
)
from .truncation import (
    HAnalysis,
    HCurveConstants,
    TruncationProfile,
    analyze_h,
    h_bar_eval,
    h_eval,
    h_prime_eval,
    lambda1,
    tau_eval,
    tau_prime_eval,
)
from .energy import (
    EnergyVariant,
    energy,
    energy_and_gradient,
    gradient,
    residual_norm,
)
from .solvers import (
    CPSDiagnostic,
    PipelineContext,
    RunReport,
    SolveOptions,
    Solution,
    SolverError,
    cps_metric,
    find_far_point,
    find_negative_start,
    first_mode_template,
    minimize_truncated,
    mountain_pass,
    setup_problem,
    solve_signed,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteFunction", "Mesh", "build_mesh", "estimate_embedding_constant",
    "norm_lp", "seminorm_w1p",
    "HypothesisReport", "LagrangianFamily", "PLaplacian", "ProblemSpec",
    "SamplingPlan", "WeightedPLaplacian", "check_hypotheses",
    "evaluate_lagrangian", "make_family",
    "HAnalysis", "HCurveConstants", "TruncationProfile", "analyze_h",
    "h_bar_eval", "h_eval", "h_prime_eval", "lambda1", "tau_eval",
    "tau_prime_eval",
    "EnergyVariant", "energy", "energy_and_gradient", "gradient",
    "residual_norm",
    "CPSDiagnostic", "PipelineContext", "RunReport", "SolveOptions",
    "Solution", "SolverError", "cps_metric", "find_far_point",
    "find_negative_start", "first_mode_template", "minimize_truncated",
    "mountain_pass", "setup_problem", "solve_signed",
    "__version__",
]
