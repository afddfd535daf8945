"""Wick-type approximation of fBm-driven SDE systems on a truncated
series expansion of the driving noise, with the matched exact solver and
the Monte Carlo verification layer."""

__version__ = "0.1.0"

from .phi_hilbert import (
    Hurst,
    PhiBasis,
    PhiGram,
    StepFunction,
    TimeGrid,
    gram_schmidt,
    inner_phi,
    phi_kernel,
    phi_transform,
    rect_inner,
)
from .gaussian_ensemble import (
    CovarianceModel,
    GaussianFrame,
    SampleBatch,
    build_covariance,
    cm_partial_sum_covariance,
    sample,
)
from .wick_core import (
    SigmaCoeffs,
    WickExponentialEval,
    projection_norm_sq,
    sigma_coeffs,
    translation_shift,
    wick_exponential,
)
from .wz_solver import (
    PathSolution,
    ProblemSpec,
    ShiftDescriptor,
    SolverGrid,
    forward_sensitivities,
    solve_reference,
    solve_truncated,
)
from .analysis import (
    BoundCheckRecord,
    ConvergenceReport,
    FokkerPlanckResult,
    appendix_bound_check,
    fokker_planck_residual,
    gronwall_envelope,
    l1_convergence,
)

__all__ = [name for name in dir() if not name.startswith("_")]
