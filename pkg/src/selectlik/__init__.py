"""Step-function selection models for publication bias in meta-analysis."""

from .exceptions import (
    GridTooSmallError,
    InvalidInputError,
    NoRidgeError,
    NonConvergenceError,
    RejectionBudgetError,
    TruncationUnderflowError,
)
from .model import (
    MixtureDecomposition,
    ModelParams,
    SelectionSteps,
    StudyObservation,
    band_index,
    basic_logpdf,
    hedges_cdf,
    hedges_logpdf,
    log_likelihood,
    log_selection_normalizer,
    marginal_logpdf,
    mixture_probabilities,
    p_value,
    step_weight,
    truncated_normal_logpdf,
)
from .sampling import (
    SimulationConfig,
    SimulationResult,
    sample_basic,
    sample_hedges,
    simulate_hedges,
)
from .estimation import (
    ConfidenceRegion,
    FitResult,
    GridSpec,
    LogLikGrid,
    ProbePoint,
    RegionProbeReport,
    diameter_probe,
    fit_mle,
    loglik_grid,
    lr_confidence_region,
    profile_theta_interval,
    profile_theta_loglik,
    ridge_slope,
)
from .asymptotics import (
    WitnessSpec,
    limit_loglik,
    mills_ratio_check,
    truncated_exponential_logpdf,
    witness_logpdf,
    witness_loglik,
    witness_sup_error,
)
from .bayes import PosteriorGrid, PriorSpec, grid_posterior, log_posterior

__version__ = "0.1.0"
