"""Semantic-differential analysis: ratings, factor extraction, varimax, scores."""

from .factors import (
    ConvergenceError,
    DegenerateColumnError,
    Extraction,
    FactorModel,
    FactorSummary,
    align_factors,
    choose_n_factors,
    condition_factor_means,
    congruence,
    correlation_matrix,
    eigen_scree,
    extract_loadings,
    factor_scores,
    factor_summary,
    fit_factor_model,
)
from .ratings import (
    DEFAULT_PAIRS,
    Observations,
    RatingMatrix,
    RatingsError,
    average_repetitions,
    load_ratings,
    write_ratings,
)
from .synth import SynthSpec, implied_loadings, synthesize
from .varimax import RotationError, varimax, varimax_criterion

__all__ = [
    "ConvergenceError",
    "DegenerateColumnError",
    "Extraction",
    "FactorModel",
    "FactorSummary",
    "align_factors",
    "choose_n_factors",
    "condition_factor_means",
    "congruence",
    "correlation_matrix",
    "eigen_scree",
    "extract_loadings",
    "factor_scores",
    "factor_summary",
    "fit_factor_model",
    "DEFAULT_PAIRS",
    "Observations",
    "RatingMatrix",
    "RatingsError",
    "average_repetitions",
    "load_ratings",
    "write_ratings",
    "SynthSpec",
    "implied_loadings",
    "synthesize",
    "RotationError",
    "varimax",
    "varimax_criterion",
]
