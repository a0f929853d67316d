"""De-biased convex-regularized estimators and interval estimation."""

from ._core import (
    confidence_intervals,
    debias,
    fit,
    normal_quantile,
    sample_design,
    simulate,
    stein_check,
)

__all__ = [
    "confidence_intervals",
    "debias",
    "fit",
    "normal_quantile",
    "sample_design",
    "simulate",
    "stein_check",
]
