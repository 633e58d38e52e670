"""Histogramming, fits and efficiency estimators for switching data."""
from .efficiency import Crossing, EfficiencyEstimate, crossing, efficiency_from_fit, efficiency_low_dark
from .fits import (
    FitResult,
    escape_rate,
    exponential_model,
    fit_exponential,
    fit_kramers,
    fit_pulse_width,
    fit_rf_histogram,
    rf_histogram_model,
)
from .histogram import Histogram, clock_times, histogram_times, make_histogram

__all__ = [
    "Crossing", "EfficiencyEstimate", "FitResult", "Histogram", "clock_times", "crossing",
    "efficiency_from_fit", "efficiency_low_dark", "escape_rate", "exponential_model",
    "fit_exponential", "fit_kramers", "fit_pulse_width", "fit_rf_histogram", "histogram_times",
    "make_histogram", "rf_histogram_model",
]
