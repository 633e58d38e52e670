"""Switching efficiency estimators."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import (
    ClampWarning,
    DomainError,
    FitError,
    IllConditionedWarning,
    InsufficientDataError,
)
from .fits import FitResult


@dataclass(frozen=True)
class EfficiencyEstimate:
    """Efficiency with a 1-sigma width; iterates as ``(value, sigma)``.

    ``lower`` and ``upper`` bound the interval at ``confidence`` when the
    estimator provides one, otherwise they are ``value -/+ sigma``.
    """

    value: float
    sigma: float
    lower: float
    upper: float
    confidence: float = 0.6827

    def __iter__(self):
        yield self.value
        yield self.sigma


def efficiency_from_fit(fit: FitResult, t_rf: float) -> EfficiencyEstimate:
    """``N_RF / (N_0 exp(-t_rf / tau))`` with covariance propagation.

    Estimates above 1 by at most three standard deviations are clamped to 1
    with a :class:`ClampWarning`; larger excesses raise :class:`FitError`.
    """
    if not fit.converged or fit.flags.get("tau_unconstrained"):
        raise FitError("efficiency needs a converged fit with a constrained tau")
    n0, tau, nrf = fit["N_0"], fit["tau"], fit["N_RF"]
    if not (tau > 0 and n0 > 0):
        raise FitError("fit must have positive N_0 and tau")
    denom = n0 * math.exp(-t_rf / tau)
    eps = nrf / denom
    grad = np.array([-eps / n0, -eps * t_rf / tau**2, 1.0 / denom])
    idx = [fit.index(k) for k in ("N_0", "tau", "N_RF")]
    cov = fit.covariance[np.ix_(idx, idx)]
    sigma = math.sqrt(max(float(grad @ cov @ grad), 0.0))
    if fit.flags.get("eps_at_boundary"):
        warnings.warn("no dark counts remain after the pulse; the efficiency uncertainty is "
                      "not reliable at this boundary", IllConditionedWarning, stacklevel=2)
    if eps > 1.0:
        if eps > 1.0 + 3.0 * sigma and not fit.flags.get("eps_at_boundary"):
            raise FitError(f"efficiency {eps:.4g} exceeds 1 by more than 3 sigma; model misfit")
        warnings.warn(f"efficiency {eps:.4g} clamped to 1", ClampWarning, stacklevel=2)
        eps = 1.0
    return EfficiencyEstimate(eps, sigma, eps - sigma, eps + sigma)


def efficiency_low_dark(dataset, confidence: float = 0.95) -> EfficiencyEstimate:
    """Switches over attempted cycles, with a Wilson score interval.

    Every cycle counts as one attempt: a switch in cycle ``k`` used ``k + 1``
    attempts and a censored record used all of its cycles. ``sigma`` is the
    half-width of the 1-sigma Wilson interval, which stays positive at 0 or
    all switches.
    """
    from scipy.stats import binomtest

    if len(dataset) == 0:
        raise InsufficientDataError("empty dataset")
    switches = int((~dataset.censored).sum())
    attempts = int((dataset.cycle_index + 1).sum())
    p = switches / attempts
    one = binomtest(switches, attempts).proportion_ci(confidence_level=0.682689492137,
                                                      method="wilson")
    ci = binomtest(switches, attempts).proportion_ci(confidence_level=confidence,
                                                     method="wilson")
    return EfficiencyEstimate(p, 0.5 * (one.high - one.low), ci.low, ci.high, confidence)


@dataclass(frozen=True)
class Crossing:
    position: float
    sigma: float


def crossing(x, eff, sigma, level: float = 0.5) -> Crossing:
    """First point where ``eff`` crosses ``level``, by linear interpolation.

    The uncertainty propagates the two bracketing efficiencies' sigmas.
    """
    x = np.asarray(x, dtype=float)
    eff = np.asarray(eff, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if not (x.shape == eff.shape == sigma.shape) or x.size < 2:
        raise DomainError("x, eff and sigma need equal length >= 2")
    above = eff >= level
    for j in range(x.size - 1):
        if above[j] != above[j + 1]:
            e1, e2 = eff[j], eff[j + 1]
            frac = (level - e1) / (e2 - e1)
            pos = x[j] + frac * (x[j + 1] - x[j])
            slope = (e2 - e1) / (x[j + 1] - x[j])
            # d pos / d e1 = -(1 - frac) / slope, d pos / d e2 = -frac / slope
            s = math.hypot((1 - frac) * sigma[j], frac * sigma[j + 1]) / abs(slope)
            return Crossing(float(pos), float(s))
    return Crossing(float("nan"), float("nan"))
