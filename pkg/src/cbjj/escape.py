"""Analytic escape kinetics: thermal activation and the pulse-duration model."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import BOLTZMANN, TWO_PI
from .errors import DomainError, ValidityWarning
from .junction import (
    JunctionParams,
    barrier_height,
    crossover_temperature,
    plasma_frequency,
)

#: Reduced barrier ``dU / kT`` beyond which the rate is reported as exactly zero.
EXPONENT_CAP = 700.0


@dataclass(frozen=True)
class ThermalEnvironment:
    effective_temperature: float  # K

    def __post_init__(self):
        if not (np.isfinite(self.effective_temperature) and self.effective_temperature > 0):
            raise DomainError("effective_temperature must be finite and > 0")

    @property
    def thermal_energy(self) -> float:
        return BOLTZMANN * self.effective_temperature

    def below_crossover(self, params: JunctionParams, bias=0.0) -> bool:
        """True when thermal activation is not the dominant escape channel."""
        return bool(self.effective_temperature < crossover_temperature(params, bias))


def damping_prefactor(quality, barrier_over_kT):
    """Intermediate-to-low damping prefactor ``4 / (sqrt(1 + Q kT / 1.8 dU) + 1)^2``."""
    x = np.asarray(quality) / (1.8 * np.asarray(barrier_over_kT))
    return 4.0 / (np.sqrt(1.0 + x) + 1.0) ** 2


def _check_validity(params, env, bias):
    q = plasma_frequency(params, bias) * params.relaxation_time
    if np.any(q < 1) or np.any(q > 100):
        warnings.warn("quality factor outside [1, 100]; damping prefactor not validated there",
                      ValidityWarning, stacklevel=3)
    if np.any(env.effective_temperature < crossover_temperature(params, bias)):
        warnings.warn("temperature below the quantum crossover; thermal escape model invalid",
                      ValidityWarning, stacklevel=3)


def log_kramers_rate(params: JunctionParams, env: ThermalEnvironment, bias):
    """Natural log of the thermal escape rate [ln Hz]."""
    wp = plasma_frequency(params, bias)
    x = barrier_height(params, bias) / env.thermal_energy
    q = wp * params.relaxation_time
    with np.errstate(divide="ignore"):
        return np.log(damping_prefactor(q, x) * wp / TWO_PI) - x


def kramers_rate(params: JunctionParams, env: ThermalEnvironment, bias,
                 exponent_cap: float = EXPONENT_CAP, check: bool = True):
    """Thermally activated escape rate [Hz].

    Rates whose reduced barrier exceeds ``exponent_cap`` underflow to exactly 0.
    """
    if check:
        _check_validity(params, env, bias)
    x = barrier_height(params, bias) / env.thermal_energy
    log_rate = log_kramers_rate(params, env, bias)
    rate = np.where(x > exponent_cap, 0.0, np.exp(np.minimum(log_rate, 700.0)))
    return rate if np.ndim(rate) else float(rate)


def log_rate_slope(params: JunctionParams, env: ThermalEnvironment, bias) -> float:
    """Analytic d(log10 rate)/dI [1/A].

    Sums the barrier term ``-(dU/dI) / kT`` with the bias dependence of the
    attempt frequency and of the damping prefactor.
    """
    from .junction import barrier_slope

    i = params.reduced_bias(bias)
    du = barrier_height(params, bias)
    d_du = barrier_slope(params, bias)
    d_log_wp = -0.5 * i / ((1 - i) * (1 + i)) / params.critical_current
    # prefactor 4 / (s + 1)^2 with s = sqrt(1 + x), x = Q kT / (1.8 dU), Q ~ omega_p
    x = plasma_frequency(params, bias) * params.relaxation_time * env.thermal_energy / (1.8 * du)
    s = math.sqrt(1.0 + x)
    d_log_pref = -x * (d_log_wp - d_du / du) / (s * (s + 1.0))
    return (-d_du / env.thermal_energy + d_log_wp + d_log_pref) / math.log(10.0)


@dataclass(frozen=True)
class RateCurve:
    """Escape rate versus bias; uncertainties are zero for model curves."""

    bias: np.ndarray
    rate: np.ndarray
    uncertainty: np.ndarray = field(default=None)

    def __post_init__(self):
        bias = np.asarray(self.bias, dtype=float).ravel()
        rate = np.asarray(self.rate, dtype=float).ravel()
        unc = np.zeros_like(rate) if self.uncertainty is None else \
            np.asarray(self.uncertainty, dtype=float).ravel()
        if not (bias.shape == rate.shape == unc.shape):
            raise ValueError("bias, rate and uncertainty must have equal length")
        if bias.size > 1 and np.any(np.diff(bias) <= 0):
            raise ValueError("bias values must be strictly increasing")
        if np.any(rate < 0) or np.any(unc < 0):
            raise ValueError("rates and uncertainties must be non-negative")
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "rate", rate)
        object.__setattr__(self, "uncertainty", unc)

    def __len__(self):
        return self.bias.size


def dark_rate_curve(params: JunctionParams, env: ThermalEnvironment, bias_grid) -> RateCurve:
    bias = np.atleast_1d(np.asarray(bias_grid, dtype=float))
    return RateCurve(bias, np.atleast_1d(kramers_rate(params, env, bias)))


def temperature_for_rate(params: JunctionParams, bias: float, rate: float,
                         bracket=(1e-3, 10.0)) -> float:
    """Effective temperature [K] at which the thermal rate at ``bias`` equals ``rate``."""
    from scipy.optimize import brentq

    if rate <= 0:
        raise DomainError("rate must be > 0")
    target = math.log(rate)

    def f(t):
        return float(log_kramers_rate(params, ThermalEnvironment(t), bias)) - target

    return brentq(f, *bracket, xtol=1e-15, rtol=1e-13)


# --- pulse-duration (independent trials) model ------------------------------

def _trials(pulse_width, relaxation_time):
    if np.any(np.asarray(pulse_width) <= 0) or relaxation_time <= 0:
        raise DomainError("pulse width and relaxation time must be > 0")
    return np.asarray(pulse_width, dtype=float) / relaxation_time


def poisson_switch_probability(eps_j, pulse_width, relaxation_time):
    """Switching probability of a pulse made of ``width / tau_j`` independent trials."""
    eps_j = np.asarray(eps_j, dtype=float)
    if np.any(~(eps_j >= 0)) or np.any(eps_j > 1):
        raise DomainError("single-trial probability must lie in [0, 1]")
    n = _trials(pulse_width, relaxation_time)
    with np.errstate(divide="ignore"):
        out = -np.expm1(n * np.log1p(-eps_j))
    return out if np.ndim(out) else float(out)


def single_trial_probability(eps, pulse_width, relaxation_time):
    """Inverse of :func:`poisson_switch_probability` in the single-trial probability."""
    eps = np.asarray(eps, dtype=float)
    if np.any(~(eps >= 0)) or np.any(eps > 1):
        raise DomainError("switching probability must lie in [0, 1]")
    n = _trials(pulse_width, relaxation_time)
    with np.errstate(divide="ignore"):
        out = -np.expm1(np.log1p(-eps) / n)
    return out if np.ndim(out) else float(out)
