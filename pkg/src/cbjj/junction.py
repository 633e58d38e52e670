"""Closed-form physics of a current-biased Josephson junction.

All quantities are SI. The washboard potential is
``U(phi) = -U0 (cos(phi) + i phi)`` with ``U0 = Ic Phi0 / 2pi`` and reduced
bias ``i = I / Ic``. Functions accept scalars or numpy arrays for the bias.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import BOLTZMANN, FLUX_QUANTUM, HBAR, PLANCK, TWO_PI
from .errors import DomainError


def _positive(name, value):
    if not (np.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class JunctionParams:
    """Physical junction: critical current [A], capacitance [F], shunt [ohm]."""

    critical_current: float
    capacitance: float = 1.6e-12
    shunt_resistance: float = 50.0

    def __post_init__(self):
        _positive("critical_current", self.critical_current)
        _positive("capacitance", self.capacitance)
        _positive("shunt_resistance", self.shunt_resistance)

    @classmethod
    def from_lab_units(cls, ic_uA: float, c_pF: float = 1.6, r_ohm: float = 50.0):
        return cls(ic_uA * 1e-6, c_pF * 1e-12, r_ohm)

    @property
    def relaxation_time(self) -> float:
        """RC time of the junction loaded by the line [s]."""
        return self.shunt_resistance * self.capacitance

    @property
    def josephson_energy(self) -> float:
        """U0 = Ic Phi0 / 2pi [J]."""
        return self.critical_current * FLUX_QUANTUM / TWO_PI

    @property
    def zero_bias_plasma_frequency(self) -> float:
        """omega_p0 = sqrt(2pi Ic / (Phi0 C)) [rad/s]."""
        return math.sqrt(TWO_PI * self.critical_current / (FLUX_QUANTUM * self.capacitance))

    @property
    def zero_bias_quality_factor(self) -> float:
        return self.zero_bias_plasma_frequency * self.relaxation_time

    def reduced_bias(self, bias):
        """Return ``I / Ic`` after checking ``0 <= I < Ic``."""
        i = np.asarray(bias, dtype=float) / self.critical_current
        if np.any(~np.isfinite(i)) or np.any(i < 0) or np.any(i >= 1):
            raise DomainError(
                f"bias must satisfy 0 <= I < Ic = {self.critical_current:.6g} A"
            )
        return i if i.ndim else float(i)


def _reduced_barrier(i):
    # 2 [sqrt(1 - i^2) - i arccos(i)], written to keep both terms accurate near i -> 1
    return 2.0 * (np.sqrt((1.0 - i) * (1.0 + i)) - i * 2.0 * np.arcsin(np.sqrt((1.0 - i) / 2.0)))


def barrier_height(params: JunctionParams, bias):
    """Energy difference between the well minimum and the adjacent maximum [J]."""
    i = params.reduced_bias(bias)
    return params.josephson_energy * _reduced_barrier(i)


def barrier_slope(params: JunctionParams, bias):
    """d(barrier)/dI [J/A]; negative for every allowed bias."""
    i = params.reduced_bias(bias)
    return -2.0 * params.josephson_energy * np.arccos(i) / params.critical_current


def plasma_frequency(params: JunctionParams, bias):
    """Small-oscillation angular frequency at the well bottom [rad/s]."""
    i = params.reduced_bias(bias)
    return params.zero_bias_plasma_frequency * ((1.0 - i) * (1.0 + i)) ** 0.25


def quality_factor(params: JunctionParams, bias):
    return plasma_frequency(params, bias) * params.relaxation_time


def level_count(params: JunctionParams, bias):
    """Barrier depth in units of hbar * omega_p."""
    return barrier_height(params, bias) / (HBAR * plasma_frequency(params, bias))


def crossover_temperature(params: JunctionParams, bias=0.0):
    """Thermal/quantum crossover temperature hbar omega_p / (2 pi k_B) [K]."""
    return HBAR * plasma_frequency(params, bias) / (TWO_PI * BOLTZMANN)


@dataclass(frozen=True)
class OperatingPoint:
    bias_current: float
    reduced_bias: float
    barrier_height: float
    plasma_angular_frequency: float
    quality_factor: float
    level_count: float


def operating_point(params: JunctionParams, bias: float) -> OperatingPoint:
    bias = float(bias)
    return OperatingPoint(
        bias_current=bias,
        reduced_bias=params.reduced_bias(bias),
        barrier_height=float(barrier_height(params, bias)),
        plasma_angular_frequency=float(plasma_frequency(params, bias)),
        quality_factor=float(quality_factor(params, bias)),
        level_count=float(level_count(params, bias)),
    )


def bias_for_level_count(params: JunctionParams, levels: float) -> float:
    """Bias current [A] at which the well holds ``levels`` plasma quanta."""
    from scipy.optimize import brentq

    top = float(level_count(params, 0.0))
    if not 0 < levels < top:
        raise DomainError(f"level count must lie in (0, {top:.4g})")
    hi = 1.0 - 1e-12
    i = brentq(lambda x: float(level_count(params, x * params.critical_current)) - levels,
               0.0, hi, xtol=1e-15, rtol=1e-14)
    return i * params.critical_current


# --- power and photon bookkeeping -------------------------------------------

def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(watts, dtype=float)) + 30.0


@dataclass(frozen=True)
class RfPulse:
    """RF stimulus as delivered to the junction (after all attenuation)."""

    frequency: float
    power_dbm: float
    width: float
    arrival_time: float = 7e-3

    def __post_init__(self):
        _positive("frequency", self.frequency)
        _positive("width", self.width)
        if not (np.isfinite(self.arrival_time) and self.arrival_time >= 0):
            raise DomainError("arrival_time must be >= 0")
        if np.isnan(self.power_dbm) or self.power_dbm == np.inf:
            raise DomainError("power_dbm must be finite or -inf")

    @property
    def power_watts(self) -> float:
        return float(dbm_to_watts(self.power_dbm))

    @classmethod
    def from_photon_number(cls, photons, frequency, width, relaxation_time, arrival_time=7e-3):
        """Pulse whose power delivers ``photons`` quanta per relaxation time."""
        if photons < 0:
            raise DomainError("photon number must be >= 0")
        watts = photons * photon_energy(frequency) / relaxation_time
        return cls(frequency, float(watts_to_dbm(watts)), width, arrival_time)

    def with_power(self, power_dbm: float) -> "RfPulse":
        return RfPulse(self.frequency, power_dbm, self.width, self.arrival_time)


def photon_energy(frequency):
    """h * nu [J]."""
    if np.any(np.asarray(frequency) <= 0):
        raise DomainError("frequency must be > 0")
    return PLANCK * frequency


def photon_number(pulse: RfPulse, relaxation_time: float) -> float:
    """Mean number of photons reaching the junction per relaxation time."""
    _positive("relaxation_time", relaxation_time)
    return pulse.power_watts * relaxation_time / photon_energy(pulse.frequency)


@dataclass(frozen=True)
class Sensitivity:
    energy_per_pulse: float  # J
    power: float  # W


def sensitivity_summary(pulse: RfPulse, n_gamma: float, relaxation_time: float) -> Sensitivity:
    """Energy carried by a pulse holding ``n_gamma`` photons per relaxation time.

    The pulse contributes ``width / relaxation_time`` independent windows, each
    carrying ``n_gamma`` photons of energy h*nu; the power is that energy over
    the pulse width.
    """
    if n_gamma < 0:
        raise DomainError("n_gamma must be >= 0")
    energy = n_gamma * photon_energy(pulse.frequency) * pulse.width / relaxation_time
    return Sensitivity(energy, energy / pulse.width)


def noise_equivalent_power(power: float, params: JunctionParams, bias: float) -> float:
    """power / sqrt(bandwidth), with bandwidth nu_p / Q at the operating bias [W/sqrt(Hz)]."""
    nu_p = float(plasma_frequency(params, bias)) / TWO_PI
    bandwidth = nu_p / float(quality_factor(params, bias))
    return power / math.sqrt(bandwidth)
