"""Stochastic RCSJ phase dynamics.

The junction phase obeys, in units where time is measured in ``1/omega_p0``,
currents in ``Ic`` and energies in ``U0``::

    phi'' + phi' / Q0 + sin(phi) = i_b + i_rf sin(Omega t + theta) + xi(t)
    <xi(t) xi(t')> = (2 / Q0) (kT / U0) delta(t - t')

with ``Q0 = omega_p0 R C``. Trajectories start at rest in the well minimum and
are integrated with the stochastic Heun scheme. A trajectory has escaped once
the phase runs past the barrier top by ``escape_phase_threshold - pi`` with
positive velocity.

Each trajectory owns a Philox stream keyed by ``(seed, *key, index)``, so a
batch can be split across any number of workers without changing results.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import DomainError, InsufficientEscapesError, IntegrationError
from .escape import ThermalEnvironment
from .junction import JunctionParams, RfPulse, level_count
from .rng import stream

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SimConfig:
    time_step: float = 0.05
    max_time: float | None = None
    escape_phase_threshold: float = TWO_PI
    trajectories: int = 1000
    seed: int = 0
    rf_coupling_factor: float = 2.0
    block_size: int = 1 << 15

    def __post_init__(self):
        if not 0 < self.time_step <= 0.1:
            raise DomainError("time_step must lie in (0, 0.1]")
        if self.max_time is not None and not self.max_time > 0:
            raise DomainError("max_time must be > 0")
        if not self.escape_phase_threshold > math.pi:
            raise DomainError("escape_phase_threshold must exceed pi")
        if self.trajectories < 1:
            raise DomainError("need at least one trajectory")
        if self.rf_coupling_factor < 0:
            raise DomainError("rf_coupling_factor must be >= 0")


@dataclass(frozen=True)
class Trajectory:
    escape_time: float  # dimensionless; equals the window length when censored
    escaped: bool


@dataclass(frozen=True)
class _Problem:
    bias: float
    damping: float
    noise_scale: float  # standard deviation of the velocity kick per step
    amplitude: float
    omega: float
    drive_end: float
    phi_escape: float
    n_steps: int
    dt: float


@numba.njit(cache=True)
def _advance(phi, v, k, noise, dt, ib, damping, amp, omega, theta, drive_end,
             phi_escape, n_steps):
    for s in range(noise.shape[0]):
        if k >= n_steps:
            return phi, v, k, False
        t = k * dt
        drive0 = amp * math.sin(omega * t + theta) if t < drive_end else 0.0
        t1 = t + dt
        drive1 = amp * math.sin(omega * t1 + theta) if t1 < drive_end else 0.0
        dw = noise[s]
        a0 = ib + drive0 - damping * v - math.sin(phi)
        phi_p = phi + v * dt
        v_p = v + a0 * dt + dw
        a1 = ib + drive1 - damping * v_p - math.sin(phi_p)
        phi = phi + 0.5 * (v + v_p) * dt
        v = v + 0.5 * (a0 + a1) * dt + dw
        k += 1
        if phi > phi_escape and v > 0.0:
            return phi, v, k, True
    return phi, v, k, False


def rf_current_amplitude(params: JunctionParams, pulse: RfPulse, coupling: float) -> float:
    """Drive amplitude in units of Ic: ``kappa * sqrt(2 P / R) / Ic``."""
    return coupling * math.sqrt(2.0 * pulse.power_watts / params.shunt_resistance) \
        / params.critical_current


def _problem(params, env, bias, pulse, config, window=None):
    i_b = params.reduced_bias(bias)
    wp0 = params.zero_bias_plasma_frequency
    damping = 1.0 / params.zero_bias_quality_factor
    theta_t = 0.0 if env is None else env.thermal_energy / params.josephson_energy
    if pulse is not None:
        amp = rf_current_amplitude(params, pulse, config.rf_coupling_factor)
        omega = TWO_PI * pulse.frequency / wp0
        drive_end = pulse.width * wp0
    else:
        amp = omega = drive_end = 0.0
    if window is None:
        window = config.max_time
    if window is None:
        if pulse is None:
            raise DomainError("max_time is required without an RF pulse")
        window = drive_end
    return _Problem(
        bias=float(i_b),
        damping=damping,
        noise_scale=math.sqrt(2.0 * damping * theta_t * config.time_step),
        amplitude=amp,
        omega=omega,
        drive_end=drive_end,
        phi_escape=config.escape_phase_threshold - math.asin(i_b),
        n_steps=int(math.ceil(window / config.time_step)),
        dt=config.time_step,
    )


def _energy(phi, v, ib):
    return 0.5 * v * v - math.cos(phi) - ib * phi


def _run(prob: _Problem, rng: np.random.Generator, block: int) -> tuple[float, bool]:
    phi0 = math.asin(prob.bias)
    phi, v, k = phi0, 0.0, 0
    theta = rng.uniform(0.0, TWO_PI) if prob.amplitude > 0 else 0.0
    quiet = np.zeros(min(block, prob.n_steps))
    escaped = False
    while k < prob.n_steps and not escaped:
        m = min(block, prob.n_steps - k)
        noise = prob.noise_scale * rng.standard_normal(m) if prob.noise_scale > 0 else quiet[:m]
        phi, v, k, escaped = _advance(phi, v, k, noise, prob.dt, prob.bias, prob.damping,
                                      prob.amplitude, prob.omega, theta, prob.drive_end,
                                      prob.phi_escape, prob.n_steps)
        if not (math.isfinite(phi) and math.isfinite(v)):
            raise IntegrationError("non-finite phase or velocity; reduce time_step")
    if prob.noise_scale == 0 and prob.amplitude == 0:
        # undriven, noise-free motion must dissipate energy
        if escaped or _energy(phi, v, prob.bias) > _energy(phi0, 0.0, prob.bias) + 1e-9:
            raise IntegrationError("energy grew without noise or drive; integrator unstable")
    return k * prob.dt, escaped


def _shard(args):
    prob, seed, key, indices, block = args
    out = np.empty(len(indices))
    flags = np.zeros(len(indices), dtype=bool)
    for n, j in enumerate(indices):
        out[n], flags[n] = _run(prob, stream(seed, *key, j), block)
    return out, flags


def _map_shards(tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [_shard(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_shard, tasks))


def _split(indices, jobs):
    chunks = max(1, min(len(indices), jobs * 4 if jobs > 1 else 1))
    return [list(c) for c in np.array_split(np.asarray(indices, dtype=np.int64), chunks) if len(c)]


def simulate_escapes(params: JunctionParams, env: ThermalEnvironment | None, bias: float,
                     config: SimConfig, pulse: RfPulse | None = None, *, key=(),
                     indices=None, window=None, jobs: int = 1):
    """Escape times (dimensionless) and escape flags for a batch of trajectories."""
    prob = _problem(params, env, bias, pulse, config, window)
    if indices is None:
        indices = range(config.trajectories)
    tasks = [(prob, config.seed, tuple(key), chunk, config.block_size)
             for chunk in _split(list(indices), jobs)]
    parts = _map_shards(tasks, jobs)
    if not parts:
        return np.empty(0), np.zeros(0, dtype=bool)
    return (np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))


def integrate_phase(params: JunctionParams, env: ThermalEnvironment | None, bias: float,
                    pulse: RfPulse | None = None, config: SimConfig = SimConfig(),
                    index: int = 0, key=()) -> Trajectory:
    """Integrate a single trajectory; ``env=None`` means zero temperature."""
    prob = _problem(params, env, bias, pulse, config)
    t, escaped = _run(prob, stream(config.seed, *key, index), config.block_size)
    return Trajectory(t, escaped)


# --- escape-rate Monte Carlo --------------------------------------------------

@dataclass(frozen=True)
class RateEstimate:
    rate: float
    uncertainty: float
    escapes: int = 0
    trajectories: int = 0

    def __iter__(self):
        yield self.rate
        yield self.uncertainty


def escape_rate_mle(times, escaped, min_escapes: int = 10) -> RateEstimate:
    """Exponential-lifetime MLE with right censoring: escapes / total exposure."""
    times = np.asarray(times, dtype=float)
    escaped = np.asarray(escaped, dtype=bool)
    n = int(escaped.sum())
    if n < min_escapes:
        raise InsufficientEscapesError(f"only {n} escapes (need >= {min_escapes})")
    rate = n / times.sum()
    return RateEstimate(rate, rate / math.sqrt(n), n, times.size)


def mc_escape_rate(params: JunctionParams, env: ThermalEnvironment, bias: float,
                   config: SimConfig, jobs: int = 1) -> RateEstimate:
    """Monte Carlo thermal escape rate [Hz] without drive."""
    if config.max_time is None:
        raise DomainError("mc_escape_rate needs config.max_time")
    times, escaped = simulate_escapes(params, env, bias, config, key=("rate",), jobs=jobs)
    est = escape_rate_mle(times, escaped)
    wp0 = params.zero_bias_plasma_frequency
    return RateEstimate(est.rate * wp0, est.uncertainty * wp0, est.escapes, est.trajectories)


# --- driven switching ------------------------------------------------------------

def pulse_switch_probability(params: JunctionParams, env: ThermalEnvironment | None,
                             bias: float, pulse: RfPulse, config: SimConfig,
                             window: float | None = None, key=(), jobs: int = 1) -> float:
    """Fraction of trajectories that switch within ``window`` seconds of pulse onset.

    The window defaults to the pulse width.
    """
    w = None if window is None else window * params.zero_bias_plasma_frequency
    _, escaped = simulate_escapes(params, env, bias, config, pulse, key=("pulse",) + tuple(key),
                                  window=w, jobs=jobs)
    return float(escaped.mean())


@dataclass(frozen=True)
class BoundaryMap:
    bias: np.ndarray  # A
    photons: np.ndarray
    levels: np.ndarray  # level count per bias
    efficiency: np.ndarray = field(repr=False)  # shape (len(bias), len(photons))

    def thresholds(self, level: float = 0.5) -> np.ndarray:
        """Photon number where each bias row first reaches ``level`` (NaN if never)."""
        out = np.full(self.bias.size, np.nan)
        for b, row in enumerate(self.efficiency):
            hits = np.flatnonzero(row >= level)
            if hits.size == 0:
                continue
            j = hits[0]
            if j == 0:
                out[b] = self.photons[0]
                continue
            x0, x1 = self.photons[j - 1], self.photons[j]
            e0, e1 = row[j - 1], row[j]
            out[b] = x0 + (level - e0) * (x1 - x0) / (e1 - e0)
        return out


def _map_cell(args):
    params, env, bias, pulse, config, key = args
    return pulse_switch_probability(params, env, bias, pulse, config, key=key)


def switching_boundary_map(params: JunctionParams, env: ThermalEnvironment | None,
                           bias_grid, photon_grid, pulse_template: RfPulse,
                           config: SimConfig, jobs: int = 1) -> BoundaryMap:
    """Switching efficiency over a (bias, photon number) grid for one pulse shape."""
    bias = np.asarray(bias_grid, dtype=float)
    photons = np.asarray(photon_grid, dtype=float)
    if bias.ndim != 1 or photons.ndim != 1 or not bias.size or not photons.size:
        raise DomainError("grids must be non-empty 1-d sequences")
    tau = params.relaxation_time
    cells = []
    for b, ib in enumerate(bias):
        for p, n in enumerate(photons):
            pulse = RfPulse.from_photon_number(n, pulse_template.frequency, pulse_template.width,
                                               tau, pulse_template.arrival_time)
            cells.append((params, env, ib, pulse, config, (b, p)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            eff = list(pool.map(_map_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        eff = [_map_cell(c) for c in cells]
    return BoundaryMap(bias, photons, np.asarray(level_count(params, bias)),
                       np.asarray(eff).reshape(bias.size, photons.size))
