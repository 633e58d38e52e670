"""Monte Carlo generator of switching-time datasets.

Each measurement cycle ramps the bias up, holds it, and ramps it back down.
Time is counted from the end of the ramp-up; an RF pulse arrives ``rf_delay``
later. A record ends at the first switch or after ``timeout_cycles`` cycles
(censored). Escapes during the ramp-up are not recorded and the ramp is redrawn.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError, RateOverflowError
from .escape import ThermalEnvironment, kramers_rate, poisson_switch_probability
from .junction import JunctionParams, RfPulse
from .rng import stream

FORMAT = "cbjj-dataset"
FORMAT_VERSION = 1
MAX_RATE_PERIODS = 1e6
MAX_RAMP_ATTEMPTS = 10_000


@dataclass(frozen=True)
class BiasWaveform:
    hold_current: float
    ramp_duration: float = 2e-3
    hold_duration: float = 11e-3
    reset_duration: float = 1e-3

    def __post_init__(self):
        for name in ("ramp_duration", "hold_duration", "reset_duration"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")
        if not self.hold_current >= 0:
            raise DomainError("hold_current must be >= 0")

    @property
    def cycle_period(self) -> float:
        return self.ramp_duration + self.hold_duration + self.reset_duration

    def current(self, s):
        """Bias current at time ``s`` measured from the end of the ramp-up."""
        s = np.asarray(s, dtype=float)
        up = self.hold_current * (1.0 + s / self.ramp_duration)
        down = self.hold_current * (1.0 - (s - self.hold_duration) / self.reset_duration)
        out = np.where(s < 0, up, np.where(s < self.hold_duration, self.hold_current, down))
        return np.clip(out, 0.0, self.hold_current)


@dataclass(frozen=True)
class ProtocolConfig:
    rf_delay: float = 7e-3
    timeout_cycles: int = 10
    events_target: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.rf_delay >= 0:
            raise DomainError("rf_delay must be >= 0")
        if self.timeout_cycles < 1:
            raise DomainError("timeout_cycles must be >= 1")
        if self.events_target < 1:
            raise DomainError("events_target must be >= 1")


@dataclass(frozen=True)
class SwitchingRecord:
    lifetime: float  # s, from the end of the first ramp-up
    censored: bool
    switched_in_rf_window: bool
    cycle_index: int


@dataclass
class SwitchingDataset:
    records: list[SwitchingRecord]
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    @property
    def lifetimes(self) -> np.ndarray:
        return np.array([r.lifetime for r in self.records], dtype=float)

    @property
    def censored(self) -> np.ndarray:
        return np.array([r.censored for r in self.records], dtype=bool)

    @property
    def cycle_index(self) -> np.ndarray:
        return np.array([r.cycle_index for r in self.records], dtype=np.int64)

    @property
    def in_rf_window(self) -> np.ndarray:
        return np.array([r.switched_in_rf_window for r in self.records], dtype=bool)

    def meta(self, key, default=None):
        return self.metadata.get(key, default)

    def in_cycle_times(self) -> np.ndarray:
        """Switch time measured from the end of the ramp-up of its own cycle."""
        period = self.metadata["cycle_period"]
        return self.lifetimes - self.cycle_index * period

    def phase_counts(self) -> dict:
        """Switches before, during and after the RF window, plus censored records."""
        t = self.in_cycle_times()
        cens = self.censored
        start = self.metadata["rf_delay"]
        end = start + self.metadata.get("rf_width", 0.0)
        during = ~cens & (t >= start) & (t < end)
        before = ~cens & (t < start)
        after = ~cens & (t >= end)
        return {"before": int(before.sum()), "during": int(during.sum()),
                "after": int(after.sum()), "censored": int(cens.sum())}

    def write(self, path) -> None:
        Path(path).write_text(dumps_dataset(self))

    @classmethod
    def read(cls, path) -> "SwitchingDataset":
        return loads_dataset(Path(path).read_text())


# --- serialization ------------------------------------------------------------

def dumps_dataset(ds: SwitchingDataset) -> str:
    lines = [f"# format = {json.dumps(FORMAT)}", f"# version = {FORMAT_VERSION}"]
    for key in sorted(ds.metadata):
        lines.append(f"# {key} = {json.dumps(ds.metadata[key], sort_keys=True)}")
    lines.append("lifetime_seconds,censored,cycle_index")
    for r in ds.records:
        lines.append(f"{float(r.lifetime)!r},{int(r.censored)},{int(r.cycle_index)}")
    return "\n".join(lines) + "\n"


def loads_dataset(text: str) -> SwitchingDataset:
    meta, rows = {}, []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep:
                continue
            meta[key.strip()] = json.loads(value.strip())
            continue
        if line.startswith("lifetime"):
            continue
        try:
            t, c, k = line.split(",")
            rows.append((float(t), bool(int(c)), int(k)))
        except ValueError as exc:
            raise ValueError(f"line {n}: malformed record {raw!r}") from exc
    meta.pop("format", None)
    version = meta.pop("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    period = meta.get("cycle_period")
    start = meta.get("rf_delay")
    width = meta.get("rf_width", 0.0)
    records = []
    for t, c, k in rows:
        in_rf = False
        if not c and period is not None and start is not None:
            s = t - k * period
            in_rf = start <= s < start + width
        records.append(SwitchingRecord(t, c, in_rf, k))
    return SwitchingDataset(records, meta)


# --- sampler ------------------------------------------------------------------

@dataclass(frozen=True)
class ThermalRate:
    """Picklable ``current -> thermal escape rate`` map."""

    params: JunctionParams
    env: ThermalEnvironment

    def __call__(self, current):
        return kramers_rate(self.params, self.env, current, check=False)


@dataclass(frozen=True)
class ConstantRate:
    """Bias-independent dark rate, for tests and idealised studies."""

    rate: float

    def __call__(self, current):
        return np.full(np.shape(current), float(self.rate)) if np.ndim(current) else float(self.rate)


@dataclass(frozen=True)
class _Context:
    waveform: BiasWaveform
    rate: Callable
    bound: float
    hold_rate: float
    rf_delay: float
    rf_width: float  # 0 when no pulse
    rf_efficiency: float
    timeout_cycles: int


def _first_thinned(rng, a, b, ctx: _Context):
    """First accepted point of the inhomogeneous process on [a, b), or None."""
    if ctx.bound <= 0:
        return None
    n = rng.poisson(ctx.bound * (b - a))
    if n == 0:
        return None
    t = np.sort(a + (b - a) * rng.random(n))
    u = rng.random(n)
    hits = np.flatnonzero(u * ctx.bound < ctx.rate(ctx.waveform.current(t)))
    return float(t[hits[0]]) if hits.size else None


def _sample_record(rng, ctx: _Context) -> SwitchingRecord:
    w = ctx.waveform
    period = w.cycle_period
    window_end = ctx.rf_delay + ctx.rf_width
    for k in range(ctx.timeout_cycles):
        for _ in range(MAX_RAMP_ATTEMPTS):
            if _first_thinned(rng, -w.ramp_duration, 0.0, ctx) is None:
                break
        else:
            raise RateOverflowError("junction never survives the ramp-up")
        d = rng.exponential(1.0 / ctx.hold_rate) if ctx.hold_rate > 0 else math.inf
        t_dark = d if d < w.hold_duration else None
        u_rf, u_pos = rng.random(2)
        if t_dark is not None and t_dark < ctx.rf_delay:
            s = t_dark
        elif ctx.rf_width > 0 and u_rf < ctx.rf_efficiency:
            s = ctx.rf_delay + u_pos * ctx.rf_width
        elif t_dark is not None:
            s = t_dark
        else:
            s = _first_thinned(rng, w.hold_duration, w.hold_duration + w.reset_duration, ctx)
            if s is None:
                continue
        in_rf = ctx.rf_width > 0 and ctx.rf_delay <= s < window_end
        return SwitchingRecord(float(k * period + s), False, bool(in_rf), k)
    return SwitchingRecord(float(ctx.timeout_cycles * period), True, False,
                           ctx.timeout_cycles - 1)


def _sample_chunk(args):
    ctx, seed, indices = args
    return [_sample_record(stream(seed, "record", int(j)), ctx) for j in indices]


def _context(params, env, waveform, pulse, protocol, rf_efficiency, dark_rate):
    if not 0 <= rf_efficiency <= 1:
        raise DomainError("rf_efficiency must lie in [0, 1]")
    if waveform.hold_current >= params.critical_current:
        raise DomainError("hold current must be below the critical current")
    width = pulse.width if pulse is not None else 0.0
    if protocol.rf_delay + width > waveform.hold_duration:
        raise DomainError("RF window must end within the hold segment")
    if dark_rate is None:
        kramers_rate(params, env, waveform.hold_current)  # emits validity warnings once
        dark_rate = ThermalRate(params, env)
    grid = np.linspace(0.0, waveform.hold_current, 257)
    bound = float(np.max(dark_rate(grid)))
    hold_rate = float(dark_rate(waveform.hold_current))
    if bound * waveform.cycle_period > MAX_RATE_PERIODS:
        raise RateOverflowError(
            f"dark rate {bound:.3g} Hz too large for a {waveform.cycle_period:.3g} s cycle")
    return _Context(waveform, dark_rate, bound, hold_rate, protocol.rf_delay, width,
                    rf_efficiency, protocol.timeout_cycles)


def sample_dataset(params: JunctionParams, env: ThermalEnvironment, waveform: BiasWaveform,
                   pulse: RfPulse | None, protocol: ProtocolConfig, rf_efficiency: float = 0.0,
                   *, dark_rate: Callable | None = None, jobs: int = 1) -> SwitchingDataset:
    """Draw ``protocol.events_target`` records.

    ``dark_rate`` maps bias current to escape rate; it defaults to the
    thermal activation rate of ``params`` at ``env``.
    """
    ctx = _context(params, env, waveform, pulse, protocol, rf_efficiency, dark_rate)
    idx = np.arange(protocol.events_target)
    if jobs > 1:
        chunks = [c for c in np.array_split(idx, jobs * 4) if c.size]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_sample_chunk, [(ctx, protocol.seed, c) for c in chunks]))
        records = [r for part in parts for r in part]
    else:
        records = _sample_chunk((ctx, protocol.seed, idx))
    meta = {
        "generator": "cbjj.protocol.sample_dataset",
        "critical_current": params.critical_current,
        "capacitance": params.capacitance,
        "shunt_resistance": params.shunt_resistance,
        "temperature": None if env is None else env.effective_temperature,
        "hold_dark_rate": ctx.hold_rate,
        "waveform": asdict(waveform),
        "cycle_period": waveform.cycle_period,
        "hold_duration": waveform.hold_duration,
        "rf_delay": protocol.rf_delay,
        "rf_width": ctx.rf_width,
        "rf_frequency": None if pulse is None else pulse.frequency,
        "rf_power_dbm": None if pulse is None else _finite_or_none(pulse.power_dbm),
        "rf_efficiency": rf_efficiency,
        "timeout_cycles": protocol.timeout_cycles,
        "seed": protocol.seed,
    }
    return SwitchingDataset(records, meta)


def _finite_or_none(x):
    return float(x) if math.isfinite(x) else None


def cycle_survival_probability(params: JunctionParams, env: ThermalEnvironment,
                               waveform: BiasWaveform, rf_efficiency: float,
                               dark_rate: Callable | None = None,
                               with_pulse: bool = True) -> float:
    """Probability that one cycle passes without a recorded switch.

    Integrates the dark rate over hold and ramp-down by quadrature; the ramp-up
    does not count because its escapes are redrawn.
    """
    from scipy.integrate import quad

    if dark_rate is None:
        dark_rate = ThermalRate(params, env)
    hold = float(dark_rate(waveform.hold_current)) * waveform.hold_duration
    reset, _ = quad(lambda s: float(dark_rate(waveform.current(s))), waveform.hold_duration,
                    waveform.hold_duration + waveform.reset_duration, epsabs=0, epsrel=1e-10,
                    limit=200)
    survive = math.exp(-(hold + reset))
    return survive * (1.0 - rf_efficiency) if with_pulse else survive


def rf_efficiency_from_first_principles(params: JunctionParams, env: ThermalEnvironment | None,
                                        bias: float, pulse: RfPulse, eps_j: float | None = None,
                                        config=None, tail: float = 3.0) -> float:
    """Per-pulse switching probability from independent relaxation-time trials.

    When ``eps_j`` is not given it is estimated by driving the Langevin model
    for one relaxation time and watching ``tail`` further relaxation times.
    """
    tau = params.relaxation_time
    if eps_j is None:
        from .langevin import SimConfig, pulse_switch_probability

        config = config or SimConfig(trajectories=200)
        trial = RfPulse(pulse.frequency, pulse.power_dbm, tau, pulse.arrival_time)
        eps_j = pulse_switch_probability(params, env, bias, trial, config,
                                         window=(1.0 + tail) * tau, key=("eps_j",))
    return poisson_switch_probability(eps_j, pulse.width, tau)
