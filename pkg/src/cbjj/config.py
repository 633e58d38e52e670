"""Run configuration: a TOML or JSON file validated against pydantic models.

Lab units are used throughout (uA, pF, ohm, mK, ms, GHz, dBm, ns). Unknown
keys are rejected. Physical values are checked against the model classes at
load time so a bad file fails before any simulation starts.
"""
from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import CbjjError, ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class JunctionSection(_Section):
    ic_uA: float = Field(3.156, gt=0)
    c_pF: float = Field(1.6, gt=0)
    r_ohm: float = Field(50.0, gt=0)


class EnvironmentSection(_Section):
    # 0 selects the noise-free dynamics (Langevin commands only)
    T_mK: float = Field(183.0, ge=0)


class ProtocolSection(_Section):
    bias_uA: Optional[float] = Field(2.899, gt=0)
    levels: Optional[float] = Field(None, gt=0, description="set the hold bias by well depth")
    ramp_ms: float = Field(2.0, gt=0)
    hold_ms: float = Field(11.0, gt=0)
    reset_ms: float = Field(1.0, gt=0)
    t_rf_ms: float = Field(7.0, ge=0)
    timeout_cycles: int = Field(10, ge=1)
    events: int = Field(1000, ge=1)


class RfSection(_Section):
    freq_GHz: float = Field(8.0, gt=0)
    power_dBm: Optional[float] = -90.0
    photons: Optional[float] = Field(None, ge=0, description="overrides power_dBm")
    width_ns: float = Field(10.0, gt=0)


class SweepSection(_Section):
    variable: Literal["bias_uA", "levels", "power_dBm", "photons", "width_ns"] = "bias_uA"
    values: Optional[list[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    num: Optional[int] = Field(None, ge=1)
    log: bool = False

    @model_validator(mode="after")
    def _one_form(self):
        ranged = (self.start, self.stop, self.num)
        if self.values is not None and any(v is not None for v in ranged):
            raise ValueError("give either values or start/stop/num, not both")
        if self.values is None and any(v is None for v in ranged) \
                and any(v is not None for v in ranged):
            raise ValueError("start, stop and num must be given together")
        return self

    def grid(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        if self.start is None:
            return np.empty(0)
        if self.log:
            return np.geomspace(self.start, self.stop, self.num)
        return np.linspace(self.start, self.stop, self.num)


class MapSection(_Section):
    levels_min: float = Field(3.0, gt=0)
    levels_max: float = Field(8.0, gt=0)
    n_bias: int = Field(8, ge=1)
    photons: list[float] = Field(default_factory=lambda: [0.0, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0,
                                                          20.0])
    budget: int = Field(200_000, ge=1, description="max grid cells x trajectories")


class SimSection(_Section):
    seed: int = Field(0, ge=0)
    trajectories: int = Field(32, ge=1)
    dt: float = Field(0.05, gt=0, le=0.1)
    rf_coupling: float = Field(2.0, ge=0)


class GeneratorSection(_Section):
    """Ground-truth RF efficiency used to synthesise datasets."""

    model: Literal["constant", "sigmoid", "pulse", "langevin"] = "constant"
    value: float = Field(0.5, ge=0, le=1)
    variable: Literal["photons", "levels", "bias_uA", "power_dBm"] = "photons"
    center: float = 12.0
    scale: float = Field(2.0, gt=0)
    eps_j: float = Field(2.7e-4, ge=0, le=1)


class AnalysisSection(_Section):
    bin_width_ms: Optional[float] = Field(None, gt=0)
    dark_rate_threshold_hz: float = Field(1.0, gt=0)
    bins_per_lifetime: float = Field(20.0, gt=0)


class SensitivitySection(_Section):
    n_gamma: float = Field(10.0, ge=0)


class OutputSection(_Section):
    directory: Optional[str] = None
    formats: list[Literal["csv", "json", "svg"]] = Field(
        default_factory=lambda: ["csv", "json", "svg"])


class RunConfig(_Section):
    junction: JunctionSection = JunctionSection()
    environment: EnvironmentSection = EnvironmentSection()
    protocol: ProtocolSection = ProtocolSection()
    rf: RfSection = RfSection()
    sweep: SweepSection = SweepSection()
    map: MapSection = MapSection()
    sim: SimSection = SimSection()
    generator: GeneratorSection = GeneratorSection()
    analysis: AnalysisSection = AnalysisSection()
    sensitivity: SensitivitySection = SensitivitySection()
    output: OutputSection = OutputSection()

    def digest(self) -> str:
        """sha256 of the canonical JSON form; output settings are excluded."""
        data = self.model_dump(mode="json", exclude={"output"})
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, **sections) -> "RunConfig":
        """Copy with individual keys replaced, e.g. ``sim={"seed": 3}``."""
        data = self.model_dump()
        for name, values in sections.items():
            data[name].update(values)
        return validate_config(data)


def _physical_checks(cfg: RunConfig) -> None:
    """Run the model-level validators on every physical value."""
    from .junction import JunctionParams, RfPulse
    from .protocol import BiasWaveform

    params = JunctionParams.from_lab_units(cfg.junction.ic_uA, cfg.junction.c_pF,
                                           cfg.junction.r_ohm)
    p = cfg.protocol
    if p.bias_uA is not None:
        params.reduced_bias(p.bias_uA * 1e-6)
    BiasWaveform(min(p.bias_uA or 0.5 * cfg.junction.ic_uA, cfg.junction.ic_uA * 0.999999)
                 * 1e-6, p.ramp_ms * 1e-3, p.hold_ms * 1e-3, p.reset_ms * 1e-3)
    if p.t_rf_ms >= p.hold_ms:
        raise ConfigError("protocol.t_rf_ms must lie inside the hold segment")
    RfPulse(cfg.rf.freq_GHz * 1e9, -np.inf if cfg.rf.power_dBm is None else cfg.rf.power_dBm,
            cfg.rf.width_ns * 1e-9)
    if cfg.map.levels_max < cfg.map.levels_min:
        raise ConfigError("map.levels_max must be >= map.levels_min")


def validate_config(data: dict) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(data)
        _physical_checks(cfg)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    except ConfigError:
        raise
    except (CbjjError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """Read a ``.toml`` or ``.json`` file; ``None`` gives the defaults."""
    if path is None:
        return validate_config({})
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    return validate_config(data)
