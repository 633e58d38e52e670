"""Command-line front end.

Every subcommand reads one config file, runs a sweep and writes a report
bundle (CSV tables, JSON documents, SVG figures and a manifest) to the output
directory. Sweep points are independent and seeded from
``(seed, command, point index)``, so ``--jobs`` never changes the results.

Exit status: 0 success, 2 configuration error, 3 numerical failure,
4 resource budget exceeded.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    clock_times,
    crossing,
    efficiency_from_fit,
    efficiency_low_dark,
    escape_rate,
    fit_exponential,
    fit_kramers,
    fit_pulse_width,
    fit_rf_histogram,
    histogram_times,
    make_histogram,
)
from .config import RunConfig, load_config
from .errors import BudgetExceededError, CbjjError, ConfigError
from .escape import RateCurve, ThermalEnvironment, kramers_rate, poisson_switch_probability
from .junction import (
    JunctionParams,
    RfPulse,
    bias_for_level_count,
    level_count,
    noise_equivalent_power,
    photon_energy,
    photon_number,
    plasma_frequency,
    quality_factor,
    sensitivity_summary,
)
from .protocol import BiasWaveform, ProtocolConfig, SwitchingDataset, sample_dataset
from .report import Provenance, ReportBundle, Table, fit_document
from .rng import derive_seed
from .svg import Figure

log = logging.getLogger("cbjj")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BUDGET = 0, 2, 3, 4
OUTPUT_ENV = "CBJJ_OUTPUT_DIR"


# --- shared helpers ------------------------------------------------------------------

def junction(cfg: RunConfig) -> JunctionParams:
    j = cfg.junction
    return JunctionParams.from_lab_units(j.ic_uA, j.c_pF, j.r_ohm)


def environment(cfg: RunConfig, allow_zero: bool = False):
    t = cfg.environment.T_mK
    if t == 0:
        if not allow_zero:
            raise ConfigError("environment.T_mK = 0 is only allowed for the boundary map")
        return None
    return ThermalEnvironment(t * 1e-3)


def hold_bias(cfg: RunConfig, params: JunctionParams) -> float:
    p = cfg.protocol
    if p.levels is not None:
        return bias_for_level_count(params, p.levels)
    return p.bias_uA * 1e-6


def waveform(cfg: RunConfig, bias: float) -> BiasWaveform:
    p = cfg.protocol
    return BiasWaveform(bias, p.ramp_ms * 1e-3, p.hold_ms * 1e-3, p.reset_ms * 1e-3)


def protocol(cfg: RunConfig, seed: int) -> ProtocolConfig:
    p = cfg.protocol
    return ProtocolConfig(p.t_rf_ms * 1e-3, p.timeout_cycles, p.events, seed)


def pulse(cfg: RunConfig, params: JunctionParams, *, power_dbm=None, photons=None,
          width_ns=None) -> RfPulse:
    rf = cfg.rf
    width = (rf.width_ns if width_ns is None else width_ns) * 1e-9
    t_rf = cfg.protocol.t_rf_ms * 1e-3
    if power_dbm is None and photons is None:
        photons = rf.photons
        power_dbm = rf.power_dBm if photons is None else None
    if photons is not None:
        return RfPulse.from_photon_number(photons, rf.freq_GHz * 1e9, width,
                                          params.relaxation_time, t_rf)
    return RfPulse(rf.freq_GHz * 1e9, -math.inf if power_dbm is None else power_dbm, width, t_rf)


def _run_points(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _guarded(fn, *args):
    """Run one sweep point, capturing warnings and package errors."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            row = fn(*args)
            err = None
        except BudgetExceededError:
            raise
        except CbjjError as exc:
            row, err = None, f"{type(exc).__name__}: {exc}"
    msgs = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    return {"row": row, "error": err, "warnings": msgs}


def _collect(outcomes, bundle: ReportBundle):
    """Rows up to the first failure; failures are recorded on the bundle."""
    rows = []
    for k, out in enumerate(outcomes):
        bundle.provenance.warnings.extend(out["warnings"])
        if out["error"] is not None:
            bundle.status = "failed"
            bundle.error = f"point {k}: {out['error']}"
            break
        rows.append(out["row"])
    return rows


def _new_bundle(cfg: RunConfig, command: str) -> ReportBundle:
    prov = Provenance(command, cfg.sim.seed, cfg.digest(),
                      cfg.model_dump(mode="json", exclude={"output"}))
    return ReportBundle(prov)


def _grid(cfg: RunConfig, allowed):
    sweep = cfg.sweep
    if sweep.variable not in allowed:
        raise ConfigError(f"sweep.variable must be one of {sorted(allowed)}")
    grid = sweep.grid()
    if grid.size == 0:
        raise ConfigError("the sweep is empty")
    return grid


def _subsample(n, k=8):
    return sorted(set(np.linspace(0, n - 1, min(n, k)).round().astype(int).tolist()))


# --- rate-curve ----------------------------------------------------------------------

def _rate_point(args):
    cfg, k, x = args
    return _guarded(_rate_point_body, cfg, k, x)


def _rate_point_body(cfg: RunConfig, k: int, x: float):
    params, env = junction(cfg), environment(cfg)
    bias = x * 1e-6 if cfg.sweep.variable == "bias_uA" else bias_for_level_count(params, x)
    ds = sample_dataset(params, env, waveform(cfg, bias), None,
                        protocol(cfg, derive_seed(cfg.sim.seed, "rate-curve", k)))
    live = clock_times(ds, "live")
    live = live[np.isfinite(live)]
    full = cfg.protocol.timeout_cycles * cfg.protocol.hold_ms * 1e-3
    if cfg.analysis.bin_width_ms is not None:
        width = cfg.analysis.bin_width_ms * 1e-3
    else:
        width = float(np.mean(live)) / cfg.analysis.bins_per_lifetime if live.size else full / 50
    span = min(full, 25.0 * cfg.analysis.bins_per_lifetime * width)
    hist = histogram_times(live, width, span, censored=int(ds.censored.sum()))
    fit = fit_exponential(hist, tail=True)
    rate, sigma = escape_rate(fit)
    return {"bias_uA": bias * 1e6, "levels": float(level_count(params, bias)),
            "events": len(ds), "switches": int((~ds.censored).sum()), "bin_width_s": width,
            "rate_hz": rate, "sigma_hz": sigma,
            "model_rate_hz": float(kramers_rate(params, env, bias, check=False)),
            "fit": fit_document(fit, hist.counts)}


def cmd_rate_curve(cfg: RunConfig, jobs: int = 1) -> ReportBundle:
    """Simulate dark-count datasets over a bias sweep and fit the escape rate."""
    grid = _grid(cfg, {"bias_uA", "levels"})
    bundle = _new_bundle(cfg, "rate-curve")
    params, env = junction(cfg), environment(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        biases = grid * 1e-6 if cfg.sweep.variable == "bias_uA" else \
            np.array([bias_for_level_count(params, x) for x in grid])
        kramers_rate(params, env, biases)
    bundle.provenance.warnings.extend(f"{w.category.__name__}: {w.message}" for w in caught)
    rows = _collect(_run_points(_rate_point, [(cfg, k, x) for k, x in enumerate(grid)], jobs),
                    bundle)
    table = Table({"bias_uA": "hold bias current [uA]",
                   "levels": "well depth in plasma quanta",
                   "events": "records generated",
                   "switches": "non-censored records",
                   "bin_width_s": "histogram bin width on the live clock [s]",
                   "rate_hz": "fitted escape rate 1/tau [Hz]",
                   "sigma_hz": "1-sigma uncertainty of rate_hz [Hz]",
                   "model_rate_hz": "thermal activation rate at the configured T [Hz]"})
    for k, r in enumerate(rows):
        table.add(**{c: r[c] for c in table.columns})
        bundle.fits[f"point{k:03d}"] = r["fit"]
    bundle.tables["rate_curve"] = table
    fig = Figure(title="Escape rate", xlabel="bias current [uA]", ylabel="rate [Hz]", ylog=True)
    if rows:
        fig.scatter(table.column("bias_uA"), table.column("rate_hz"), table.column("sigma_hz"),
                    label="simulated")
    kramers = None
    if len(rows) >= 2:
        curve = RateCurve(table.column("bias_uA") * 1e-6, table.column("rate_hz"),
                          table.column("sigma_hz"))
        try:
            kramers = fit_kramers(curve, params)
        except CbjjError as exc:
            bundle.provenance.warnings.append(f"Kramers fit skipped: {exc}")
    else:
        bundle.provenance.warnings.append("Kramers fit skipped: fewer than two rate points")
        warnings.warn("Kramers fit skipped: fewer than two rate points", stacklevel=2)
    if kramers is not None:
        bundle.fits["kramers"] = fit_document(kramers, [table.column("bias_uA").tolist(),
                                                        table.column("rate_hz").tolist()])
        bundle.results["kramers"] = {"T_mK": kramers["T"] * 1e3,
                                     "T_sigma_mK": kramers.sigma("T") * 1e3,
                                     "ic_uA": kramers["I_c"] * 1e6,
                                     "ic_sigma_uA": kramers.sigma("I_c") * 1e6,
                                     "chi2_reduced": kramers.chi2_reduced}
        fitted = JunctionParams(kramers["I_c"], params.capacitance, params.shunt_resistance)
        b = np.linspace(table.column("bias_uA").min(), table.column("bias_uA").max(), 101)
        model = Table({"bias_uA": "bias current [uA]", "rate_hz": "fitted Kramers rate [Hz]"})
        for bi, ri in zip(b, kramers_rate(fitted, ThermalEnvironment(kramers["T"]), b * 1e-6,
                                          check=False)):
            model.add(bias_uA=bi, rate_hz=ri)
        bundle.tables["rate_curve_fit"] = model
        fig.line(b, model.column("rate_hz"), label="Kramers fit")
    bundle.plots["rate_curve"] = (fig, "rate_curve")
    return bundle


# --- efficiency-scan / pulse-width-scan ---------------------------------------------------

def _sigmoid(z):
    return 0.5 * (1.0 + math.tanh(0.5 * z))


def true_efficiency(cfg: RunConfig, params, env, bias, rf: RfPulse, seed: int) -> float:
    g = cfg.generator
    if g.model == "constant":
        return g.value
    if g.model == "pulse":
        return float(poisson_switch_probability(g.eps_j, rf.width, params.relaxation_time))
    if g.model == "sigmoid":
        v = {"photons": lambda: photon_number(rf, params.relaxation_time),
             "levels": lambda: float(level_count(params, bias)),
             "bias_uA": lambda: bias * 1e6,
             "power_dBm": lambda: rf.power_dbm}[g.variable]()
        return _sigmoid((v - g.center) / g.scale)
    from .langevin import SimConfig
    from .protocol import rf_efficiency_from_first_principles

    sim = SimConfig(time_step=cfg.sim.dt, trajectories=cfg.sim.trajectories, seed=seed,
                    rf_coupling_factor=cfg.sim.rf_coupling)
    return float(rf_efficiency_from_first_principles(params, env, bias, rf, config=sim))


def _efficiency_point(args):
    cfg, command, k, x = args
    return _guarded(_efficiency_point_body, cfg, command, k, x)


def _efficiency_point_body(cfg: RunConfig, command: str, k: int, x: float):
    params, env = junction(cfg), environment(cfg)
    var = cfg.sweep.variable
    bias = {"bias_uA": lambda: x * 1e-6,
            "levels": lambda: bias_for_level_count(params, x)}.get(var,
                                                                  lambda: hold_bias(cfg, params))()
    kw = {"power_dBm": {"power_dbm": x}, "photons": {"photons": x},
          "width_ns": {"width_ns": x}}.get(var, {})
    rf = pulse(cfg, params, **kw)
    seed = derive_seed(cfg.sim.seed, command, k)
    eps_true = true_efficiency(cfg, params, env, bias, rf, derive_seed(seed, "generator"))
    dark = float(kramers_rate(params, env, bias))
    ds = sample_dataset(params, env, waveform(cfg, bias), rf, protocol(cfg, seed), eps_true)
    t_rf = cfg.protocol.t_rf_ms * 1e-3
    row = {"x": x, "bias_uA": bias * 1e6, "levels": float(level_count(params, bias)),
           "power_dBm": rf.power_dbm, "photons": photon_number(rf, params.relaxation_time),
           "width_ns": rf.width * 1e9, "dark_rate_hz": dark, "eps_true": eps_true,
           "fit": None}
    if dark > cfg.analysis.dark_rate_threshold_hz:
        width = None if cfg.analysis.bin_width_ms is None else cfg.analysis.bin_width_ms * 1e-3
        hist = make_histogram(ds, width)
        fit = fit_rf_histogram(hist, t_rf)
        est = efficiency_from_fit(fit, t_rf)
        row.update(regime="high_dark", fit=fit_document(fit, hist.counts))
    else:
        est = efficiency_low_dark(ds)
        row.update(regime="low_dark")
    row.update(eps=est.value, sigma=est.sigma)
    return row


EFFICIENCY_COLUMNS = {
    "x": "swept value",
    "bias_uA": "hold bias current [uA]",
    "levels": "well depth in plasma quanta",
    "power_dBm": "RF power at the junction [dBm]",
    "photons": "photons per relaxation time",
    "width_ns": "RF pulse width [ns]",
    "dark_rate_hz": "thermal escape rate at the hold bias [Hz]",
    "regime": "estimator used: high_dark (histogram fit) or low_dark (ratio)",
    "eps_true": "efficiency used to generate the data",
    "eps": "estimated switching efficiency",
    "sigma": "1-sigma uncertainty of eps",
}

SECONDARY = {"bias_uA": "levels", "levels": "bias_uA", "power_dBm": "photons",
             "photons": "power_dBm"}

AXIS_LABELS = {"bias_uA": "bias current [uA]", "levels": "well depth [levels]",
               "power_dBm": "RF power [dBm]", "photons": "photons per relaxation time",
               "width_ns": "pulse width [ns]"}


def _efficiency_rows(cfg, command, grid, jobs, bundle):
    tasks = [(cfg, command, k, x) for k, x in enumerate(grid)]
    rows = _collect(_run_points(_efficiency_point, tasks, jobs), bundle)
    table = Table(dict(EFFICIENCY_COLUMNS))
    for k, r in enumerate(rows):
        table.add(**{c: r[c] for c in table.columns})
        if r["fit"] is not None:
            bundle.fits[f"point{k:03d}"] = r["fit"]
    return rows, table


def cmd_efficiency_scan(cfg: RunConfig, jobs: int = 1) -> ReportBundle:
    """Switching efficiency versus RF power, photon number or bias."""
    grid = _grid(cfg, {"bias_uA", "levels", "power_dBm", "photons"})
    bundle = _new_bundle(cfg, "efficiency-scan")
    rows, table = _efficiency_rows(cfg, "efficiency-scan", grid, jobs, bundle)
    bundle.tables["efficiency"] = table
    var = cfg.sweep.variable
    fig = Figure(title="Switching efficiency", xlabel=AXIS_LABELS[var], ylabel="efficiency")
    if len(rows) >= 2:
        x, eps, sig = table.column("x"), table.column("eps"), table.column("sigma")
        fig.scatter(x, eps, sig, label="estimated")
        fig.line(x, table.column("eps_true"), label="generator", dashed=True)
        fig.hline(0.5, "0.5")
        second = SECONDARY[var]
        sec = table.column(second)
        idx = _subsample(len(rows))
        fig.top_axis(x[idx], [f"{sec[j]:.3g}" for j in idx], AXIS_LABELS[second])
        c = crossing(x, eps, sig, 0.5)
        result = {"variable": var, "position": c.position, "sigma": c.sigma,
                  "secondary_variable": second}
        if math.isfinite(c.position):
            order = np.argsort(x)
            result["secondary_position"] = float(np.interp(c.position, x[order], sec[order]))
        else:
            bundle.provenance.warnings.append("efficiency never crosses 0.5 in the sweep")
        bundle.results["crossing"] = result
        bundle.results["regimes"] = {"high_dark": sum(r["regime"] == "high_dark" for r in rows),
                                     "low_dark": sum(r["regime"] == "low_dark" for r in rows),
                                     "threshold_hz": cfg.analysis.dark_rate_threshold_hz}
    bundle.plots["efficiency"] = (fig, "efficiency")
    return bundle


def cmd_pulse_width_scan(cfg: RunConfig, jobs: int = 1) -> ReportBundle:
    """Switching efficiency versus pulse width, with the single-trial fit."""
    grid = _grid(cfg, {"width_ns"})
    bundle = _new_bundle(cfg, "pulse-width-scan")
    params = junction(cfg)
    rows, table = _efficiency_rows(cfg, "pulse-width-scan", grid, jobs, bundle)
    bundle.tables["pulse_width"] = table
    fig = Figure(title="Efficiency versus pulse width", xlabel="pulse width [ns]",
                 ylabel="efficiency", xlog=True)
    if rows:
        fig.scatter(table.column("width_ns"), table.column("eps"), table.column("sigma"),
                    label="estimated")
    if len(rows) < 4:
        msg = "pulse-width fit skipped: fewer than 4 points"
        bundle.provenance.warnings.append(msg)
        warnings.warn(msg, stacklevel=2)
    else:
        pts = list(zip(table.column("width_ns") * 1e-9, table.column("eps"),
                       table.column("sigma")))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                fit = fit_pulse_width(pts, params.relaxation_time)
            except CbjjError as exc:
                fit = None
                bundle.provenance.warnings.append(f"pulse-width fit failed: {exc}")
        bundle.provenance.warnings.extend(f"{w.category.__name__}: {w.message}" for w in caught)
        for w in caught:
            warnings.warn(w.message, w.category, stacklevel=2)
        if fit is not None:
            bundle.fits["pulse_width"] = fit_document(fit, pts)
            bundle.results["eps_j"] = {"value": fit["eps_j"], "sigma": fit.sigma("eps_j"),
                                       "chi2_reduced": fit.chi2_reduced}
            w = np.geomspace(table.column("width_ns").min(), table.column("width_ns").max(), 60)
            model = Table({"width_ns": "pulse width [ns]",
                           "eps": "fitted independent-trial efficiency"})
            for wi, ei in zip(w, poisson_switch_probability(fit["eps_j"], w * 1e-9,
                                                            params.relaxation_time)):
                model.add(width_ns=wi, eps=ei)
            bundle.tables["pulse_width_fit"] = model
            fig.line(w, model.column("eps"), label="fit")
    bundle.plots["pulse_width"] = (fig, "pulse_width")
    return bundle


# --- boundary-map ----------------------------------------------------------------------

def cmd_boundary_map(cfg: RunConfig, jobs: int = 1) -> ReportBundle:
    """Zero-temperature switching probability over well depth and photon number."""
    from .langevin import SimConfig, switching_boundary_map

    m = cfg.map
    cells = m.n_bias * len(m.photons)
    if cells * cfg.sim.trajectories > m.budget:
        raise BudgetExceededError(f"{cells} cells x {cfg.sim.trajectories} trajectories exceeds "
                                  f"the budget of {m.budget}")
    params, env = junction(cfg), environment(cfg, allow_zero=True)
    bundle = _new_bundle(cfg, "boundary-map")
    levels = np.linspace(m.levels_max, m.levels_min, m.n_bias)  # increasing bias
    bias = np.array([bias_for_level_count(params, n) for n in levels])
    photons = np.asarray(sorted(m.photons), dtype=float)
    sim = SimConfig(time_step=cfg.sim.dt, trajectories=cfg.sim.trajectories,
                    seed=derive_seed(cfg.sim.seed, "boundary-map"),
                    rf_coupling_factor=cfg.sim.rf_coupling)
    template = pulse(cfg, params, photons=0.0)
    bmap = switching_boundary_map(params, env, bias, photons, template, sim, jobs=jobs)
    grid = Table({"bias_uA": "hold bias current [uA]", "levels": "well depth in plasma quanta",
                  "photons": "photons per relaxation time",
                  "efficiency": "fraction of trajectories switching within the pulse"})
    for b in range(bias.size):
        for p in range(photons.size):
            grid.add(bias_uA=bias[b] * 1e6, levels=bmap.levels[b], photons=photons[p],
                     efficiency=bmap.efficiency[b, p])
    thr = bmap.thresholds(0.5)
    edge = Table({"bias_uA": "hold bias current [uA]", "levels": "well depth in plasma quanta",
                  "threshold_photons": "photon number where efficiency reaches 0.5",
                  "ratio": "threshold_photons / levels"})
    for b in range(bias.size):
        edge.add(bias_uA=bias[b] * 1e6, levels=bmap.levels[b], threshold_photons=thr[b],
                 ratio=thr[b] / bmap.levels[b])
    bundle.tables["boundary_map"] = grid
    bundle.tables["boundary"] = edge
    finite = thr[np.isfinite(thr)]
    deep = bmap.levels >= np.median(bmap.levels)
    ratios = thr[deep] / bmap.levels[deep]
    bundle.results["boundary"] = {
        "monotone_non_increasing": bool(np.all(np.diff(finite) <= 0)),
        "deep_well_ratio_mean": float(np.nanmean(ratios)) if np.any(np.isfinite(ratios))
        else None,
        "rows_without_crossing": int(np.sum(~np.isfinite(thr))),
    }
    fig = Figure(title="Switching boundary", xlabel="photons per relaxation time",
                 ylabel="well depth [levels]")
    order = np.argsort(bmap.levels)
    fig.heatmap(photons, bmap.levels[order], bmap.efficiency[order])
    fig.line(thr[order], bmap.levels[order], label="efficiency = 0.5")
    fig.line(bmap.levels[order], bmap.levels[order], label="photons = levels", dashed=True)
    bundle.plots["boundary_map"] = (fig, "boundary_map")
    return bundle


# --- sensitivity -----------------------------------------------------------------------

def cmd_sensitivity(cfg: RunConfig, jobs: int = 1) -> ReportBundle:
    """Photon-number bookkeeping for the configured pulse."""
    params = junction(cfg)
    bundle = _new_bundle(cfg, "sensitivity")
    bias = hold_bias(cfg, params)
    rf = pulse(cfg, params, photons=0.0)
    n = cfg.sensitivity.n_gamma
    s = sensitivity_summary(rf, n, params.relaxation_time)
    nu_p = float(plasma_frequency(params, bias)) / (2 * math.pi)
    q = float(quality_factor(params, bias))
    nep = noise_equivalent_power(s.power, params, bias)
    table = Table({"quantity": "name", "value": "SI value", "unit": "SI unit",
                   "display": "value in customary units"})
    rows = [
        ("n_gamma", n, "1", f"{n:g} photons"),
        ("photon_energy", photon_energy(rf.frequency), "J",
         f"{photon_energy(rf.frequency) * 1e24:.4g} yJ"),
        ("energy_per_pulse", s.energy_per_pulse, "J", f"{s.energy_per_pulse * 1e21:.4g} zJ"),
        ("power", s.power, "W", f"{s.power * 1e12:.4g} pW"),
        ("plasma_frequency", nu_p, "Hz", f"{nu_p * 1e-9:.4g} GHz"),
        ("quality_factor", q, "1", f"{q:.4g}"),
        ("bandwidth", nu_p / q, "Hz", f"{nu_p / q * 1e-9:.4g} GHz"),
        ("nep", nep, "W/sqrt(Hz)", f"{nep * 1e18:.4g} aW/sqrt(Hz)"),
        ("levels", float(level_count(params, bias)), "1",
         f"{float(level_count(params, bias)):.4g}"),
    ]
    for name, value, unit, disp in rows:
        table.add(quantity=name, value=float(value), unit=unit, display=disp)
    bundle.tables["sensitivity"] = table
    bundle.results["sensitivity"] = {name: float(value) for name, value, _, _ in rows}
    return bundle


# --- fit (external datasets) ---------------------------------------------------------------

def cmd_fit(cfg: RunConfig, paths, mode: str = "auto", jobs: int = 1) -> ReportBundle:
    if not paths:
        raise ConfigError("fit needs at least one dataset file")
    bundle = _new_bundle(cfg, "fit")
    table = Table({"file": "dataset file name", "mode": "analysis applied",
                   "records": "records in the file", "censored": "censored records",
                   "rate_hz": "escape rate from the exponential fit [Hz]",
                   "rate_sigma_hz": "1-sigma uncertainty of rate_hz [Hz]",
                   "eps": "switching efficiency", "sigma": "1-sigma uncertainty of eps"})
    for k, path in enumerate(paths):
        try:
            ds = SwitchingDataset.read(path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
        name = Path(path).name
        use = mode
        if use == "auto":
            has_rf = ds.meta("rf_power_dbm") is not None or ds.meta("rf_efficiency", 0) > 0
            dark = ds.meta("hold_dark_rate") or 0.0
            if not has_rf:
                use = "exponential"
            else:
                use = "rf" if dark > cfg.analysis.dark_rate_threshold_hz else "low-dark"
        row = {"file": name, "mode": use, "records": len(ds),
               "censored": int(ds.censored.sum()), "rate_hz": None, "rate_sigma_hz": None,
               "eps": None, "sigma": None}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                width = None if cfg.analysis.bin_width_ms is None \
                    else cfg.analysis.bin_width_ms * 1e-3
                if use == "exponential":
                    live = clock_times(ds, "live")
                    live = live[np.isfinite(live)]
                    width = width or float(np.mean(live)) / cfg.analysis.bins_per_lifetime
                    full = ds.meta("timeout_cycles") * ds.meta("hold_duration")
                    span = min(full, 25.0 * cfg.analysis.bins_per_lifetime * width)
                    hist = histogram_times(live, width, span, censored=int(ds.censored.sum()))
                    fit = fit_exponential(hist, tail=True)
                    row["rate_hz"], row["rate_sigma_hz"] = escape_rate(fit)
                    bundle.fits[f"file{k:03d}"] = fit_document(fit, hist.counts)
                elif use == "rf":
                    t_rf = ds.meta("rf_delay")
                    hist = make_histogram(ds, width)
                    fit = fit_rf_histogram(hist, t_rf)
                    row["eps"], row["sigma"] = efficiency_from_fit(fit, t_rf)
                    row["rate_hz"], row["rate_sigma_hz"] = escape_rate(fit)
                    bundle.fits[f"file{k:03d}"] = fit_document(fit, hist.counts)
                elif use == "low-dark":
                    row["eps"], row["sigma"] = efficiency_low_dark(ds)
                else:
                    raise ConfigError(f"unknown fit mode {use!r}")
            except ConfigError:
                raise
            except CbjjError as exc:
                bundle.status = "failed"
                bundle.error = f"{name}: {type(exc).__name__}: {exc}"
        bundle.provenance.warnings.extend(f"{w.category.__name__}: {w.message}" for w in caught)
        table.add(**row)
        if bundle.status == "failed":
            break
    bundle.tables["fits"] = table
    return bundle


# --- entry point --------------------------------------------------------------------------

COMMANDS = {
    "rate-curve": cmd_rate_curve,
    "efficiency-scan": cmd_efficiency_scan,
    "pulse-width-scan": cmd_pulse_width_scan,
    "boundary-map": cmd_boundary_map,
    "sensitivity": cmd_sensitivity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbjj", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML or JSON run configuration")
    common.add_argument("--out", type=Path,
                        help=f"output directory (default: config, then ${OUTPUT_ENV})")
    common.add_argument("--seed", type=int, help="override sim.seed")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--format", action="append", choices=("csv", "json", "svg"),
                        dest="formats", help="repeatable; default from the config")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).split("\n")[0])
    fit = sub.add_parser("fit", parents=[common], help="Fit switching datasets written by the simulator.")
    fit.add_argument("datasets", nargs="+", type=Path)
    fit.add_argument("--mode", choices=("auto", "exponential", "rf", "low-dark"),
                     default="auto")
    return parser


def output_dir(args, cfg: RunConfig) -> Path:
    if args.out is not None:
        return args.out
    if cfg.output.directory:
        return Path(cfg.output.directory)
    return Path(os.environ.get(OUTPUT_ENV, "cbjj-output"))


def run(argv=None) -> tuple[int, ReportBundle | None]:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    bundle = None
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_overrides(sim={"seed": args.seed})
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        formats = args.formats or cfg.output.formats
        out = output_dir(args, cfg)
        if args.command == "fit":
            bundle = cmd_fit(cfg, args.datasets, args.mode, args.jobs)
        else:
            bundle = COMMANDS[args.command](cfg, args.jobs)
        files = bundle.write(out, formats)
        log.info("wrote %d files to %s", len(files), out)
        for w in sorted(set(bundle.provenance.warnings)):
            print(f"warning: {w}", file=sys.stderr)
        if bundle.status != "ok":
            print(f"error: {bundle.error} (partial results written)", file=sys.stderr)
            return EXIT_NUMERIC, bundle
        return EXIT_OK, bundle
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, bundle
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET, bundle
    except CbjjError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC, bundle


def main(argv=None) -> int:
    return run(argv)[0]


if __name__ == "__main__":
    raise SystemExit(main())
