import math

import numpy as np
import pytest
from scipy import stats

from cbjj.errors import DomainError, RateOverflowError
from cbjj.escape import ThermalEnvironment
from cbjj.junction import RfPulse
from cbjj.protocol import (
    BiasWaveform,
    ConstantRate,
    ProtocolConfig,
    SwitchingDataset,
    cycle_survival_probability,
    sample_dataset,
)

ENV = ThermalEnvironment(0.183)
PULSE = RfPulse(8e9, -90.0, 10e-9)


def _constant(reference_junction, rate, eff=0.0, events=2000, seed=0, pulse=PULSE, jobs=1,
              timeout=10):
    return sample_dataset(reference_junction, ENV, BiasWaveform(2.9e-6), pulse,
                          ProtocolConfig(events_target=events, seed=seed, timeout_cycles=timeout),
                          eff, dark_rate=ConstantRate(rate), jobs=jobs)


def test_waveform_current_shape():
    w = BiasWaveform(2e-6)
    assert w.cycle_period == pytest.approx(14e-3, rel=1e-6, abs=0)
    assert w.current(-2e-3) == 0.0
    assert w.current(-1e-3) == pytest.approx(1e-6, rel=1e-6, abs=0)
    assert w.current(5e-3) == 2e-6
    assert w.current(11.5e-3) == pytest.approx(1e-6, rel=1e-6, abs=0)
    assert w.current(12e-3) == 0.0
    with pytest.raises(DomainError):
        BiasWaveform(2e-6, hold_duration=0)


def test_protocol_config_validation():
    for kwargs in ({"rf_delay": -1.0}, {"timeout_cycles": 0}, {"events_target": 0}):
        with pytest.raises(DomainError):
            ProtocolConfig(**kwargs)


def test_rf_efficiency_domain(reference_junction):
    with pytest.raises(DomainError):
        _constant(reference_junction, 1.0, eff=1.5, events=1)


def test_rf_window_must_fit_in_hold(reference_junction):
    with pytest.raises(DomainError):
        sample_dataset(reference_junction, ENV, BiasWaveform(2.9e-6), RfPulse(8e9, -90, 5e-3),
                       ProtocolConfig(), 0.5, dark_rate=ConstantRate(1.0))


def test_rate_overflow(reference_junction):
    with pytest.raises(RateOverflowError):
        _constant(reference_junction, 1e12, events=1)


def test_records_are_bounded_and_partitioned(reference_junction):
    ds = _constant(reference_junction, 5.0, eff=0.05)
    period = ds.meta("cycle_period")
    assert np.all(ds.lifetimes <= 10 * period + 1e-15)
    assert np.all(ds.lifetimes[ds.censored] == 10 * period)
    assert np.all(ds.cycle_index[ds.censored] == 9)
    s = ds.in_cycle_times()[~ds.censored]
    assert np.all((s >= 0) & (s < period))
    counts = ds.phase_counts()
    assert sum(counts.values()) == len(ds)
    assert counts["during"] == int(ds.in_rf_window.sum())


def test_round_trip_serialisation(reference_junction, tmp_path):
    ds = _constant(reference_junction, 50.0, eff=0.3, events=300)
    path = tmp_path / "ds.csv"
    ds.write(path)
    back = SwitchingDataset.read(path)
    assert back.records == ds.records
    assert back.metadata == ds.metadata


def test_unsupported_version_rejected(tmp_path):
    path = tmp_path / "ds.csv"
    path.write_text("# version = 99\nlifetime_seconds,censored,cycle_index\n")
    with pytest.raises(ValueError):
        SwitchingDataset.read(path)


def test_worker_count_does_not_change_records(reference_junction):
    a = _constant(reference_junction, 80.0, eff=0.4, events=400, seed=3, jobs=1)
    b = _constant(reference_junction, 80.0, eff=0.4, events=400, seed=3, jobs=2)
    assert a.records == b.records
    c = _constant(reference_junction, 80.0, eff=0.4, events=400, seed=4, jobs=1)
    assert a.records != c.records


def test_constant_rate_hold_times_are_exponential(reference_junction):
    rate = 150.0
    ds = _constant(reference_junction, rate, pulse=None, events=4000)
    hold = ds.meta("hold_duration")
    s = ds.in_cycle_times()[~ds.censored]
    s = s[s < hold]
    cdf = lambda x: (1 - np.exp(-rate * x)) / (1 - math.exp(-rate * hold))  # noqa: E731
    assert stats.kstest(s, cdf).pvalue > 1e-3


def test_certain_pulse_switches_in_first_window(reference_junction):
    ds = _constant(reference_junction, 0.0, eff=1.0, events=200)
    assert not ds.censored.any()
    assert np.all(ds.cycle_index == 0)
    assert ds.in_rf_window.all()
    assert ds.phase_counts()["during"] == 200


def test_no_rate_no_pulse_all_censored(reference_junction):
    ds = _constant(reference_junction, 0.0, eff=0.0, events=50)
    assert ds.censored.all()


def test_survival_with_constant_rate(reference_junction):
    w = BiasWaveform(2.9e-6)
    p = cycle_survival_probability(reference_junction, ENV, w, 0.2, ConstantRate(30.0))
    assert p == pytest.approx(math.exp(-30.0 * 12e-3) * 0.8, rel=1e-9, abs=0)
    q = cycle_survival_probability(reference_junction, ENV, w, 0.2, ConstantRate(30.0),
                                   with_pulse=False)
    assert q == pytest.approx(math.exp(-30.0 * 12e-3), rel=1e-9, abs=0)


def test_switch_fraction_per_cycle_matches_survival(reference_junction):
    rate, eff = 20.0, 0.1
    ds = _constant(reference_junction, rate, eff=eff, events=3000, timeout=1)
    p = cycle_survival_probability(reference_junction, ENV, BiasWaveform(2.9e-6), eff,
                                   ConstantRate(rate))
    n = len(ds)
    frac = ds.censored.mean()
    assert abs(frac - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_thermal_default_rate_records_metadata(reference_junction):
    ds = sample_dataset(reference_junction, ENV, BiasWaveform(2.899e-6), PULSE,
                        ProtocolConfig(events_target=50), 0.5)
    assert ds.meta("hold_dark_rate") == pytest.approx(102, rel=0.02, abs=0)
    assert ds.meta("temperature") == 0.183


def test_constant_rate_inverse_mean_lifetime(reference_junction):
    # with no pulse and a hold much longer than 1 / rate, lifetimes are exponential
    from cbjj.analysis.histogram import clock_times

    rate = 1000.0
    ds = _constant(reference_junction, rate, pulse=None, events=10_000, seed=5)
    live = clock_times(ds, "live")[~ds.censored]
    live = live[np.isfinite(live)]
    assert live.size >= 9_990
    estimate = 1.0 / live.mean()
    assert abs(estimate - rate) <= 2 * rate / math.sqrt(live.size)
