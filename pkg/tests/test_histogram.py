import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbjj.analysis import Histogram, clock_times, histogram_times, make_histogram
from cbjj.errors import DomainError
from cbjj.escape import ThermalEnvironment
from cbjj.junction import JunctionParams, RfPulse
from cbjj.protocol import BiasWaveform, ConstantRate, ProtocolConfig, sample_dataset


def test_histogram_validation():
    with pytest.raises(DomainError):
        Histogram(0.0, 0.0, np.array([1]))
    with pytest.raises(DomainError):
        Histogram(1.0, 0.0, np.array([1, -1]))
    with pytest.raises(DomainError):
        Histogram(1.0, 0.0, np.array([0.5]))


def test_edges_centres_and_rescale():
    h = Histogram(0.5, 1.0, np.array([3, 0, 2]), overflow=4, censored=1)
    assert np.allclose(h.edges, [1.0, 1.5, 2.0, 2.5])
    assert np.allclose(h.centers, [1.25, 1.75, 2.25])
    assert h.total == 5 and h.records == 10
    r = h.rescaled(1e3)
    assert r.bin_width == 500.0 and r.origin == 1000.0
    assert np.array_equal(r.counts, h.counts)


def test_left_edges_belong_to_their_bin():
    bw = 1e-4
    h = histogram_times([0.0, 7e-3, 7e-3 + bw / 2, 70 * bw], bw, 11e-3)
    assert h.counts[0] == 1
    assert h.counts[70] == 3
    assert h.n_bins == 110


def test_out_of_span_and_nan_go_to_overflow():
    h = histogram_times([-1.0, 0.5, 2.0, np.nan], 1.0, 2.0)
    assert h.total == 1 and h.overflow == 3


@settings(max_examples=100)
@given(st.lists(st.floats(-5, 25, allow_nan=False), max_size=200),
       st.floats(0.01, 3.0), st.floats(1.0, 20.0))
def test_every_time_is_counted_once(times, bw, span):
    h = histogram_times(times, bw, span)
    assert h.total + h.overflow == len(times)
    inside = [t for t in times if 0 <= t < h.n_bins * bw * (1 - 1e-12)]
    assert h.total >= len(inside) - 2  # edge nudges can move a value at the upper end


def _dataset():
    return sample_dataset(
        JunctionParams(3.156e-6), ThermalEnvironment(0.183),
        BiasWaveform(2.9e-6), RfPulse(8e9, -90, 10e-9),
        ProtocolConfig(events_target=500, seed=2), 0.2, dark_rate=ConstantRate(60.0))


def test_clocks_agree_on_first_cycle():
    ds = _dataset()
    first = ds.cycle_index[~ds.censored] == 0
    folded = clock_times(ds, "folded")
    assert np.allclose(folded[first], clock_times(ds, "lifetime")[first])
    live = clock_times(ds, "live")
    hold = ds.meta("hold_duration")
    ok = np.isfinite(live)
    assert np.all(live[~ok] != live[~ok])  # NaN only for ramp-down switches
    assert np.all(folded[~ok] >= hold)
    with pytest.raises(DomainError):
        clock_times(ds, "wall")


def test_make_histogram_defaults():
    ds = _dataset()
    h = make_histogram(ds)
    assert h.bin_width == pytest.approx(7e-3 / 70, rel=1e-6, abs=0)
    assert h.n_bins == 110
    assert h.records == len(ds)
    assert h.censored == int(ds.censored.sum())
