import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants as sc

from cbjj.errors import DomainError, ValidityWarning
from cbjj.escape import (
    EXPONENT_CAP,
    RateCurve,
    ThermalEnvironment,
    damping_prefactor,
    dark_rate_curve,
    kramers_rate,
    log_rate_slope,
    poisson_switch_probability,
    single_trial_probability,
    temperature_for_rate,
)
from cbjj.junction import JunctionParams

IC = 3.156e-6


def rate_oracle(ic, c, r, t, bias):
    """Thermal rate written out from scratch with scipy constants."""
    phi0 = sc.h / (2 * sc.e)
    u0 = ic * phi0 / (2 * math.pi)
    i = bias / ic
    du = 2 * u0 * (math.sqrt(1 - i * i) - i * math.acos(i))
    wp = math.sqrt(2 * math.pi * ic / (phi0 * c)) * (1 - i * i) ** 0.25
    q = wp * r * c
    kt = sc.k * t
    at = 4 / (math.sqrt(1 + q * kt / (1.8 * du)) + 1) ** 2
    return at * wp / (2 * math.pi) * math.exp(-du / kt)


def test_rate_at_operating_point_matches_oracle(reference_junction):
    got = kramers_rate(reference_junction, ThermalEnvironment(0.183), 2.899e-6)
    assert got == pytest.approx(rate_oracle(IC, 1.6e-12, 50, 0.183, 2.899e-6), rel=1e-9, abs=0)
    assert got == pytest.approx(102, rel=0.02, abs=0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.80, 0.99), st.floats(0.05, 0.5))
def test_rate_matches_oracle(i, t):
    p = JunctionParams(IC)
    expected = rate_oracle(IC, 1.6e-12, 50, t, i * IC)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        got = kramers_rate(p, ThermalEnvironment(t), i * IC)
    assert got == pytest.approx(expected, rel=1e-9, abs=0)


def test_rate_vanishes_as_temperature_drops(reference_junction):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        rates = [kramers_rate(reference_junction, ThermalEnvironment(t), 2.899e-6)
                 for t in (0.2, 0.1, 0.05, 0.02)]
        assert np.all(np.diff(rates) < 0)
        assert kramers_rate(reference_junction, ThermalEnvironment(1e-4), 2.899e-6) == 0.0


def test_exponent_cap_gives_exact_zero(reference_junction):
    env = ThermalEnvironment(0.183)
    du_over_kt = 2.077e-21 / env.thermal_energy
    assert du_over_kt > EXPONENT_CAP
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        assert kramers_rate(reference_junction, env, 0.0) == 0.0
        assert kramers_rate(reference_junction, env, 0.0, exponent_cap=1e9) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.85, 0.98), st.floats(0.1, 0.4), st.floats(1e-4, 1e-2))
def test_rate_increasing_in_bias_and_temperature(i, t, step):
    p = JunctionParams(IC)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        base = kramers_rate(p, ThermalEnvironment(t), i * IC)
        assert kramers_rate(p, ThermalEnvironment(t), min(i + step, 0.999) * IC) > base
        assert kramers_rate(p, ThermalEnvironment(t * (1 + step)), i * IC) > base


@settings(max_examples=20, deadline=None)
@given(st.floats(0.80, 0.98), st.floats(0.05, 0.4))
def test_slope_law(i, t):
    p = JunctionParams(IC)
    env = ThermalEnvironment(t)
    h = 1e-5 * IC
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        fd = (math.log10(kramers_rate(p, env, i * IC + h))
              - math.log10(kramers_rate(p, env, i * IC - h))) / (2 * h)
    assert log_rate_slope(p, env, i * IC) == pytest.approx(fd, rel=0.05, abs=0)


def test_decade_per_bias_step(reference_junction):
    env = ThermalEnvironment(0.183)
    bias = np.linspace(2.85e-6, 2.95e-6, 11)
    slope = np.polyfit(bias, np.log10(kramers_rate(reference_junction, env, bias)), 1)[0]
    assert 1 / slope == pytest.approx(0.022e-6, abs=0.002e-6)


@settings(max_examples=200)
@given(st.floats(1e-6, 1e3), st.floats(1e-3, 1e3))
def test_damping_prefactor_bounds(q, x):
    a = damping_prefactor(q, x)
    assert 0 < a < 4


def test_damping_prefactor_limit():
    assert damping_prefactor(1e-12, 10.0) == pytest.approx(1.0, rel=1e-12, abs=0)


def test_validity_warnings():
    with pytest.warns(ValidityWarning, match="quality factor"):
        kramers_rate(JunctionParams(IC, 1.6e-12, 5000.0), ThermalEnvironment(0.183), 2.9e-6)
    with pytest.warns(ValidityWarning, match="crossover"):
        kramers_rate(JunctionParams(IC), ThermalEnvironment(0.05), 2.9e-6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        kramers_rate(JunctionParams(IC), ThermalEnvironment(0.183), 2.9e-6)


def test_environment_validation():
    for bad in (0.0, -1.0, float("inf"), float("nan")):
        with pytest.raises(DomainError):
            ThermalEnvironment(bad)
    assert ThermalEnvironment(0.05).below_crossover(JunctionParams(IC))
    assert not ThermalEnvironment(0.183).below_crossover(JunctionParams(IC))


def test_dark_rate_curve_shapes(reference_junction):
    env = ThermalEnvironment(0.183)
    single = dark_rate_curve(reference_junction, env, [2.9e-6])
    assert len(single) == 1
    assert single.rate[0] == kramers_rate(reference_junction, env, 2.9e-6)
    span = dark_rate_curve(reference_junction, env, np.linspace(2.86e-6, 2.96e-6, 10))
    assert 0.5 < span.rate[0] < 5 and 1e4 < span.rate[-1] < 1e5
    assert np.all(span.uncertainty == 0)
    low = dark_rate_curve(reference_junction, env, np.linspace(2.55e-6, 2.75e-6, 9))
    assert np.all(low.rate < 1e-5)


def test_rate_curve_validation():
    with pytest.raises(ValueError):
        RateCurve([2.0, 1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        RateCurve([1.0, 2.0], [1.0, -2.0])
    with pytest.raises(ValueError):
        RateCurve([1.0, 2.0], [1.0])


def test_temperature_for_rate_inverts(reference_junction):
    t = temperature_for_rate(reference_junction, 2.899e-6, 65.0)
    assert kramers_rate(reference_junction, ThermalEnvironment(t), 2.899e-6) == \
        pytest.approx(65.0, rel=1e-9, abs=0)


def test_kramers_rate_is_deterministic(reference_junction):
    env = ThermalEnvironment(0.183)
    b = np.linspace(2.8e-6, 3.0e-6, 50)
    assert np.array_equal(kramers_rate(reference_junction, env, b),
                          kramers_rate(reference_junction, env, b))


# --- independent-trial pulse model ---------------------------------------------------

def test_pulse_model_reference_values():
    assert poisson_switch_probability(2.7e-4, 10e-9, 80e-12) == pytest.approx(0.033, abs=5e-4)
    assert poisson_switch_probability(2.7e-4, 1000e-9, 80e-12) == pytest.approx(0.966, abs=5e-4)
    assert poisson_switch_probability(0.123, 80e-12, 80e-12) == pytest.approx(0.123, rel=1e-12, abs=0)
    assert poisson_switch_probability(0.0, 1e-8, 80e-12) == 0.0
    assert poisson_switch_probability(1.0, 1e-8, 80e-12) == 1.0


def test_pulse_model_rejects_bad_input():
    for bad in (-0.1, 1.1, float("nan")):
        with pytest.raises(DomainError):
            poisson_switch_probability(bad, 1e-8, 80e-12)
    with pytest.raises(DomainError):
        poisson_switch_probability(0.1, 0.0, 80e-12)


@settings(max_examples=300)
@given(st.floats(1e-9, 0.1), st.floats(80e-12, 1e-6))
def test_pulse_model_first_order(eps_j, width):
    # pulses of at least one relaxation time: |eps - n eps_j| <= (n eps_j)^2
    x = eps_j * width / 80e-12
    if x >= 0.1:
        return
    assert abs(poisson_switch_probability(eps_j, width, 80e-12) - x) <= x * x


def test_pulse_model_first_order_fails_below_one_trial():
    # a fractional trial with a large single-trial probability breaks the bound
    x = 0.5 * 0.125
    assert abs(poisson_switch_probability(0.5, 10e-12, 80e-12) - x) > x * x


@settings(max_examples=200)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(1e-11, 1e-6), st.floats(1e-11, 1e-6))
def test_pulse_model_monotone(e1, e2, w1, w2):
    lo_e, hi_e = sorted((e1, e2))
    lo_w, hi_w = sorted((w1, w2))
    assert poisson_switch_probability(lo_e, lo_w, 80e-12) <= \
        poisson_switch_probability(hi_e, lo_w, 80e-12)
    assert poisson_switch_probability(lo_e, lo_w, 80e-12) <= \
        poisson_switch_probability(lo_e, hi_w, 80e-12)
    assert 0 <= poisson_switch_probability(e1, w1, 80e-12) <= 1


@settings(max_examples=200)
@given(st.floats(1e-9, 0.999), st.floats(1e-10, 1e-6))
def test_single_trial_inverse(eps_j, width):
    eps = poisson_switch_probability(eps_j, width, 80e-12)
    if eps >= 1 - 1e-9:
        return
    assert single_trial_probability(eps, width, 80e-12) == pytest.approx(eps_j, rel=1e-6, abs=0)


def test_half_efficiency_at_10ns_single_trial_value():
    eps_j = single_trial_probability(0.5, 10e-9, 80e-12)
    assert eps_j == pytest.approx(5.53e-3, rel=1e-2, abs=0)
    # the quoted order of magnitude is 1%; the exact inverse is within a factor 2
    assert 0.5e-2 <= eps_j <= 2e-2
