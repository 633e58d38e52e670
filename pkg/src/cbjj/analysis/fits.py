"""Parameter estimation for switching histograms, rate curves and pulse scans.

Histogram fits maximise the Poisson likelihood by running Levenberg-Marquardt
on deviance residuals, whose sum of squares is ``-2 log L`` up to a constant.
Internally the time axis is measured in bins, so results do not depend on the
time unit of the input.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ..errors import (
    DegenerateHistogramError,
    DomainError,
    FitError,
    IllConditionedWarning,
    InsufficientDataError,
    MisalignedBinError,
)
from ..escape import RateCurve, ThermalEnvironment, log_kramers_rate
from ..junction import JunctionParams
from .histogram import Histogram

TOL = 1e-10
MAX_ITER = 500


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters with their covariance.

    ``chi2_reduced`` is the Poisson deviance per degree of freedom for
    histogram fits and the weighted residual sum per degree of freedom for
    least-squares fits.
    """

    names: tuple
    values: np.ndarray
    covariance: np.ndarray
    chi2_reduced: float
    n_points: int
    converged: bool
    flags: dict = field(default_factory=dict)

    @property
    def uncertainties(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.index(name)])

    def sigma(self, name: str) -> float:
        return float(self.uncertainties[self.index(name)])

    def to_dict(self) -> dict:
        return {
            "parameters": {n: float(v) for n, v in zip(self.names, self.values)},
            "uncertainties": {n: float(s) for n, s in zip(self.names, self.uncertainties)},
            "covariance": [[float(c) for c in row] for row in self.covariance],
            "chi2_reduced": float(self.chi2_reduced),
            "n_points": int(self.n_points),
            "converged": bool(self.converged),
            "flags": dict(self.flags),
        }


def _lm(fun, x0):
    res = least_squares(fun, np.asarray(x0, dtype=float), method="lm", xtol=TOL, ftol=TOL,
                        gtol=TOL, max_nfev=MAX_ITER * (len(x0) + 1))
    if not np.all(np.isfinite(res.x)):
        raise FitError("optimizer produced non-finite parameters")
    return res


def _invert(info, names):
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"singular information matrix for {names}") from exc
    if np.any(np.diag(cov) < 0) or not np.all(np.isfinite(cov)):
        raise FitError(f"information matrix for {names} is not positive definite")
    return 0.5 * (cov + cov.T)


# --- histogram models -----------------------------------------------------------

def exponential_model(t, n0, tau, bin_width):
    """Expected counts ``(N0 dt / tau) exp(-t / tau)`` at bin time ``t``."""
    t = np.asarray(t, dtype=float)
    return n0 * bin_width / tau * np.exp(-t / tau)


def rf_histogram_model(t, n0, tau, n_rf, t_rf, bin_width):
    """Exponential with an RF bin at ``t_rf`` and depleted escape afterwards.

    After the pulse the exponential is reduced by ``N_RF (dt / tau)
    exp(-(t - t_rf) / tau)``, which is the dark population removed by the
    pulse spread over bins of width ``dt``. The step function includes its
    left edge, so the bin starting at ``t_rf`` holds the extra ``N_RF``.
    """
    t = np.asarray(t, dtype=float)
    after = (t - t_rf) >= 0
    in_bin = after & ((t - t_rf - bin_width) < 0)
    depleted = np.where(after, n_rf * bin_width / tau * np.exp(-(t - t_rf) / tau), 0.0)
    return exponential_model(t, n0, tau, bin_width) - depleted + n_rf * in_bin


def _deviance_residuals(n, mu):
    # negative expectations (possible for the RF model past eps = 1) are
    # penalised linearly so the optimum sits on the physical boundary
    neg = np.maximum(-mu, 0.0)
    mu = np.maximum(mu, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.where(n > 0, n * np.log(n / mu), 0.0)
    d = np.clip(2.0 * (mu - n + log_term), 0.0, None) + 2.0 * neg
    return np.sign(n - mu) * np.sqrt(d)


def _poisson_fit(counts, x0, mu_of, dmu_of, names, n_free):
    """Deviance LM followed by Fisher-information covariance.

    ``mu_of(x)`` returns expected counts from the internal vector ``x``;
    ``dmu_of(x)`` returns (natural values, d mu / d natural) for the covariance.
    """
    res = _lm(lambda x: _deviance_residuals(counts, mu_of(x)), x0)
    values, jac = dmu_of(res.x)
    mu = mu_of(res.x)
    tiny = 1e-6 * max(float(mu.max()), 1.0)
    if np.any((mu <= 0) & (counts > 0)) or np.any(mu < -tiny):
        raise FitError("fit ended with non-positive expected counts")
    # bins pinned at zero expectation carry no regular information
    live = mu > tiny
    res.pinned = bool(np.any(~live))
    mu = np.maximum(mu, 1e-300)
    info = (jac[live] / mu[live, None]).T @ jac[live]
    cov = _invert(info, names)
    dof = max(counts.size - n_free, 1)
    chi2 = float(np.sum(_deviance_residuals(counts, mu) ** 2) / dof)
    return values, cov, chi2, bool(res.status > 0), res


def _check_histogram(hist: Histogram, min_nonempty: int):
    nonempty = int(np.count_nonzero(hist.counts))
    if nonempty <= 1:
        raise DegenerateHistogramError("all counts fall in at most one bin")
    if nonempty < min_nonempty:
        raise InsufficientDataError(f"need at least {min_nonempty} nonempty bins, got {nonempty}")


def _bin_axis(hist: Histogram):
    # bin centres measured in bins from t = 0
    return hist.origin / hist.bin_width + np.arange(hist.n_bins) + 0.5


def _tau_guess(u, counts):
    total = counts.sum()
    mean = float((u * counts).sum() / total - u[0] + 0.5)
    span = float(u[-1] - u[0] + 1.0)
    return min(max(mean, 0.5), 10.0 * span)


def fit_exponential(hist: Histogram, tail: bool = False) -> FitResult:
    """Poisson maximum-likelihood fit of ``(N0 dt / tau) exp(-t / tau)``.

    Returns parameters ``N_0`` and ``tau`` [time unit of the histogram].

    With ``tail=True`` the overflow and censored records enter as one extra
    cell expecting ``N0 exp(-t_end / tau)``, where ``t_end`` is the end of the
    last bin. That is the right likelihood for right-censored lifetimes
    (e.g. the live clock), and it pins ``N_0`` to the number of records.
    """
    _check_histogram(hist, 5)
    n = hist.counts.astype(float)
    u = _bin_axis(hist)
    u_end = u[-1] + 0.5
    if tail:
        n = np.append(n, hist.overflow + hist.censored)
    tau0 = _tau_guess(u, n[:u.size])
    n00 = n.sum() * math.exp(min((u[0] - 0.5) / tau0, 700.0))

    def mu_of(x):
        n0, tau = math.exp(x[0]), math.exp(x[1])
        mu = exponential_model(u, n0, tau, 1.0)
        return np.append(mu, n0 * math.exp(-u_end / tau)) if tail else mu

    def dmu_of(x):
        n0, tau = math.exp(x[0]), math.exp(x[1])
        mu = exponential_model(u, n0, tau, 1.0)
        jac = np.column_stack([mu / n0, mu * (u - tau) / tau**2])
        if tail:
            m = math.exp(-u_end / tau)
            jac = np.vstack([jac, [m, n0 * m * u_end / tau**2]])
        return np.array([n0, tau]), jac

    values, cov, chi2, ok, _ = _poisson_fit(n, [math.log(n00), math.log(tau0)], mu_of, dmu_of,
                                            ("N_0", "tau"), 2)
    scale = np.array([1.0, hist.bin_width])
    return FitResult(("N_0", "tau"), values * scale, cov * np.outer(scale, scale), chi2,
                     n.size, ok, {"tail": True} if tail else {})


def escape_rate(fit: FitResult) -> tuple[float, float]:
    """Escape rate ``1 / tau`` and its propagated uncertainty."""
    tau, s = fit["tau"], fit.sigma("tau")
    if not tau > 0:
        raise FitError("tau must be positive")
    return 1.0 / tau, s / tau**2


def _rf_bin(hist: Histogram, t_rf: float) -> int:
    k = (t_rf - hist.origin) / hist.bin_width
    kr = round(k)
    if abs(k - kr) > 1e-6:
        raise MisalignedBinError(f"t_rf={t_rf!r} is not on a bin edge (offset {k - kr:+.3g} bins)")
    if not 0 <= kr < hist.n_bins:
        raise MisalignedBinError("t_rf lies outside the histogram span")
    return int(kr)


def _rf_start(hist, k, n, u):
    """Starting N_0 and tau (in bins) from the bins before the RF bin."""
    if np.count_nonzero(n[:k]) >= 5:
        try:
            pre = fit_exponential(Histogram(1.0, u[0] - 0.5, hist.counts[:k]))
            return pre["N_0"], min(pre["tau"], 10.0 * hist.n_bins)
        except FitError:
            pass
    tau0 = _tau_guess(u, np.where(np.arange(n.size) == k, 0.0, n))
    return max(n.sum(), 1.0) * math.exp(min((u[0] - 0.5) / tau0, 700.0)), tau0


def fit_rf_histogram(hist: Histogram, t_rf: float) -> FitResult:
    """Joint fit of ``N_0``, ``tau`` and the RF-bin population ``N_RF``.

    ``N_RF`` is constrained to be non-negative: when the free optimum is
    negative the fit is repeated with ``N_RF = 0`` and the flag
    ``n_rf_at_bound`` is set. If fewer than four bins outside the RF bin hold
    counts, ``tau`` cannot be estimated; the result then carries
    ``tau_unconstrained`` and ``converged=False``.
    """
    k = _rf_bin(hist, t_rf)
    n = hist.counts.astype(float)
    names = ("N_0", "tau", "N_RF")
    outside = np.delete(n, k)
    if n.sum() == 0:
        raise DegenerateHistogramError("empty histogram")
    if np.count_nonzero(outside) < 4:
        # no handle on the exponential: report everything in the RF bin as N_RF
        cov = np.diag([outside.sum() + 1.0, np.inf, n[k]])
        return FitResult(names, np.array([outside.sum(), np.nan, n[k]]), cov, float("nan"),
                         hist.n_bins, False, {"tau_unconstrained": True})

    u = _bin_axis(hist)
    u_rf = t_rf / hist.bin_width
    after = (u - u_rf) >= 0
    in_bin = np.arange(hist.n_bins) == k
    n00, tau0 = _rf_start(hist, k, n, u)
    nbr = n[max(k - 2, 0):k + 3]
    baseline = float(np.median(np.delete(nbr, min(k, 2)))) if nbr.size > 1 else 0.0
    # internal third parameter is N_RF relative to the survivors at t_rf, which
    # keeps the starting point on the physical side (model >= 0)
    rho0 = min(max(n[k] - baseline, 0.0) / (n00 * math.exp(-u_rf / tau0)), 0.95)

    def natural(x, fixed_zero):
        n0, tau = math.exp(x[0]), math.exp(x[1])
        rho = 0.0 if fixed_zero else x[2]
        return n0, tau, rho * n0 * math.exp(-u_rf / tau)

    def model(n0, tau, nrf):
        return rf_histogram_model(u, n0, tau, nrf, u_rf, 1.0)

    def jacobian(n0, tau, nrf):
        base = exponential_model(u, n0, tau, 1.0)
        dep_unit = np.where(after, np.exp(-(u - u_rf) / tau) / tau, 0.0)
        d_tau = base * (u - tau) / tau**2 \
            - nrf * np.where(after, dep_unit * ((u - u_rf) - tau) / tau**2, 0.0)
        return np.column_stack([base / n0, d_tau, in_bin - dep_unit])

    def run(fixed_zero, x0):
        def mu_of(x):
            return model(*natural(x, fixed_zero))

        def dmu_of(x):
            nat = natural(x, fixed_zero)
            return np.array(nat), jacobian(*nat)

        return _poisson_fit(n, x0, mu_of, dmu_of, names, 2 if fixed_zero else 3)

    flags = {}
    values, cov, chi2, ok, res = run(False, [math.log(n00), math.log(tau0), rho0])
    if values[2] < 0:
        values, cov, chi2, ok, res = run(True, [math.log(n00), math.log(tau0)])
        flags["n_rf_at_bound"] = True
    if res.pinned:
        # every survivor switched on the pulse; the covariance is not regular here
        flags["eps_at_boundary"] = True
    span = hist.n_bins
    if values[1] > 100.0 * span or math.sqrt(cov[1, 1]) > values[1]:
        flags["tau_unconstrained"] = True
        ok = False
    scale = np.array([1.0, hist.bin_width, 1.0])
    return FitResult(names, values * scale, cov * np.outer(scale, scale), chi2, hist.n_bins, ok,
                     flags)


# --- Kramers fit of a rate curve -------------------------------------------------

def _log_rate(bias, temperature, ic, prior: JunctionParams):
    params = JunctionParams(ic, prior.capacitance, prior.shunt_resistance)
    return log_kramers_rate(params, ThermalEnvironment(temperature), bias)


def _kramers_start(bias, log_rate, w, prior):
    """Profile over Ic; for each candidate, 1/T from a weighted linear fit."""
    from ..junction import barrier_height
    from ..constants import BOLTZMANN

    top = bias.max()
    best = None
    for ic in top * (1.0 + np.geomspace(1e-4, 0.5, 200)):
        p = JunctionParams(ic, prior.capacitance, prior.shunt_resistance)
        du = barrier_height(p, bias)
        # prefactor taken at the zero-damping limit for the bootstrap only
        pref = np.log(np.asarray(p.zero_bias_plasma_frequency
                                 * (1 - (bias / ic) ** 2) ** 0.25 / (2 * np.pi)))
        y = log_rate - pref
        x = -du / BOLTZMANN
        beta = float(np.sum(w * x * y) / np.sum(w * x * x))
        if beta <= 0:
            continue
        ssr = float(np.sum(w * (y - beta * x) ** 2))
        if best is None or ssr < best[0]:
            best = (ssr, ic, 1.0 / beta)
    if best is None:
        raise FitError("no admissible starting point for the Kramers fit")
    return best[1], best[2]


def fit_kramers(curve: RateCurve, params_prior: JunctionParams) -> FitResult:
    """Weighted least squares on ``ln(rate)`` with free temperature and Ic.

    Capacitance and shunt resistance are held at the prior's values. Points
    without an uncertainty get unit weight and the covariance is then scaled
    by the residual variance.
    """
    bias, rate, unc = curve.bias, curve.rate, curve.uncertainty
    if len(curve) < 6:
        raise InsufficientDataError("need at least 6 rate points")
    if np.any(rate <= 0):
        raise DomainError("rates must be positive for a log-space fit")
    if math.log10(rate.max() / rate.min()) < 2.0:
        raise InsufficientDataError("rates must span at least two decades")
    y = np.log(rate)
    weighted = bool(np.all(unc > 0))
    s = unc / rate if weighted else np.ones_like(rate)
    ic0, t0 = _kramers_start(bias, y, 1.0 / s**2, params_prior)
    top = bias.max()
    # internal parameters keep T > 0 and Ic above the largest bias
    x0 = [math.log(t0), math.log(ic0 - top)]

    def natural(x):
        return math.exp(x[0]), top + math.exp(x[1])

    def resid_nat(t, ic):
        return (_log_rate(bias, t, ic, params_prior) - y) / s

    res = _lm(lambda x: resid_nat(*natural(x)), x0)
    t_hat, ic_hat = natural(res.x)
    jac = np.empty((bias.size, 2))
    for j, (v, h) in enumerate(((t_hat, 1e-6 * t_hat), (ic_hat, 1e-9 * ic_hat))):
        lo = [t_hat, ic_hat]
        hi = [t_hat, ic_hat]
        lo[j] = v - h
        hi[j] = v + h
        jac[:, j] = (resid_nat(*hi) - resid_nat(*lo)) / (2 * h)
    cov = _invert(jac.T @ jac, ("T", "I_c"))
    r = resid_nat(t_hat, ic_hat)
    dof = bias.size - 2
    chi2 = float(r @ r / dof)
    if not weighted:
        cov = cov * chi2
    return FitResult(("T", "I_c"), np.array([t_hat, ic_hat]), cov, chi2, bias.size,
                     bool(res.status > 0))


# --- pulse-width fit -------------------------------------------------------------

def _expit(z):
    return 1.0 / (1.0 + math.exp(-z)) if z >= 0 else math.exp(z) / (1.0 + math.exp(z))


def fit_pulse_width(points, relaxation_time: float) -> FitResult:
    """One-parameter fit of ``1 - (1 - eps_j)^(width / relaxation_time)``.

    ``points`` holds ``(width, efficiency, sigma)`` triples. Two points are
    accepted; fewer than four, widths spanning under a decade, or a scan that
    sits on the saturated plateau trigger :class:`IllConditionedWarning`.
    """
    from ..escape import poisson_switch_probability, single_trial_probability

    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DomainError("points must be (width, efficiency, sigma) triples")
    if pts.shape[0] < 2:
        raise InsufficientDataError("need at least two points")
    width, eff, sig = pts.T
    if np.any(width <= 0) or np.any(sig < 0) or np.any((eff < 0) | (eff > 1)):
        raise DomainError("widths must be > 0, efficiencies in [0, 1], sigmas >= 0")
    if pts.shape[0] < 4 or width.max() / width.min() < 10.0:
        warnings.warn("pulse-width scan has fewer than 4 points or spans under a decade",
                      IllConditionedWarning, stacklevel=2)
    weighted = bool(np.all(sig > 0))
    w_sig = sig if weighted else np.ones_like(eff)

    clipped = np.clip(eff, 1e-12, 1 - 1e-12)
    guess = np.exp(np.mean(np.log(single_trial_probability(clipped, width, relaxation_time))))
    guess = min(max(guess, 1e-12), 1 - 1e-12)

    def resid(x):
        e = _expit(x[0])
        return (poisson_switch_probability(e, width, relaxation_time) - eff) / w_sig

    res = _lm(resid, [math.log(guess / (1 - guess))])
    e = _expit(float(res.x[0]))
    n = width / relaxation_time
    dmodel = n * (1.0 - e) ** (n - 1.0) / w_sig
    info = float(dmodel @ dmodel)
    r = resid(res.x)
    dof = max(eff.size - 1, 1)
    chi2 = float(r @ r / dof)
    flags = {}
    saturated = bool(np.all(poisson_switch_probability(e, width, relaxation_time) > 0.99))
    if saturated or info <= 0 or not math.isfinite(info):
        warnings.warn("efficiencies sit on the saturated plateau; eps_j is poorly constrained",
                      IllConditionedWarning, stacklevel=2)
        flags["ill_conditioned"] = True
    var = 1.0 / info if info > 0 else float("inf")
    if not weighted:
        var *= chi2
    return FitResult(("eps_j",), np.array([e]), np.array([[var]]), chi2, eff.size,
                     bool(res.status > 0), flags)
