"""Binning of switching times."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import DomainError

CLOCKS = ("folded", "lifetime", "live")


@dataclass(frozen=True)
class Histogram:
    """Counts in bins ``[origin + k*bin_width, origin + (k+1)*bin_width)``.

    ``overflow`` holds switches outside the binned span and ``censored`` the
    timed-out records, so ``counts.sum() + overflow + censored`` is the number
    of records that went into the histogram.
    """

    bin_width: float
    origin: float
    counts: np.ndarray
    overflow: int = 0
    censored: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.bin_width) and self.bin_width > 0):
            raise DomainError("bin_width must be > 0")
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise DomainError("counts must be a 1-d array of non-negative integers")
        object.__setattr__(self, "counts", counts.astype(np.int64))

    @property
    def n_bins(self) -> int:
        return self.counts.size

    @property
    def edges(self) -> np.ndarray:
        return self.origin + self.bin_width * np.arange(self.n_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.origin + self.bin_width * (np.arange(self.n_bins) + 0.5)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def records(self) -> int:
        return self.total + self.overflow + self.censored

    def rescaled(self, factor: float) -> "Histogram":
        """Same counts on a time axis multiplied by ``factor`` (unit change)."""
        return replace(self, bin_width=self.bin_width * factor, origin=self.origin * factor)


def histogram_times(times, bin_width: float, span: float, origin: float = 0.0,
                    censored: int = 0) -> Histogram:
    """Bin ``times`` into ``ceil(span / bin_width)`` bins starting at ``origin``."""
    times = np.asarray(times, dtype=float)
    n_bins = max(1, int(math.ceil(span / bin_width - 1e-9)))
    # the relative nudge keeps values sitting exactly on a left edge in that bin
    # NaN times (no place on the chosen clock) count as overflow
    pos = np.floor((times - origin) / bin_width + 1e-9)
    inside = np.isfinite(pos) & (pos >= 0) & (pos < n_bins)
    counts = np.bincount(pos[inside].astype(np.int64), minlength=n_bins)
    return Histogram(bin_width, origin, counts, int((~inside).sum()), censored)


def clock_times(dataset, clock: str = "folded") -> np.ndarray:
    """Switch times of the non-censored records on the requested clock.

    ``lifetime``: time since the first ramp-up ended.
    ``folded``: time since the ramp-up of the cycle in which the switch happened.
    ``live``: accumulated hold time, which turns a constant hold-segment rate
    into a plain exponential across cycles. Switches on the ramp-down have no
    live time and come back as NaN.
    """
    if clock not in CLOCKS:
        raise DomainError(f"clock must be one of {CLOCKS}")
    keep = ~dataset.censored
    if clock == "lifetime":
        return dataset.lifetimes[keep]
    t = dataset.in_cycle_times()[keep]
    if clock == "folded":
        return t
    hold = dataset.metadata["hold_duration"]
    k = dataset.cycle_index[keep]
    return np.where(t < hold, k * hold + t, np.nan)


def default_span(dataset, clock: str) -> float:
    m = dataset.metadata
    if clock == "folded":
        return m["hold_duration"]
    if clock == "live":
        return m["timeout_cycles"] * m["hold_duration"]
    return m["timeout_cycles"] * m["cycle_period"]


def make_histogram(dataset, bin_width: float | None = None, span: float | None = None,
                   clock: str = "folded") -> Histogram:
    """Histogram a switching dataset; the bin width defaults to ``rf_delay / 70``."""
    if bin_width is None:
        t_rf = dataset.metadata.get("rf_delay")
        if not t_rf:
            raise DomainError("bin_width is required when the dataset has no rf_delay")
        bin_width = t_rf / 70.0
    if span is None:
        span = default_span(dataset, clock)
    return histogram_times(clock_times(dataset, clock), bin_width, span,
                           censored=int(dataset.censored.sum()))
