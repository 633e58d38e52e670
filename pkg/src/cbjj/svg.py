"""Minimal deterministic SVG plotting: lines, scatter with error bars, heatmaps.

Output depends only on the data, so figures can be compared byte for byte.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _f(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    k = 0
    while start + k * step <= hi + 1e-9 * step:
        ticks.append(round(start + k * step, 12))
        k += 1
    return ticks


def _label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:.6g}"


@dataclass
class Figure:
    """One set of axes. Coordinates are data units; log axes take positive data."""

    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlog: bool = False
    ylog: bool = False
    width: int = 640
    height: int = 440
    version: str = ""
    _items: list = field(default_factory=list, repr=False)
    _top: tuple | None = field(default=None, repr=False)

    margin = (70, 30, 60, 60)  # left, right, bottom, top

    def line(self, x, y, label: str = "", dashed: bool = False):
        self._items.append(("line", np.asarray(x, float), np.asarray(y, float), label, dashed))
        return self

    def scatter(self, x, y, yerr=None, label: str = ""):
        yerr = None if yerr is None else np.asarray(yerr, float)
        self._items.append(("scatter", np.asarray(x, float), np.asarray(y, float), label, yerr))
        return self

    def hline(self, y: float, label: str = ""):
        self._items.append(("hline", y, label))
        return self

    def heatmap(self, x, y, z, vmin: float = 0.0, vmax: float = 1.0):
        """Cells centred on ``x`` (columns) and ``y`` (rows); ``z[row, col]``.

        Both centre arrays must be increasing.
        """
        self._items.append(("heatmap", np.asarray(x, float), np.asarray(y, float),
                            np.asarray(z, float), vmin, vmax))
        return self

    def top_axis(self, positions, labels, title: str = ""):
        """Secondary labels along the top edge, at data x positions."""
        self._top = (list(positions), list(labels), title)
        return self

    # --- rendering ---------------------------------------------------------------

    def _extent(self):
        xs, ys = [], []
        for it in self._items:
            if it[0] in ("line", "scatter"):
                ok = np.isfinite(it[1]) & np.isfinite(it[2])
                xs.append(it[1][ok])
                y = it[2][ok]
                if it[0] == "scatter" and it[4] is not None:
                    err = it[4][ok]
                    y = np.concatenate([y - err, y + err])
                ys.append(y)
            elif it[0] == "heatmap":
                xs.append(_edges(it[1])[[0, -1]])
                ys.append(_edges(it[2])[[0, -1]])
            elif it[0] == "hline":
                ys.append(np.array([it[1]]))
        x = np.concatenate(xs) if xs else np.array([0.0, 1.0])
        y = np.concatenate(ys) if ys else np.array([0.0, 1.0])
        if self.xlog:
            x = x[x > 0]
        if self.ylog:
            y = y[y > 0]
        x = x if x.size else np.array([1.0, 10.0])
        y = y if y.size else np.array([1.0, 10.0])
        return self._pad(x.min(), x.max(), self.xlog), self._pad(y.min(), y.max(), self.ylog)

    @staticmethod
    def _pad(lo, hi, log):
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.04 * (hi - lo)
        return lo - pad, hi + pad

    def render(self) -> str:
        (x0, x1), (y0, y1) = self._extent()
        left, right, bottom, top = self.margin
        pw = self.width - left - right
        ph = self.height - top - bottom

        def sx(v):
            v = math.log10(v) if self.xlog else v
            return left + (v - x0) / (x1 - x0) * pw

        def sy(v):
            v = math.log10(v) if self.ylog else v
            return top + ph - (v - y0) / (y1 - y0) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
               f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" '
               f'font-family="sans-serif" font-size="12">']
        if self.version:
            out.append(f"<!-- cbjj {escape(self.version)} -->")
        out.append(f'<rect width="{self.width}" height="{self.height}" fill="white"/>')
        out.append(f'<defs><clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" '
                   f'height="{ph}"/></clipPath></defs>')
        body = ['<g clip-path="url(#plot)">']
        legend = []
        color_idx = 0
        for it in self._items:
            kind = it[0]
            if kind == "heatmap":
                _, xs, ys, z, vmin, vmax = it
                ex, ey = _edges(xs), _edges(ys)
                for r in range(ys.size):
                    for c in range(xs.size):
                        xa, xb = sx(ex[c]), sx(ex[c + 1])
                        ya, yb = sy(ey[r + 1]), sy(ey[r])
                        body.append(f'<rect x="{_f(xa)}" y="{_f(ya)}" width="{_f(xb - xa)}" '
                                    f'height="{_f(yb - ya)}" fill="{_heat(z[r, c], vmin, vmax)}"/>')
                continue
            if kind == "hline":
                _, yv, label = it
                y = sy(yv)
                body.append(f'<line x1="{left}" y1="{_f(y)}" x2="{left + pw}" y2="{_f(y)}" '
                            f'stroke="gray" stroke-dasharray="4 3"/>')
                if label:
                    body.append(f'<text x="{left + pw - 4}" y="{_f(y - 4)}" text-anchor="end" '
                                f'fill="gray">{escape(label)}</text>')
                continue
            color = PALETTE[color_idx % len(PALETTE)]
            color_idx += 1
            x, y = it[1], it[2]
            ok = np.isfinite(x) & np.isfinite(y)
            if self.xlog:
                ok &= x > 0
            if self.ylog:
                ok &= y > 0
            if kind == "line":
                pts = " ".join(f"{_f(sx(a))},{_f(sy(b))}" for a, b in zip(x[ok], y[ok]))
                dash = ' stroke-dasharray="6 4"' if it[4] else ""
                body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                            f'stroke-width="1.5"{dash}/>')
            else:
                err = it[4]
                for j in np.flatnonzero(ok):
                    cx, cy = sx(x[j]), sy(y[j])
                    if err is not None and err[j] > 0:
                        lo, hi = y[j] - err[j], y[j] + err[j]
                        ya = sy(hi)
                        yb = sy(lo) if (lo > 0 or not self.ylog) else top + ph
                        body.append(f'<line x1="{_f(cx)}" y1="{_f(ya)}" x2="{_f(cx)}" '
                                    f'y2="{_f(yb)}" stroke="{color}"/>')
                    body.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="3" fill="{color}"/>')
            if it[3]:
                legend.append((it[3], color))
        body.append("</g>")
        out.extend(body)
        out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" '
                   f'stroke="black"/>')
        out.extend(self._axes(x0, x1, y0, y1, sx, sy, left, top, pw, ph))
        for k, (label, color) in enumerate(legend):
            ly = top + 14 + 16 * k
            out.append(f'<rect x="{left + 8}" y="{ly - 9}" width="10" height="10" '
                       f'fill="{color}"/>')
            out.append(f'<text x="{left + 22}" y="{ly}">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def _axes(self, x0, x1, y0, y1, sx, sy, left, top, pw, ph):
        out = []
        base = top + ph
        for v in self._ticks(x0, x1, self.xlog):
            x = sx(v)
            out.append(f'<line x1="{_f(x)}" y1="{base}" x2="{_f(x)}" y2="{base + 5}" '
                       f'stroke="black"/>')
            out.append(f'<text x="{_f(x)}" y="{base + 18}" text-anchor="middle">'
                       f'{_label(v)}</text>')
        for v in self._ticks(y0, y1, self.ylog):
            y = sy(v)
            out.append(f'<line x1="{left - 5}" y1="{_f(y)}" x2="{left}" y2="{_f(y)}" '
                       f'stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{_f(y + 4)}" text-anchor="end">'
                       f'{_label(v)}</text>')
        if self._top is not None:
            positions, labels, title = self._top
            for v, lab in zip(positions, labels):
                if not (np.isfinite(v) and (v > 0 or not self.xlog)):
                    continue
                x = sx(v)
                if left - 1 <= x <= left + pw + 1:
                    out.append(f'<line x1="{_f(x)}" y1="{top}" x2="{_f(x)}" y2="{top - 5}" '
                               f'stroke="black"/>')
                    out.append(f'<text x="{_f(x)}" y="{top - 8}" text-anchor="middle">'
                               f'{escape(lab)}</text>')
            if title:
                out.append(f'<text x="{left + pw / 2}" y="{top - 26}" text-anchor="middle">'
                           f'{escape(title)}</text>')
        elif self.title:
            out.append(f'<text x="{left + pw / 2}" y="{top - 20}" text-anchor="middle" '
                       f'font-size="14">{escape(self.title)}</text>')
        out.append(f'<text x="{left + pw / 2}" y="{self.height - 16}" text-anchor="middle">'
                   f'{escape(self.xlabel)}</text>')
        out.append(f'<text transform="translate(18 {top + ph / 2}) rotate(-90)" '
                   f'text-anchor="middle">{escape(self.ylabel)}</text>')
        return out

    @staticmethod
    def _ticks(lo, hi, log):
        if not log:
            return [v for v in _nice_ticks(lo, hi) if lo <= v <= hi]
        return [10.0**k for k in range(math.ceil(lo), math.floor(hi) + 1)]


def _edges(centres: np.ndarray) -> np.ndarray:
    """Cell edges halfway between sorted centres, extended by half a gap at each end."""
    c = np.sort(np.asarray(centres, float))
    if c.size == 1:
        return np.array([c[0] - 0.5, c[0] + 0.5])
    mid = 0.5 * (c[1:] + c[:-1])
    return np.concatenate([[c[0] - (mid[0] - c[0])], mid, [c[-1] + (c[-1] - mid[-1])]])


def _heat(v: float, vmin: float, vmax: float) -> str:
    """White-to-blue ramp; NaN cells are light gray."""
    if not np.isfinite(v):
        return "#dddddd"
    s = min(max((v - vmin) / (vmax - vmin), 0.0), 1.0)
    r = round(255 - s * (255 - 31))
    g = round(255 - s * (255 - 80))
    b = round(255 - s * (255 - 160))
    return f"#{r:02x}{g:02x}{b:02x}"
