"""Hand-rolled SVG plot rendering.

The service contract wants identical bytes for identical inputs, which
rules out plotting libraries with embedded timestamps or layout that moves
between versions. The renderer here draws a histogram-with-fit or an
error-bar time series into fixed-geometry SVG, and embeds the source data
as JSON in a <metadata> element so documents can be parsed back and
checked against what was rendered.
"""

from __future__ import annotations

import json
import math
import re

from .flux import FluxPoint
from .lifetime import FitResult, Histogram

WIDTH = 800
HEIGHT = 520
MARGIN_LEFT = 70
MARGIN_RIGHT = 30
MARGIN_TOP = 50
MARGIN_BOTTOM = 60


class EmptyPlot(Exception):
    def __init__(self):
        super().__init__("nothing to plot")


def _xml_escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_step(span: float, target: int = 6) -> float:
    if span <= 0:
        return 1.0
    raw = span / target
    power = math.floor(math.log10(raw))
    base = raw / 10**power
    if base <= 1:
        nice = 1.0
    elif base <= 2:
        nice = 2.0
    elif base <= 5:
        nice = 5.0
    else:
        nice = 10.0
    return nice * 10**power


def _ticks(lo: float, hi: float) -> list[float]:
    step = _nice_step(hi - lo)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + step * 1e-9:
        out.append(round(v, 10))
        v += step
    return out


def _tick_label(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:g}"


class _Frame:
    """Maps data coordinates onto the fixed plot rectangle."""

    def __init__(self, x_lo, x_hi, y_lo, y_hi):
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi
        self.px0 = MARGIN_LEFT
        self.px1 = WIDTH - MARGIN_RIGHT
        self.py0 = MARGIN_TOP
        self.py1 = HEIGHT - MARGIN_BOTTOM

    def x(self, v: float) -> float:
        f = (v - self.x_lo) / (self.x_hi - self.x_lo)
        return self.px0 + f * (self.px1 - self.px0)

    def y(self, v: float) -> float:
        f = (v - self.y_lo) / (self.y_hi - self.y_lo)
        return self.py1 - f * (self.py1 - self.py0)

    def clamp_y(self, v: float) -> float:
        return min(max(v, self.y_lo), self.y_hi)


def _axes(frame: _Frame, title: str, x_label: str, y_label: str) -> list[str]:
    parts = [
        f'<rect x="{frame.px0}" y="{frame.py0}" width="{frame.px1 - frame.px0}" '
        f'height="{frame.py1 - frame.py0}" fill="none" stroke="black" stroke-width="1"/>',
        f'<text x="{WIDTH // 2}" y="30" text-anchor="middle" font-size="18" '
        f'font-family="monospace">{_xml_escape(title)}</text>',
        f'<text x="{(frame.px0 + frame.px1) // 2}" y="{HEIGHT - 15}" text-anchor="middle" '
        f'font-size="13" font-family="monospace">{_xml_escape(x_label)}</text>',
        f'<text x="20" y="{(frame.py0 + frame.py1) // 2}" text-anchor="middle" font-size="13" '
        f'font-family="monospace" transform="rotate(-90 20 {(frame.py0 + frame.py1) // 2})">'
        f"{_xml_escape(y_label)}</text>",
    ]
    for v in _ticks(frame.x_lo, frame.x_hi):
        px = frame.x(v)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{frame.py1}" x2="{_fmt(px)}" y2="{frame.py1 + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{frame.py1 + 20}" text-anchor="middle" font-size="12" '
            f'font-family="monospace">{_tick_label(v)}</text>'
        )
    for v in _ticks(frame.y_lo, frame.y_hi):
        py = frame.y(v)
        parts.append(
            f'<line x1="{frame.px0 - 5}" y1="{_fmt(py)}" x2="{frame.px0}" y2="{_fmt(py)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{frame.px0 - 8}" y="{_fmt(py + 4)}" text-anchor="end" font-size="12" '
            f'font-family="monospace">{_tick_label(v)}</text>'
        )
    return parts


def _document(embedded: dict, body: list[str]) -> bytes:
    payload = json.dumps(embedded, ensure_ascii=False, separators=(",", ":"))
    payload = payload.replace("<", "\\u003c").replace(">", "\\u003e").replace("&", "\\u0026")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<metadata id="plot-data">{payload}</metadata>',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        *body,
        "</svg>",
    ]
    return ("\n".join(parts) + "\n").encode("utf-8")


def render_lifetime_plot(
    hist: Histogram,
    fit: FitResult | None,
    title: str = "Muon lifetime",
    x_label: str = "Time between pulses (microseconds)",
    y_label: str = "Counts",
    fit_min_us: float | None = None,
    fit_max_us: float | None = None,
) -> bytes:
    """Histogram steps with the fitted curve and a tau legend. Deterministic."""
    if not hist.counts or sum(hist.counts) == 0:
        raise EmptyPlot()
    x_lo = hist.bin_edges[0]
    x_hi = hist.bin_edges[-1]
    y_hi = max(hist.counts) * 1.1
    frame = _Frame(x_lo, x_hi, 0.0, y_hi)
    body = _axes(frame, title, x_label, y_label)
    steps = [f"M {_fmt(frame.x(x_lo))} {_fmt(frame.y(0))}"]
    for i, count in enumerate(hist.counts):
        e0, e1 = hist.bin_edges[i], hist.bin_edges[i + 1]
        steps.append(f"L {_fmt(frame.x(e0))} {_fmt(frame.y(count))}")
        steps.append(f"L {_fmt(frame.x(e1))} {_fmt(frame.y(count))}")
    steps.append(f"L {_fmt(frame.x(x_hi))} {_fmt(frame.y(0))}")
    body.append(
        f'<path d="{" ".join(steps)}" fill="none" stroke="#1f4e9c" stroke-width="1.5"/>'
    )
    embedded: dict = {
        "kind": "lifetime",
        "bin_edges": list(hist.bin_edges),
        "counts": list(hist.counts),
        "unit": hist.unit,
    }
    if fit is not None:
        lo = fit_min_us if fit_min_us is not None else x_lo
        hi = fit_max_us if fit_max_us is not None else x_hi
        lo = max(lo, x_lo)
        hi = min(hi, x_hi)
        points = []
        for k in range(200):
            t = lo + (hi - lo) * k / 199.0
            v = fit.A * math.exp(-t / fit.tau_us) + fit.B if fit.tau_us > 0 else fit.B
            points.append(f"{_fmt(frame.x(t))},{_fmt(frame.y(frame.clamp_y(v)))}")
        body.append(
            f'<polyline points="{" ".join(points)}" fill="none" stroke="#c02020" stroke-width="1.5"/>'
        )
        legend = [
            f"tau = {fit.tau_us:.5g} +/- {fit.sigma_tau_us:.4g} us",
            f"A = {fit.A:.5g}  B = {fit.B:.5g}",
            f"chi2/ndf = {fit.chi2:.5g}/{fit.ndf}",
            f"candidates = {fit.n_candidates}",
        ]
        if not fit.converged:
            legend.append("fit did not converge")
        lx = frame.px1 - 280
        ly = frame.py0 + 16
        body.append(
            f'<rect x="{lx - 8}" y="{frame.py0 + 2}" width="280" height="{14 + 16 * len(legend)}" '
            f'fill="white" stroke="#888" stroke-width="0.5"/>'
        )
        for i, line in enumerate(legend):
            body.append(
                f'<text x="{lx}" y="{ly + 16 * i}" font-size="12" font-family="monospace">'
                f"{_xml_escape(line)}</text>"
            )
        embedded["fit"] = {
            "A": fit.A,
            "tau_us": fit.tau_us,
            "B": fit.B,
            "sigma_A": fit.sigma_A,
            "sigma_tau_us": fit.sigma_tau_us,
            "sigma_B": fit.sigma_B,
            "chi2": fit.chi2,
            "ndf": fit.ndf,
            "n_candidates": fit.n_candidates,
            "converged": fit.converged,
        }
    return _document(embedded, body)


def render_series_plot(
    points: list[FluxPoint],
    title: str = "Flux",
    x_label: str = "Time (seconds)",
    y_label: str = "Rate (Hz)",
    x_width: float | None = None,
) -> bytes:
    """Rate-versus-time markers with Poisson error bars. Deterministic."""
    if not points:
        raise EmptyPlot()
    width = x_width if x_width is not None else (
        points[1].bin_start_s - points[0].bin_start_s if len(points) > 1 else 1.0
    )
    x_lo = points[0].bin_start_s
    x_hi = points[-1].bin_start_s + width
    y_hi = max(p.rate_hz + p.error_hz for p in points) * 1.15 or 1.0
    frame = _Frame(x_lo, x_hi, 0.0, y_hi)
    body = _axes(frame, title, x_label, y_label)
    for p in points:
        cx = frame.x(p.bin_start_s + width / 2.0)
        cy = frame.y(p.rate_hz)
        y_above = frame.y(frame.clamp_y(p.rate_hz + p.error_hz))
        y_below = frame.y(frame.clamp_y(p.rate_hz - p.error_hz))
        body.append(
            f'<line x1="{_fmt(cx)}" y1="{_fmt(y_below)}" x2="{_fmt(cx)}" y2="{_fmt(y_above)}" '
            f'stroke="#1f4e9c" stroke-width="1"/>'
        )
        body.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="2.5" fill="#1f4e9c"/>')
    embedded = {
        "kind": "series",
        "points": [[p.bin_start_s, p.rate_hz, p.error_hz, p.count] for p in points],
    }
    return _document(embedded, body)


_EMBED_RE = re.compile(rb'<metadata id="plot-data">(.*?)</metadata>', re.DOTALL)


def parse_embedded_data(svg: bytes) -> dict:
    """The JSON data block a renderer embedded in the document."""
    m = _EMBED_RE.search(svg)
    if not m:
        raise ValueError("document has no embedded data block")
    return json.loads(m.group(1).decode("utf-8"))
