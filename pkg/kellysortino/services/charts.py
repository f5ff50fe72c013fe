"""Self-contained SVG rendering for sweep curves, return histograms and return time series."""

import math
from collections.abc import Callable
from datetime import date
from xml.sax.saxutils import escape

from kellysortino.errors import DomainError

WIDTH = 640
HEIGHT = 400
MARGIN = 56
TICKS = 5

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]


def _finite_range(values: list[float]) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    return lo, hi


class _Frame:
    def __init__(self, x_range: tuple[float, float], y_range: tuple[float, float]):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        self.plot_w = WIDTH - 2 * MARGIN
        self.plot_h = HEIGHT - 2 * MARGIN

    def x(self, v: float) -> float:
        return MARGIN + (v - self.x0) / (self.x1 - self.x0) * self.plot_w

    def y(self, v: float) -> float:
        return HEIGHT - MARGIN - (v - self.y0) / (self.y1 - self.y0) * self.plot_h

    def axes(self, title: str, x_label: str, y_label: str, x_format: Callable[[float], str] = "{:.4g}".format) -> list[str]:
        bottom, right = HEIGHT - MARGIN, WIDTH - MARGIN
        parts = [
            f'<text x="{WIDTH / 2:.1f}" y="{MARGIN / 2:.1f}" text-anchor="middle" font-size="15">{escape(title)}</text>',
            f'<line x1="{MARGIN}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
            f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{bottom}" stroke="black"/>',
            f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(x_label)}</text>',
            f'<text x="14" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {HEIGHT / 2:.1f})">{escape(y_label)}</text>',
        ]
        for i in range(TICKS + 1):
            xv = self.x0 + (self.x1 - self.x0) * i / TICKS
            yv = self.y0 + (self.y1 - self.y0) * i / TICKS
            px, py = self.x(xv), self.y(yv)
            parts.append(f'<line x1="{px:.2f}" y1="{bottom}" x2="{px:.2f}" y2="{bottom + 4}" stroke="black"/>')
            parts.append(f'<text x="{px:.2f}" y="{bottom + 16}" text-anchor="middle" font-size="10">{escape(x_format(xv))}</text>')
            parts.append(f'<line x1="{MARGIN - 4}" y1="{py:.2f}" x2="{MARGIN}" y2="{py:.2f}" stroke="black"/>')
            parts.append(f'<text x="{MARGIN - 6}" y="{py + 3:.2f}" text-anchor="end" font-size="10">{yv:.4g}</text>')
        return parts


def _document(parts: list[str]) -> str:
    header = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">'
    )
    body = "\n".join(["  " + p for p in [f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>', *parts]])
    return f"{header}\n{body}\n</svg>\n"


def line_chart_svg(
    x: list[float],
    series: dict[str, list[float]],
    title: str,
    x_label: str,
    y_label: str,
) -> str:
    """One polyline per named series; non-finite points break the line."""
    if not x:
        raise DomainError("Line chart needs at least one point")
    frame = _Frame(_finite_range(x), _finite_range([v for ys in series.values() for v in ys]))
    parts = frame.axes(title, x_label, y_label)
    parts.extend(_polylines(frame, x, series))
    return _document(parts)


def _polylines(frame: _Frame, x: list[float], series: dict[str, list[float]]) -> list[str]:
    parts = []
    for n, (name, ys) in enumerate(series.items()):
        color = _COLORS[n % len(_COLORS)]
        segments: list[list[str]] = [[]]
        for xv, yv in zip(x, ys):
            if math.isfinite(yv):
                segments[-1].append(f"{frame.x(xv):.2f},{frame.y(yv):.2f}")
            elif segments[-1]:
                segments.append([])
        for points in segments:
            if points:
                parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(points)}"/>')
        parts.append(
            f'<text x="{WIDTH - MARGIN - 4}" y="{MARGIN + 14 * (n + 1)}" text-anchor="end" '
            f'font-size="11" fill="{color}">{escape(name)}</text>'
        )
    return parts


def timeseries_svg(
    dates: list[date],
    series: dict[str, list[float]],
    periods: list[tuple[str, date, date]],
    title: str,
    y_label: str = "annualized return",
) -> str:
    """Date-indexed lines over shaded, labelled windows; windows outside the dates are skipped."""
    if not dates:
        raise DomainError("Time series chart needs at least one date")
    x = [float(d.toordinal()) for d in dates]
    frame = _Frame(_finite_range(x), _finite_range([v for ys in series.values() for v in ys]))
    parts = frame.axes(title, "date", y_label, x_format=lambda v: date.fromordinal(round(v)).isoformat())
    top, bottom = MARGIN, HEIGHT - MARGIN
    for label, start, end in periods:
        left, right = max(float(start.toordinal()), frame.x0), min(float(end.toordinal()), frame.x1)
        if right < left:
            continue
        x_left = frame.x(left)
        width = max(frame.x(right) - x_left, 1.0)
        parts.append(
            f'<rect x="{x_left:.2f}" y="{top}" width="{width:.2f}" height="{bottom - top}" '
            f'fill="#ff7f0e" fill-opacity="0.2" stroke="none"><title>{escape(label)}</title></rect>'
        )
    parts.extend(_polylines(frame, x, series))
    return _document(parts)


def histogram_svg(
    edges: list[tuple[float, float]],
    densities: list[float],
    title: str,
    x_label: str,
    y_label: str = "probability",
) -> str:
    """Bars of height density over [left, right) for each bin."""
    if not edges:
        raise DomainError("Histogram needs at least one bin")
    frame = _Frame(
        _finite_range([edges[0][0], edges[-1][1]]),
        (0.0, max(max(densities), 1e-12)),
    )
    parts = frame.axes(title, x_label, y_label)
    base = frame.y(0.0)
    for (left, right), density in zip(edges, densities):
        if density <= 0.0:
            continue
        top = frame.y(density)
        x = frame.x(left)
        w = max(frame.x(right) - x, 0.5)
        parts.append(
            f'<rect x="{x:.2f}" y="{top:.2f}" width="{w:.2f}" height="{base - top:.2f}" '
            f'fill="#1f77b4" stroke="none"/>'
        )
    if frame.x0 < 0.0 < frame.x1:
        zero = frame.x(0.0)
        parts.append(f'<line x1="{zero:.2f}" y1="{MARGIN}" x2="{zero:.2f}" y2="{base:.2f}" stroke="#888" stroke-dasharray="4 3"/>')
    return _document(parts)
