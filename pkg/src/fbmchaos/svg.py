"""Minimal self-contained SVG line and stem plots (800x500 viewBox)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 500
_MARGIN = dict(left=80, right=30, top=50, bottom=60)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    style: str = "line"  # line | stem | hline | dashed
    color: str | None = None


@dataclass
class Figure:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list[Series] = field(default_factory=list)

    def add(self, x, y, label="", style="line", color=None) -> "Figure":
        self.series.append(Series(np.asarray(x, float), np.asarray(y, float), label, style, color))
        return self

    def render(self) -> str:
        return render(self)


def _nice_ticks(lo: float, hi: float, count: int = 6):
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def render(fig: Figure) -> str:
    xs = [s.x for s in fig.series if s.style != "hline" and len(s.x)]
    ys = [s.y for s in fig.series if len(s.y)]
    x_lo = min((float(np.min(x)) for x in xs), default=0.0)
    x_hi = max((float(np.max(x)) for x in xs), default=1.0)
    y_lo = min((float(np.min(y)) for y in ys), default=0.0)
    y_hi = max((float(np.max(y)) for y in ys), default=1.0)
    if any(s.style == "stem" for s in fig.series):
        y_lo, y_hi = min(y_lo, 0.0), max(y_hi, 0.0)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    pad = 0.05 * (y_hi - y_lo) if y_hi > y_lo else 1.0
    y_lo, y_hi = y_lo - pad, y_hi + pad
    left, right, top, bottom = _MARGIN["left"], WIDTH - _MARGIN["right"], _MARGIN["top"], HEIGHT - _MARGIN["bottom"]

    def px(x):
        return left + (np.asarray(x) - x_lo) / (x_hi - x_lo) * (right - left)

    def py(y):
        return bottom - (np.asarray(y) - y_lo) / (y_hi - y_lo) * (bottom - top)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    for t in _nice_ticks(x_lo, x_hi):
        x = px(t)
        out.append(f'<line x1="{x:.2f}" y1="{top}" x2="{x:.2f}" y2="{bottom}" stroke="#eeeeee"/>')
        out.append(f'<text x="{x:.2f}" y="{bottom + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _nice_ticks(y_lo, y_hi):
        y = py(t)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{right}" y2="{y:.2f}" stroke="#eeeeee"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" fill="none" stroke="black"/>')
    if y_lo < 0 < y_hi:
        y0 = py(0.0)
        out.append(f'<line x1="{left}" y1="{y0:.2f}" x2="{right}" y2="{y0:.2f}" stroke="#999999"/>')
    for i, s in enumerate(fig.series):
        color = s.color or PALETTE[i % len(PALETTE)]
        if s.style == "stem":
            base = py(0.0)
            for x, y in zip(px(s.x), py(s.y)):
                out.append(f'<line x1="{x:.2f}" y1="{base:.2f}" x2="{x:.2f}" y2="{y:.2f}" stroke="{color}"/>')
                out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="{color}"/>')
        elif s.style == "hline":
            for y in py(s.y):
                out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{right}" y2="{y:.2f}" stroke="{color}" '
                           f'stroke-dasharray="6 4"/>')
        else:
            pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px(s.x), py(s.y)))
            dash = ' stroke-dasharray="6 4"' if s.style == "dashed" else ""
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
    labelled = [(i, s) for i, s in enumerate(fig.series) if s.label]
    for row, (i, s) in enumerate(labelled):
        color = s.color or PALETTE[i % len(PALETTE)]
        y = top + 16 + 16 * row
        out.append(f'<line x1="{right - 170}" y1="{y - 4}" x2="{right - 150}" y2="{y - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{right - 145}" y="{y}">{escape(s.label)}</text>')
    if fig.title:
        out.append(f'<text x="{WIDTH / 2}" y="28" text-anchor="middle" font-size="15">{escape(fig.title)}</text>')
    if fig.xlabel:
        out.append(f'<text x="{(left + right) / 2}" y="{HEIGHT - 18}" text-anchor="middle">{escape(fig.xlabel)}</text>')
    if fig.ylabel:
        out.append(f'<text x="18" y="{(top + bottom) / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {(top + bottom) / 2})">{escape(fig.ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
