"""Minimal, dependency-free SVG 1.1 line plots with a log10 y axis.

Output is a pure function of the input: coordinates are printed with a
fixed number of decimals and nothing (dates, ids, randomness) varies between
runs, so the files can be diffed and golden-tested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]


@dataclass(frozen=True)
class Axes:
    xlabel: str = "k"
    ylabel: str = ""
    title: str = ""
    width: int = 640
    height: int = 420


_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 170, 40, 50


def _usable(series: Series):
    # a log axis cannot show zeros, negatives or non-finite values
    return [(float(a), float(b)) for a, b in zip(series.x, series.y)
            if math.isfinite(a) and math.isfinite(b) and b > 0]


def _f(v: float) -> str:
    return f"{v:.2f}"


def emit_svg(traces: Sequence[Series], axes: Axes = Axes()) -> str:
    """Render ``traces`` as one polyline each; legend follows input order.

    Points with a nonpositive or non-finite ``y`` are skipped.  A series with
    a single usable point is drawn as a circular marker.
    """
    pts = [_usable(s) for s in traces]
    if not traces or not any(pts):
        raise ValueError("nothing to plot: every trace is empty")

    xs = [p[0] for ps in pts for p in ps]
    ly = [math.log10(p[1]) for ps in pts for p in ps]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    d0, d1 = math.floor(min(ly)), math.ceil(max(ly))
    if d1 == d0:
        d1 = d0 + 1

    W, H = axes.width, axes.height
    pw, ph = W - _LEFT - _RIGHT, H - _TOP - _BOTTOM

    def px(x):
        return _LEFT + (x - x0) / (x1 - x0) * pw

    def py(v):
        return _TOP + (d1 - math.log10(v)) / (d1 - d0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
    ]
    if axes.title:
        out.append(f'<text x="{_f(_LEFT + pw / 2)}" y="20" text-anchor="middle" font-size="13">'
                   f'{escape(axes.title)}</text>')

    # decade grid lines and labels
    step = max(1, (d1 - d0 + 9) // 10)
    for d in range(d0, d1 + 1, step):
        y = _f(py(10.0 ** d))
        out.append(f'<line x1="{_LEFT}" y1="{y}" x2="{_LEFT + pw}" y2="{y}" stroke="#dddddd"/>')
        out.append(f'<text x="{_LEFT - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">1e{d}</text>')
    for i in range(6):
        xv = x0 + (x1 - x0) * i / 5
        x = _f(px(xv))
        out.append(f'<line x1="{x}" y1="{_TOP + ph}" x2="{x}" y2="{_TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{_TOP + ph + 16}" text-anchor="middle">{xv:.6g}</text>')
    out.append(f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{_f(_LEFT + pw / 2)}" y="{H - 12}" text-anchor="middle">{escape(axes.xlabel)}</text>')
    if axes.ylabel:
        cy = _f(_TOP + ph / 2)
        out.append(f'<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">'
                   f'{escape(axes.ylabel)}</text>')

    for i, (s, ps) in enumerate(zip(traces, pts)):
        color = PALETTE[i % len(PALETTE)]
        if len(ps) == 1:
            out.append(f'<circle cx="{_f(px(ps[0][0]))}" cy="{_f(py(ps[0][1]))}" r="3" fill="{color}"/>')
        elif ps:
            coords = " ".join(f"{_f(px(a))},{_f(py(b))}" for a, b in ps)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly_ = _TOP + 10 + 18 * i
        lx = _LEFT + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly_}" x2="{lx + 20}" y2="{ly_}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly_}" dominant-baseline="middle">{escape(s.label)}</text>')

    out.append("</svg>")
    return "\n".join(out) + "\n"
