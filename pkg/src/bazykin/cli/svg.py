"""Tiny SVG line/scatter plot writer: axes, ticks, optional log axes, legend.

Output depends only on the data, so reruns give identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2", "#7f7f7f", "#000000")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    style: str = "line"  # "line", "dashed" or "scatter"


@dataclass
class Figure:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = False
    logy: bool = False
    width: int = 640
    height: int = 440
    ylim: tuple | None = None
    series: list = field(default_factory=list)

    def add(self, label, x, y, style="line") -> "Figure":
        self.series.append(Series(label, np.asarray(x, float), np.asarray(y, float), style))
        return self

    def render(self) -> str:
        return render(self)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(1, n - 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    k = 0
    while first + k * step <= hi + 1e-9 * step:
        ticks.append(first + k * step)
        k += 1
    return ticks


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    a = abs(v)
    if a >= 1e4 or a < 1e-3:
        return f"{v:.3g}"
    return f"{v:.6g}"


def _span(vals, log):
    v = vals[np.isfinite(vals)]
    if log:
        v = v[v > 0]
    if v.size == 0:
        return (0.0, 1.0) if not log else (1.0, 10.0)
    lo, hi = float(v.min()), float(v.max())
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        pad = 0.5 if lo == 0 else 0.05 * abs(lo)
        lo, hi = lo - pad, hi + pad
    return lo, hi


def render(fig: Figure) -> str:
    W, H = fig.width, fig.height
    ml, mr, mt, mb = 70, 20, 36, 50
    pw, ph = W - ml - mr, H - mt - mb
    xs = np.concatenate([s.x for s in fig.series]) if fig.series else np.array([0.0, 1.0])
    ys = np.concatenate([s.y for s in fig.series]) if fig.series else np.array([0.0, 1.0])
    x0, x1 = _span(xs, fig.logx)
    y0, y1 = _span(ys, fig.logy)
    if fig.ylim is not None:
        y0, y1 = (np.log10(v) if fig.logy else v for v in fig.ylim)

    def tx(v):
        v = np.log10(v) if fig.logx else v
        return ml + (v - x0) / (x1 - x0) * pw

    def ty(v):
        v = np.log10(v) if fig.logy else v
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if fig.title:
        out.append(f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(fig.title)}</text>')

    def ticks(lo, hi, log):
        if not log:
            return [(t, _tick_label(t)) for t in _nice_ticks(lo, hi)]
        dec = range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1)
        if len(dec) >= 2:
            return [(10.0**k, f"1e{k}") for k in dec]
        return [(10.0**t, _tick_label(10.0**t)) for t in _nice_ticks(lo, hi)]

    for v, lab in ticks(x0, x1, fig.logx):
        px = _fmt(float(tx(v)))
        out.append(f'<line x1="{px}" y1="{mt + ph}" x2="{px}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px}" y="{mt + ph + 18}" text-anchor="middle">{lab}</text>')
    for v, lab in ticks(y0, y1, fig.logy):
        py = _fmt(float(ty(v)))
        out.append(f'<line x1="{ml - 5}" y1="{py}" x2="{ml}" y2="{py}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py}" text-anchor="end" dominant-baseline="middle">{lab}</text>')
    if fig.xlabel:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">{escape(fig.xlabel)}</text>')
    if fig.ylabel:
        out.append(f'<text transform="translate(16,{mt + ph / 2:.1f}) rotate(-90)" '
                   f'text-anchor="middle">{escape(fig.ylabel)}</text>')

    out.append(f'<clipPath id="plot"><rect x="{ml}" y="{mt}" width="{pw}" height="{ph}"/></clipPath>')
    for i, s in enumerate(fig.series):
        col = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(s.x) & np.isfinite(s.y)
        if fig.logx:
            ok &= s.x > 0
        if fig.logy:
            ok &= s.y > 0
        if s.style == "scatter":
            for a, b in zip(s.x[ok], s.y[ok]):
                out.append(f'<circle cx="{_fmt(tx(a))}" cy="{_fmt(ty(b))}" r="2.5" fill="{col}" clip-path="url(#plot)"/>')
            continue
        dash = ' stroke-dasharray="6,4"' if s.style == "dashed" else ""
        # break the polyline at missing values
        runs, cur = [], []
        for a, b, good in zip(s.x, s.y, ok):
            if good:
                cur.append(f"{_fmt(tx(a))},{_fmt(ty(b))}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for r in runs:
            out.append(f'<polyline points="{" ".join(r)}" fill="none" stroke="{col}" stroke-width="1.5"{dash} '
                       'clip-path="url(#plot)"/>')

    labelled = [(i, s) for i, s in enumerate(fig.series) if s.label]
    if labelled:
        out.append(f'<rect x="{ml + pw - 156}" y="{mt + 2}" width="152" height="{16 * len(labelled) + 4}" '
                   'fill="white" fill-opacity="0.85"/>')
    for row, (i, s) in enumerate(labelled):
        col = PALETTE[i % len(PALETTE)]
        y = mt + 14 + 16 * row
        x = ml + pw - 150
        if s.style == "scatter":
            out.append(f'<circle cx="{x + 10}" cy="{y - 4}" r="3" fill="{col}"/>')
        else:
            dash = ' stroke-dasharray="6,4"' if s.style == "dashed" else ""
            out.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 20}" y2="{y - 4}" stroke="{col}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{x + 26}" y="{y}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
