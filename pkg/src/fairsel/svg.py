"""Tiny standalone SVG line charts. No plotting dependency, no timestamps,
so output is diffable and reproducible byte for byte."""

from __future__ import annotations

import math

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 36, 46
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-9 * span:
        out.append(round(t, 10))
        t += step
    return out


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def line_chart(series, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Render series = [(label, xs, ys), ...] as a standalone SVG string.

    NaN values break the polyline instead of being drawn.
    """
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
           if not (math.isnan(x) or math.isnan(y))]
    if pts:
        xlo, xhi = min(p[0] for p in pts), max(p[0] for p in pts)
        ylo, yhi = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        xlo = ylo = 0.0
        xhi = yhi = 1.0
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return MARGIN_T + ph - (y - ylo) / (yhi - ylo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="#333"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" '
                     f'font-size="14">{title}</text>')
    for t in _ticks(xlo, xhi):
        x = sx(t)
        parts.append(f'<line x1="{x:.1f}" y1="{MARGIN_T + ph}" x2="{x:.1f}" '
                     f'y2="{MARGIN_T + ph + 5}" stroke="#333"/>')
        parts.append(f'<text x="{x:.1f}" y="{MARGIN_T + ph + 18}" '
                     f'text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        y = sy(t)
        parts.append(f'<line x1="{MARGIN_L - 5}" y1="{y:.1f}" x2="{MARGIN_L}" '
                     f'y2="{y:.1f}" stroke="#333"/>')
        parts.append(f'<line x1="{MARGIN_L}" y1="{y:.1f}" x2="{MARGIN_L + pw}" '
                     f'y2="{y:.1f}" stroke="#eee"/>')
        parts.append(f'<text x="{MARGIN_L - 8}" y="{y + 4:.1f}" '
                     f'text-anchor="end">{_fmt(t)}</text>')
    if xlabel:
        parts.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 8}" '
                     f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="16" y="{MARGIN_T + ph / 2:.1f}" text-anchor="middle" '
                     f'transform="rotate(-90 16 {MARGIN_T + ph / 2:.1f})">{ylabel}</text>')

    for idx, (label, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        run: list = []
        segs = []
        for x, y in zip(xs, ys):
            if math.isnan(x) or math.isnan(y):
                if len(run) > 1:
                    segs.append(run)
                run = []
            else:
                run.append((sx(x), sy(y)))
        if len(run) > 1:
            segs.append(run)
        elif len(run) == 1:
            parts.append(f'<circle cx="{run[0][0]:.1f}" cy="{run[0][1]:.1f}" '
                         f'r="2.5" fill="{color}"/>')
        for seg in segs:
            d = " ".join(f"{px:.1f},{py:.1f}" for px, py in seg)
            parts.append(f'<polyline points="{d}" fill="none" stroke="{color}" '
                         f'stroke-width="1.5"/>')
        ly = MARGIN_T + 14 + 16 * idx
        parts.append(f'<line x1="{MARGIN_L + pw - 110}" y1="{ly - 4}" '
                     f'x2="{MARGIN_L + pw - 86}" y2="{ly - 4}" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{MARGIN_L + pw - 80}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
