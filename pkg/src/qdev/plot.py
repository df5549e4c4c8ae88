"""Dependency-free, byte-deterministic SVG line plots."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Optional, Sequence

WIDTH, HEIGHT = 800, 600
MARGIN = 70
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def _ticks(lo, hi, log):
    if log:
        return [10.0**e for e in range(math.floor(lo), math.ceil(hi) + 1)]
    span = hi - lo
    step = 10 ** math.floor(math.log10(span)) if span > 0 else 1.0
    if span / step < 4:
        step /= 2
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def emit_plot(series: Sequence[Sequence[tuple]], style: Optional[dict] = None, path=None) -> str:
    """Render point series as an 800x600 SVG; write it to ``path`` when given.

    ``style`` keys: ``xlog``, ``ylog``, ``title``, ``xlabel``, ``ylabel``,
    ``labels`` (one per series) and ``guide`` (draw the least-squares
    power-law/linear fit of the first series as a dashed line).
    """
    style = dict(style or {})
    if not series or any(len(s) == 0 for s in series):
        raise ValueError("plot needs non-empty series")
    xlog, ylog = bool(style.get("xlog")), bool(style.get("ylog"))
    pts = []
    for s in series:
        cur = []
        for x, y in s:
            x, y = float(x), float(y)
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("series contains NaN or infinite values")
            if (xlog and x <= 0) or (ylog and y <= 0):
                raise ValueError("log axes need positive values")
            cur.append((math.log10(x) if xlog else x, math.log10(y) if ylog else y))
        pts.append(cur)

    xs = [p[0] for s in pts for p in s]
    ys = [p[1] for s in pts for p in s]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
           f'width="{WIDTH}" height="{HEIGHT}">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<g stroke="black" stroke-width="1">'
           f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}"/>'
           f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}"/></g>']
    out.append('<g font-family="sans-serif" font-size="12">')
    for t in _ticks(x0, x1, xlog):
        tv = math.log10(t) if xlog else t
        if x0 - 1e-12 <= tv <= x1 + 1e-12:
            out.append(f'<text x="{_fmt(sx(tv))}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1, ylog):
        tv = math.log10(t) if ylog else t
        if y0 - 1e-12 <= tv <= y1 + 1e-12:
            out.append(f'<text x="{MARGIN - 6}" y="{_fmt(sy(tv) + 4)}" text-anchor="end">{t:.4g}</text>')
    if style.get("title"):
        out.append(f'<text x="{WIDTH // 2}" y="{MARGIN // 2}" text-anchor="middle" font-size="16">{_esc(style["title"])}</text>')
    if style.get("xlabel"):
        out.append(f'<text x="{WIDTH // 2}" y="{HEIGHT - 20}" text-anchor="middle">{_esc(style["xlabel"])}</text>')
    if style.get("ylabel"):
        out.append(f'<text x="20" y="{HEIGHT // 2}" text-anchor="middle" '
                   f'transform="rotate(-90 20 {HEIGHT // 2})">{_esc(style["ylabel"])}</text>')
    out.append("</g>")

    labels = style.get("labels") or []
    for i, s in enumerate(pts):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in s)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for x, y in s:
            out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        if i < len(labels):
            out.append(f'<text x="{WIDTH - MARGIN - 150}" y="{MARGIN + 16 * (i + 1)}" fill="{color}" '
                       f'font-family="sans-serif" font-size="12">{_esc(labels[i])}</text>')

    if style.get("guide") and len(pts[0]) >= 2:
        slope, icpt = _fit(pts[0])
        gx0, gx1 = pts[0][0][0], pts[0][-1][0]
        out.append(f'<line class="guide" x1="{_fmt(sx(gx0))}" y1="{_fmt(sy(icpt + slope * gx0))}" '
                   f'x2="{_fmt(sx(gx1))}" y2="{_fmt(sy(icpt + slope * gx1))}" stroke="gray" '
                   f'stroke-dasharray="6,4"/>')
        out.append(f'<text x="{WIDTH - MARGIN - 150}" y="{HEIGHT - MARGIN - 10}" font-family="sans-serif" '
                   f'font-size="12" fill="gray">slope {slope:.4f}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    return text


def _fit(points):
    n = len(points)
    mx = sum(p[0] for p in points) / n
    my = sum(p[1] for p in points) / n
    sxx = sum((p[0] - mx) ** 2 for p in points)
    sxy = sum((p[0] - mx) * (p[1] - my) for p in points)
    slope = sxy / sxx if sxx > 0 else 0.0
    return slope, my - slope * mx


def _esc(s) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
