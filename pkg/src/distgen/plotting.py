"""Minimal static SVG line charts.

Only what the experiment figures need: a few labelled series over a shared
x axis (optionally logarithmic), axis ticks and a legend. Output is plain
text and deterministic for identical inputs.
"""

import math
from pathlib import Path
from xml.sax.saxutils import escape

__all__ = ["line_chart_svg", "write_line_chart"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_DASHES = ("", "6,3", "2,3", "8,3,2,3")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _fmt(v):
    return f"{v:.4g}"


def line_chart_svg(series, title="", xlabel="", ylabel="", log_x=False, width=640, height=420):
    """Render series as an SVG document.

    Parameters
    ----------
    series : list of (label, xs, ys)
        ``None`` or non-finite y values are skipped.
    log_x : bool, default=False
        Logarithmic x axis (all x must be positive).
    """
    points = [
        (label, [(float(x), float(y)) for x, y in zip(xs, ys) if y is not None and math.isfinite(float(y))])
        for label, xs, ys in series
    ]
    all_x = [x for _, pts in points for x, _ in pts]
    all_y = [y for _, pts in points for _, y in pts]
    if not all_x:
        all_x, all_y = [1.0, 2.0], [0.0, 1.0]
    tx = (lambda v: math.log10(v)) if log_x else (lambda v: v)
    x_lo, x_hi = tx(min(all_x)), tx(max(all_x))
    y_lo, y_hi = min(all_y + [0.0]), max(all_y)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    left, right, top, bottom = 70, 170, 40, 55
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (tx(v) - x_lo) / (x_hi - x_lo) * pw

    def sy(v):
        return top + (1 - (v - y_lo) / (y_hi - y_lo)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if log_x:
        xticks = sorted({x for x in all_x})
    else:
        xticks = _ticks(min(all_x), max(all_x))
    for t in xticks:
        x = sx(t)
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        y = sy(t)
        out.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for k, (label, pts) in enumerate(points):
        color = _COLORS[k % len(_COLORS)]
        dash = _DASHES[(k // len(_COLORS)) % len(_DASHES)] or _DASHES[k % len(_DASHES)]
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        if pts:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"{dash_attr}/>')
            for x, y in pts:
                out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        ly = top + 10 + 18 * k
        out.append(
            f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 36}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"{dash_attr}/>'
        )
        out.append(f'<text x="{left + pw + 42}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_chart(path, series, **kwargs):
    text = line_chart_svg(series, **kwargs)
    Path(path).write_text(text, encoding="utf-8")
    return text
