"""Minimal deterministic SVG line plots (fixed 800x600 viewport).

Plots are written as paths and axes with no external renderer so that
byte-identical reruns can be golden-file tested.
"""

from __future__ import annotations

import math

WIDTH, HEIGHT = 800, 600
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 80, 30, 50, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x):
    return format(float(x), ".6g")


def _ticks(lo, hi, n=6):
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        return [lo]
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return ticks


def _transform(lo, hi, pix_lo, pix_hi, logscale):
    if logscale:
        lo, hi = math.log10(lo), math.log10(hi)

    def to_pix(v):
        v = math.log10(v) if logscale else v
        if hi == lo:
            return 0.5 * (pix_lo + pix_hi)
        return pix_lo + (v - lo) / (hi - lo) * (pix_hi - pix_lo)

    return to_pix


def line_plot(path, series, title="", xlabel="", ylabel="", logx=False):
    """Write one SVG with polyline series: [(xs, ys, label), ...]."""
    xs_all = [x for xs, _, _ in series for x in xs]
    ys_all = [y for _, ys, _ in series for y in ys if math.isfinite(y)]
    if not xs_all or not ys_all:
        xs_all, ys_all = [0.0, 1.0], [0.0, 1.0]
    xlo, xhi = min(xs_all), max(xs_all)
    ylo, yhi = min(ys_all), max(ys_all)
    if ylo == yhi:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    tx = _transform(xlo, xhi, MARGIN_L, WIDTH - MARGIN_R, logx)
    ty = _transform(ylo, yhi, HEIGHT - MARGIN_B, MARGIN_T, False)

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">')
    out.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    out.append(
        f'<text x="{WIDTH//2}" y="28" text-anchor="middle" '
        f'font-family="monospace" font-size="16">{title}</text>')
    # axes box
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{WIDTH-MARGIN_L-MARGIN_R}"'
        f' height="{HEIGHT-MARGIN_T-MARGIN_B}" fill="none" stroke="black"/>')
    if logx:
        lo_e = math.ceil(math.log10(xlo) - 1e-12)
        hi_e = math.floor(math.log10(xhi) + 1e-12)
        xticks = [10.0**e for e in range(lo_e, hi_e + 1)] or [xlo, xhi]
    else:
        xticks = _ticks(xlo, xhi)
    for t in xticks:
        if t < xlo or t > xhi:
            continue
        px = tx(t)
        out.append(f'<line x1="{_fmt(px)}" y1="{HEIGHT-MARGIN_B}" '
                   f'x2="{_fmt(px)}" y2="{HEIGHT-MARGIN_B+5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{HEIGHT-MARGIN_B+20}" '
                   f'text-anchor="middle" font-family="monospace" '
                   f'font-size="11">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        py = ty(t)
        out.append(f'<line x1="{MARGIN_L-5}" y1="{_fmt(py)}" '
                   f'x2="{MARGIN_L}" y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_L-8}" y="{_fmt(py)}" text-anchor="end" '
                   f'font-family="monospace" font-size="11" '
                   f'dominant-baseline="middle">{_fmt(t)}</text>')
    out.append(f'<text x="{WIDTH//2}" y="{HEIGHT-15}" text-anchor="middle" '
               f'font-family="monospace" font-size="13">{xlabel}</text>')
    out.append(f'<text x="20" y="{HEIGHT//2}" text-anchor="middle" '
               f'font-family="monospace" font-size="13" '
               f'transform="rotate(-90 20 {HEIGHT//2})">{ylabel}</text>')
    for i, (xs, ys, label) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(
            f"{_fmt(tx(x))},{_fmt(ty(y))}"
            for x, y in zip(xs, ys) if math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"'
                   f' points="{pts}"/>')
        ly = MARGIN_T + 16 + 16 * i
        out.append(f'<line x1="{WIDTH-180}" y1="{ly}" x2="{WIDTH-150}" '
                   f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{WIDTH-144}" y="{ly+4}" font-family="monospace" '
                   f'font-size="12">{label}</text>')
    out.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")
