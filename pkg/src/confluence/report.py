"""Deterministic CSV, self-contained SVG log-log plots and rate fits."""

import csv
import io
import math

import mpmath
import numpy as np


def fmt(x, digits=17):
    """Stable text for a real number (mpmath values keep their tiny exponents)."""
    if x is None:
        return ""
    if isinstance(x, (mpmath.mpf, mpmath.mpc)):
        if isinstance(x, mpmath.mpc):
            x = x.real
        if mpmath.isnan(x):
            return "nan"
        return mpmath.nstr(x, digits, strip_zeros=False, min_fixed=-3, max_fixed=3)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def re_im(z):
    if isinstance(z, mpmath.mpc):
        return fmt(z.real), fmt(z.imag)
    z = complex(z)
    return fmt(z.real), fmt(z.imag)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if len(r) != len(header):
            raise ValueError("row length does not match header")
        w.writerow(r)
    text = buf.getvalue()
    with open(path, "w", newline="") as f:
        f.write(text)
    return text


def fit_slope(x, y):
    """Least-squares slope of log y against log x over the smallest half of x.

    Returns ``(slope, rms_residual, points_used)``; nan when fewer than two
    usable (positive, finite) points remain.
    """
    pts = sorted((float(a), float(b)) for a, b in zip(x, y))
    pts = pts[: max(2, math.ceil(len(pts) / 2))]
    pts = [(a, b) for a, b in pts if a > 0 and b > 0 and math.isfinite(b)]
    if len(pts) < 2:
        return float("nan"), float("nan"), len(pts)
    lx = np.log([a for a, _ in pts])
    ly = np.log([b for _, b in pts])
    A = np.vstack([lx, np.ones_like(lx)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (slope * lx + icpt)
    return float(slope), float(np.sqrt(np.mean(res ** 2))), len(pts)


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_loglog(series, title="", xlabel="eps", ylabel="", width=640, height=420):
    """Log-log line plot as SVG text; ``series`` is a list of (label, xs, ys)."""
    clean = []
    for label, xs, ys in series:
        pts = [(float(a), float(b)) for a, b in zip(xs, ys)
               if float(a) > 0 and float(b) > 0 and math.isfinite(float(b))]
        if pts:
            clean.append((label, pts))
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>']
    if not clean:
        out.append(f'<text x="{width / 2:.1f}" y="{height / 2:.1f}" text-anchor="middle">no positive data</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"
    lx = [math.log10(a) for _, pts in clean for a, _ in pts]
    ly = [math.log10(b) for _, pts in clean for _, b in pts]
    x0, x1 = math.floor(min(lx)), math.ceil(max(lx))
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    ystep = max(1, math.ceil((y1 - y0) / 10))
    for e in range(x0, x1 + 1):
        out.append(f'<line x1="{px(e):.1f}" y1="{mt}" x2="{px(e):.1f}" y2="{mt + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{px(e):.1f}" y="{mt + ph + 16}" text-anchor="middle">1e{e}</text>')
    for e in range(y0, y1 + 1, ystep):
        out.append(f'<line x1="{ml}" y1="{py(e):.1f}" x2="{ml + pw}" y2="{py(e):.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 6}" y="{py(e) + 4:.1f}" text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{_esc(ylabel)}</text>')
    for k, (label, pts) in enumerate(clean):
        col = _COLORS[k % len(_COLORS)]
        coords = " ".join(f"{px(math.log10(a)):.1f},{py(math.log10(b)):.1f}" for a, b in sorted(pts))
        out.append(f'<polyline points="{coords}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for a, b in pts:
            out.append(f'<circle cx="{px(math.log10(a)):.1f}" cy="{py(math.log10(b)):.1f}" r="3" fill="{col}"/>')
        ly_ = mt + 14 + 18 * k
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly_ - 4}" x2="{ml + pw + 30}" y2="{ly_ - 4}" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly_}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
