"""Minimal SVG line plots rendered from a :class:`ResultTable`.

Only the table is read; nothing here computes physics.
"""

import math
from xml.sax.saxutils import escape

import numpy as np

from .results import format_value

WIDTH, HEIGHT = 720, 480
MARGIN = dict(left=80, right=170, top=40, bottom=60)
PALETTE = ("#1f4e79", "#2e8b57", "#d4a017", "#b22222", "#6a3d9a", "#ff7f0e", "#17becf", "#7f7f7f")


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, int(math.ceil((b - a) / 8)))
        return [float(e) for e in range(a, b + 1, step) if lo - 1e-9 <= e <= hi + 1e-9]
    span = hi - lo
    raw = span / 6 if span > 0 else 1.0
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _series(table, hint):
    x = table.column(hint.x)
    if hint.group is None:
        return [(name, x, table.column(name)) for name in hint.y]
    g = table.column(hint.group)
    out = []
    for key in dict.fromkeys(g.tolist()):
        mask = g == key
        for name in hint.y:
            label = f"{hint.group}={format_value(key)}" + (f" {name}" if len(hint.y) > 1 else "")
            out.append((label, x[mask], table.column(name)[mask]))
    return out


def render_svg(table):
    hint = table.plot
    if hint is None:
        raise ValueError("table carries no plot hint")
    series = _series(table, hint)

    def tx(v, log):
        v = np.asarray(v, dtype=float)
        if not log:
            return v
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(v > 0, np.log10(np.abs(v)), np.nan)

    xs = [tx(s[1], hint.logx) for s in series]
    ys = [tx(s[2], hint.logy) for s in series]
    allx = np.concatenate(xs)
    ally = np.concatenate(ys)
    allx, ally = allx[np.isfinite(allx)], ally[np.isfinite(ally)]
    x0, x1 = (float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0)
    y0, y1 = (float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if hint.title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(hint.title)}</text>')
    for t in _ticks(x0, x1, hint.logx):
        label = f"1e{int(t)}" if hint.logx else f"{t:.4g}"
        out.append(f'<line x1="{px(t):.2f}" y1="{MARGIN["top"] + ph}" x2="{px(t):.2f}" y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{label}</text>')
    for t in _ticks(y0, y1, hint.logy):
        label = f"1e{int(t)}" if hint.logy else f"{t:.4g}"
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{py(t):.2f}" x2="{MARGIN["left"]}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{label}</text>')
    xunit = table.units[table.columns.index(hint.x)]
    out.append(
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">'
        f"{escape(hint.x)}{' [' + escape(xunit) + ']' if xunit else ''}</text>"
    )
    for i, ((label, _, _), x, y) in enumerate(zip(series, xs, ys)):
        color = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN["top"] + 10 + 18 * i
        lx = WIDTH - MARGIN["right"] + 10
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
