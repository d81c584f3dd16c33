"""Plain CSV tables and hand-written SVG charts.

The SVG output is deliberately minimal (axes, ticks, polylines, a legend and
an optional heatmap) so no plotting library is needed.
"""

from __future__ import annotations

import csv
import io
import math
from html import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v):
    return f"{v:.3g}"


class _Frame:
    def __init__(self, xs, ys, width, height, logx, logy):
        self.logx, self.logy = logx, logy
        fx = np.log10 if logx else (lambda a: a)
        fy = np.log10 if logy else (lambda a: a)
        self.fx, self.fy = fx, fy
        X = fx(np.asarray(xs, float))
        Y = fy(np.asarray(ys, float))
        X, Y = X[np.isfinite(X)], Y[np.isfinite(Y)]
        self.x0, self.x1 = float(X.min()), float(X.max())
        self.y0, self.y1 = float(Y.min()), float(Y.max())
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 0.5, self.y1 + 0.5
        pad = 0.05 * (self.y1 - self.y0)
        self.y0, self.y1 = self.y0 - pad, self.y1 + pad
        self.left, self.right, self.top, self.bottom = 70, width - 20, 40, height - 50

    def px(self, x):
        return self.left + (self.fx(x) - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y):
        return self.bottom - (self.fy(y) - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)


def svg_line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
                   width: int = 640, height: int = 400, logx: bool = False, logy: bool = False) -> str:
    """Line chart; ``series`` maps a label to ``(x, y)`` arrays."""
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    fr = _Frame(xs, ys, width, height, logx, logy)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{fr.left}" y1="{fr.bottom}" x2="{fr.right}" y2="{fr.bottom}" stroke="black"/>',
           f'<line x1="{fr.left}" y1="{fr.top}" x2="{fr.left}" y2="{fr.bottom}" stroke="black"/>']
    for v in _ticks(fr.x0, fr.x1):
        real = 10**v if logx else v
        x = fr.px(real)
        out.append(f'<line x1="{x:.1f}" y1="{fr.bottom}" x2="{x:.1f}" y2="{fr.bottom + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{fr.bottom + 18}" text-anchor="middle">{_fmt(real)}</text>')
    for v in _ticks(fr.y0, fr.y1):
        real = 10**v if logy else v
        y = fr.py(real)
        out.append(f'<line x1="{fr.left - 5}" y1="{y:.1f}" x2="{fr.left}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{fr.left - 8}" y="{y + 4:.1f}" text-anchor="end">{_fmt(real)}</text>')
    out.append(f'<text x="{(fr.left + fr.right) / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(fr.top + fr.bottom) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(fr.top + fr.bottom) / 2})">{escape(ylabel)}</text>')
    for k, (label, (x, y)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{fr.px(a):.2f},{fr.py(b):.2f}" for a, b in zip(x, y)
                       if np.isfinite(fr.fx(a)) and np.isfinite(fr.fy(b)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{pts}"/>')
        ly = fr.top + 16 * k + 4
        out.append(f'<line x1="{fr.right - 130}" y1="{ly}" x2="{fr.right - 110}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{fr.right - 105}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_heatmap(values, row_labels, title: str = "", xlabel: str = "", ylabel: str = "",
                width: int = 640, height: int = 400) -> str:
    """Heatmap of a 2-D array; rows are drawn bottom to top, columns left to right.

    Colour intensity is the value divided by the row maximum.
    """
    values = np.asarray(values, dtype=float)
    rows, cols = values.shape
    left, right, top, bottom = 70, width - 20, 40, height - 50
    cw = (right - left) / cols
    rh = (bottom - top) / rows
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for r in range(rows):
        peak = values[r].max() or 1.0
        y = bottom - (r + 1) * rh
        for c in range(cols):
            level = int(round(255 * (1 - values[r, c] / peak)))
            out.append(f'<rect x="{left + c * cw:.2f}" y="{y:.2f}" width="{cw + 0.3:.2f}" '
                       f'height="{rh + 0.3:.2f}" fill="rgb({level},{level},255)"/>')
        out.append(f'<text x="{left - 6}" y="{y + rh / 2 + 4:.1f}" text-anchor="end">{escape(str(row_labels[r]))}</text>')
    out.append(f'<text x="{left}" y="{bottom + 18}" text-anchor="middle">0</text>')
    out.append(f'<text x="{right}" y="{bottom + 18}" text-anchor="middle">1</text>')
    out.append(f'<text x="{(left + right) / 2}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(top + bottom) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(top + bottom) / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
