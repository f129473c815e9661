"""Minimal SVG line plots (polylines with a framed axis box)."""
from __future__ import annotations

from typing import Sequence

import numpy as np

W, H, PAD = 640, 400, 56
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _num(x: float) -> str:
    return f"{x:.6g}"


def line_plot(series: Sequence[tuple[np.ndarray, np.ndarray, str]], title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    xs = [np.asarray(s[0], dtype=float) for s in series]
    ys = [np.asarray(s[1], dtype=float) for s in series]
    finite = [y[np.isfinite(y)] for y in ys]
    x0 = min(float(x.min()) for x in xs)
    x1 = max(float(x.max()) for x in xs)
    y0 = min((float(y.min()) for y in finite if y.size), default=0.0)
    y1 = max((float(y.max()) for y in finite if y.size), default=1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx = (W - 2 * PAD) / (x1 - x0)
    sy = (H - 2 * PAD) / (y1 - y0)

    def px(x):
        return PAD + (x - x0) * sx

    def py(y):
        return H - PAD - (y - y0) * sy

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="black"/>',
        f'<text x="{W / 2}" y="{PAD / 2}" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {H / 2})">{ylabel}</text>',
    ]
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{px(v):.2f}" y="{H - PAD + 16}" text-anchor="{anchor}" font-size="11">{_num(v)}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{PAD - 4}" y="{py(v) + 4:.2f}" text-anchor="end" font-size="11">{_num(v)}</text>')
    if y0 < 0 < y1:
        out.append(f'<line x1="{PAD}" y1="{py(0):.2f}" x2="{W - PAD}" y2="{py(0):.2f}" stroke="#bbb"/>')
    for k, (x, y, label) in enumerate(zip(xs, ys, (s[2] for s in series))):
        ok = np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        c = COLORS[k % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{W - PAD + 4}" y="{PAD + 14 * (k + 1)}" font-size="11" fill="{c}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
