"""Minimal SVG line charts for hit-rate and PAI curves (no plotting dependency)."""

from __future__ import annotations

from typing import IO, Mapping, Sequence

import numpy as np

_COLORS = ("#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#555555")


def line_chart(fh: IO[str], x: Sequence[float], series: Mapping[str, Sequence[float]], *,
               title: str = "", xlabel: str = "", ylabel: str = "", width: int = 480, height: int = 320) -> None:
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    finite = [v[np.isfinite(v)] for v in ys.values()]
    lo = min((float(v.min()) for v in finite if v.size), default=0.0)
    hi = max((float(v.max()) for v in finite if v.size), default=1.0)
    lo = min(lo, 0.0)
    if hi <= lo:
        hi = lo + 1.0
    ml, mr, mt, mb = 56, 100, 28, 40
    pw, ph = width - ml - mr, height - mt - mb
    x0, x1 = float(x.min()), float(x.max()) if x.max() > x.min() else float(x.min()) + 1

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - lo) / (hi - lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
           f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-size="13">{title}</text>',
           f'<text x="{ml + pw / 2:.1f}" y="{height - 6}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 {mt + ph / 2:.1f})">{ylabel}</text>']
    for frac in np.linspace(0, 1, 5):
        yv = lo + frac * (hi - lo)
        out.append(f'<text x="{ml - 4}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
        xv = x0 + frac * (x1 - x0)
        out.append(f'<text x="{px(xv):.1f}" y="{mt + ph + 14}" text-anchor="middle">{xv:.3g}</text>')
    for n, (name, y) in enumerate(ys.items()):
        color = _COLORS[n % len(_COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{ml + pw + 8}" y="{mt + 14 + 16 * n}" fill="{color}">{name}</text>')
    out.append("</svg>")
    fh.write("\n".join(out) + "\n")
