"""Minimal deterministic SVG line charts, no plotting dependency.

Good enough for the three trajectory panels (torque, momentum, costate vs
time): framed axes, tick labels, one polyline per series, optional dashed
horizontal guide lines for bounds. Output is plain text with fixed float
formatting, so identical data produces identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

WIDTH, HEIGHT = 720, 300
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 16, 34, 40

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, n)
    return [float(v) for v in raw]


def line_chart(
    path: str | Path,
    t: np.ndarray,
    series: list[tuple[str, np.ndarray]],
    title: str,
    ylabel: str,
    guides: list[float] | None = None,
) -> None:
    """Write one framed line chart to `path`.

    Args:
        t: shared abscissa (seconds).
        series: (label, values) pairs; values aligned with t.
        guides: y-values drawn as dashed horizontal lines (e.g. bounds).
    """
    t = np.asarray(t, dtype=float)
    ys = [np.asarray(v, dtype=float) for _, v in series]
    if guides:
        ys = ys + [np.asarray(guides, dtype=float)]
    y_all = np.concatenate(ys)
    y_lo, y_hi = float(np.min(y_all)), float(np.max(y_all))
    if y_hi == y_lo:
        y_lo -= 1.0
        y_hi += 1.0
    pad = 0.06 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad
    t_lo, t_hi = float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0

    px_w = WIDTH - MARGIN_L - MARGIN_R
    px_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x: float) -> float:
        return MARGIN_L + (x - t_lo) / (t_hi - t_lo) * px_w

    def sy(y: float) -> float:
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * px_h

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">'
    )
    out.append(f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    out.append(
        f'<text x="{MARGIN_L}" y="18" font-size="13" font-weight="bold">{title}</text>'
    )
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{px_w}" height="{px_h}" '
        f'fill="none" stroke="#444" stroke-width="1"/>'
    )
    for xv in _ticks(t_lo, t_hi):
        X = _fmt(sx(xv))
        out.append(
            f'<line x1="{X}" y1="{_fmt(MARGIN_T + px_h)}" x2="{X}" '
            f'y2="{_fmt(MARGIN_T + px_h + 4)}" stroke="#444"/>'
        )
        out.append(
            f'<text x="{X}" y="{_fmt(MARGIN_T + px_h + 16)}" '
            f'text-anchor="middle">{xv:g}</text>'
        )
    for yv in _ticks(y_lo, y_hi):
        Y = _fmt(sy(yv))
        out.append(
            f'<line x1="{_fmt(MARGIN_L - 4)}" y1="{Y}" x2="{MARGIN_L}" y2="{Y}" stroke="#444"/>'
        )
        out.append(
            f'<text x="{_fmt(MARGIN_L - 7)}" y="{Y}" text-anchor="end" '
            f'dominant-baseline="middle">{yv:.4g}</text>'
        )
    out.append(
        f'<text x="{_fmt(WIDTH / 2)}" y="{HEIGHT - 6}" text-anchor="middle">t [s]</text>'
    )
    out.append(
        f'<text x="14" y="{_fmt(MARGIN_T + px_h / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 14 {_fmt(MARGIN_T + px_h / 2)})">{ylabel}</text>'
    )
    if guides:
        for g in guides:
            Y = _fmt(sy(g))
            out.append(
                f'<line x1="{MARGIN_L}" y1="{Y}" x2="{MARGIN_L + px_w}" y2="{Y}" '
                f'stroke="#999" stroke-dasharray="5,4" stroke-width="1"/>'
            )
    for idx, (label, vals) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(t, vals))
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        lx = MARGIN_L + px_w - 70
        ly = MARGIN_T + 14 + 14 * idx
        out.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{lx + 23}" y="{ly}">{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
