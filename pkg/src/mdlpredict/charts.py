"""Minimal deterministic SVG line charts.

Renders cumulative-loss trajectories with an optional horizontal bound
line.  Output depends only on the input data: fixed canvas, fixed
palette, fixed number formatting, no timestamps, so identical inputs
yield byte-identical files.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

_WIDTH, _HEIGHT = 760, 440
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 16, 36, 44

_PALETTE = ("#1f6fb2", "#d95f02", "#1b9e77", "#7570b3",
            "#e7298a", "#66a61e", "#a6761d", "#666666")


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _nice_step(span: float) -> float:
    raw = span / 5.0
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0):
        if raw <= mult * mag:
            return mult * mag
    return 10.0 * mag


def _ticks(lo: float, hi: float) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = _nice_step(hi - lo)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def render_line_chart(
    series: Sequence[tuple[str, np.ndarray]],
    *,
    title: str,
    bound: float | None = None,
    x_label: str = "step t",
    y_label: str = "cumulative loss",
) -> str:
    """SVG text for overlaid line series sharing one x axis of 1..len."""
    if not series:
        raise ValueError("need at least one series to plot")
    x_hi = max(len(ys) for _, ys in series)
    y_values = np.concatenate([np.asarray(ys, dtype=float) for _, ys in series])
    y_values = y_values[np.isfinite(y_values)]
    if y_values.size == 0:
        raise ValueError("no finite values to plot")
    y_lo = min(0.0, float(y_values.min()))
    y_hi = float(y_values.max())
    if bound is not None and math.isfinite(bound):
        y_hi = max(y_hi, bound)
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    y_hi += 0.05 * (y_hi - y_lo)

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(t: float) -> float:
        return _MARGIN_L + plot_w * (t - 1.0) / max(x_hi - 1.0, 1.0)

    def py(v: float) -> float:
        return _MARGIN_T + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH // 2}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]

    axis_color = "#333333"
    for tick in _ticks(y_lo, y_hi):
        y = py(tick)
        parts.append(f'<line x1="{_MARGIN_L}" y1="{_fmt(y)}" '
                     f'x2="{_WIDTH - _MARGIN_R}" y2="{_fmt(y)}" '
                     f'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{_MARGIN_L - 6}" y="{_fmt(y + 4)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11" fill="{axis_color}">{_fmt(tick)}</text>')
    for tick in _ticks(1.0, float(x_hi)):
        if tick < 1.0:
            continue
        x = px(tick)
        parts.append(f'<text x="{_fmt(x)}" y="{_HEIGHT - _MARGIN_B + 16}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11" fill="{axis_color}">{_fmt(tick)}</text>')

    parts.append(f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" '
                 f'x2="{_MARGIN_L}" y2="{_HEIGHT - _MARGIN_B}" '
                 f'stroke="{axis_color}" stroke-width="1"/>')
    parts.append(f'<line x1="{_MARGIN_L}" y1="{_HEIGHT - _MARGIN_B}" '
                 f'x2="{_WIDTH - _MARGIN_R}" y2="{_HEIGHT - _MARGIN_B}" '
                 f'stroke="{axis_color}" stroke-width="1"/>')
    parts.append(f'<text x="{_MARGIN_L + plot_w // 2}" y="{_HEIGHT - 8}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">{x_label}</text>')
    parts.append(f'<text x="16" y="{_MARGIN_T + plot_h // 2}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {_MARGIN_T + plot_h // 2})">'
                 f'{y_label}</text>')

    for i, (_, ys) in enumerate(series):
        ys = np.asarray(ys, dtype=float)
        pts = " ".join(f"{_fmt(px(t + 1))},{_fmt(py(v))}"
                       for t, v in enumerate(ys) if math.isfinite(v))
        if not pts:
            continue
        color = _PALETTE[i % len(_PALETTE)]
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.2" '
                     f'stroke-opacity="0.75"/>')

    if bound is not None and math.isfinite(bound):
        y = py(bound)
        parts.append(f'<line x1="{_MARGIN_L}" y1="{_fmt(y)}" '
                     f'x2="{_WIDTH - _MARGIN_R}" y2="{_fmt(y)}" '
                     f'stroke="#c0392b" stroke-width="1.5" '
                     f'stroke-dasharray="7,4"/>')
        parts.append(f'<text x="{_WIDTH - _MARGIN_R - 4}" y="{_fmt(y - 6)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11" fill="#c0392b">bound = {_fmt(bound)}</text>')

    if len(series) <= 6:
        for i, (label, _) in enumerate(series):
            color = _PALETTE[i % len(_PALETTE)]
            y = _MARGIN_T + 14 + 16 * i
            parts.append(f'<line x1="{_MARGIN_L + 8}" y1="{y}" '
                         f'x2="{_MARGIN_L + 30}" y2="{y}" '
                         f'stroke="{color}" stroke-width="2"/>')
            parts.append(f'<text x="{_MARGIN_L + 36}" y="{y + 4}" '
                         f'font-family="sans-serif" font-size="11">{label}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
