"""Tiny dependency-free log-log SVG plots for the experiment reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

__all__ = ["Series", "RefSlope", "loglog_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_WIDTH, _HEIGHT = 640, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 30, 50


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = field(default=False)


@dataclass(frozen=True)
class RefSlope:
    """Dashed guide line through (anchor_x, anchor_y) with the given log-log slope."""

    slope: float
    anchor_x: float
    anchor_y: float
    label: str


def _decades(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def loglog_svg(
    path,
    series: Sequence[Series],
    ref_slopes: Sequence[RefSlope] = (),
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
) -> None:
    """Write a log-log plot with decade ticks and optional reference slopes."""
    pts = [(x, y) for s in series for x, y in zip(s.x, s.y) if x > 0 and y > 0]
    if not pts:
        raise ValueError("nothing to plot: no positive data points")
    xs, ys = zip(*pts)
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_lo == x_hi:
        x_lo, x_hi = x_lo / 2.0, x_hi * 2.0
    if y_lo == y_hi:
        y_lo, y_hi = y_lo / 2.0, y_hi * 2.0
    lx_lo, lx_hi = math.log10(x_lo), math.log10(x_hi)
    ly_lo, ly_hi = math.log10(y_lo), math.log10(y_hi)
    pad_x = 0.05 * (lx_hi - lx_lo)
    pad_y = 0.05 * (ly_hi - ly_lo)
    lx_lo, lx_hi = lx_lo - pad_x, lx_hi + pad_x
    ly_lo, ly_hi = ly_lo - pad_y, ly_hi + pad_y

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(x: float) -> float:
        return _MARGIN_L + (math.log10(x) - lx_lo) / (lx_hi - lx_lo) * plot_w

    def py(y: float) -> float:
        return _MARGIN_T + (ly_hi - math.log10(y)) / (ly_hi - ly_lo) * plot_h

    out: list[str] = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="monospace" font-size="12">'
    )
    out.append(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>')
    out.append(
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>'
    )
    if title:
        out.append(
            f'<text x="{_WIDTH / 2:.1f}" y="{_MARGIN_T - 10}" text-anchor="middle">{title}</text>'
        )
    for dec in _decades(x_lo, x_hi):
        x = 10.0**dec
        if not x_lo <= x <= x_hi:
            continue
        out.append(
            f'<line x1="{px(x):.1f}" y1="{_MARGIN_T}" x2="{px(x):.1f}" '
            f'y2="{_MARGIN_T + plot_h}" stroke="#dddddd"/>'
        )
        out.append(
            f'<text x="{px(x):.1f}" y="{_MARGIN_T + plot_h + 18}" text-anchor="middle">'
            f"1e{dec}</text>"
        )
    for dec in _decades(y_lo, y_hi):
        y = 10.0**dec
        if not y_lo <= y <= y_hi:
            continue
        out.append(
            f'<line x1="{_MARGIN_L}" y1="{py(y):.1f}" x2="{_MARGIN_L + plot_w}" '
            f'y2="{py(y):.1f}" stroke="#dddddd"/>'
        )
        out.append(
            f'<text x="{_MARGIN_L - 6}" y="{py(y) + 4:.1f}" text-anchor="end">1e{dec}</text>'
        )
    if xlabel:
        out.append(
            f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_HEIGHT - 12}" '
            f'text-anchor="middle">{xlabel}</text>'
        )
    if ylabel:
        out.append(
            f'<text x="16" y="{_MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {_MARGIN_T + plot_h / 2:.1f})">{ylabel}</text>'
        )
    legend_y = _MARGIN_T + 16
    for i, s in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        coords = " ".join(
            f"{px(x):.2f},{py(y):.2f}" for x, y in zip(s.x, s.y) if x > 0 and y > 0
        )
        if coords:
            out.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>'
            )
        out.append(
            f'<line x1="{_MARGIN_L + plot_w - 150}" y1="{legend_y}" '
            f'x2="{_MARGIN_L + plot_w - 120}" y2="{legend_y}" stroke="{color}" stroke-width="1.5"{dash}/>'
        )
        out.append(f'<text x="{_MARGIN_L + plot_w - 114}" y="{legend_y + 4}">{s.label}</text>')
        legend_y += 16
    for ref in ref_slopes:
        x0 = 10.0 ** (lx_lo + 0.02 * (lx_hi - lx_lo))
        x1 = 10.0 ** (lx_hi - 0.02 * (lx_hi - lx_lo))
        y0 = ref.anchor_y * (x0 / ref.anchor_x) ** ref.slope
        y1 = ref.anchor_y * (x1 / ref.anchor_x) ** ref.slope
        out.append(
            f'<line x1="{px(x0):.1f}" y1="{py(max(y0, 10.0**ly_lo)):.1f}" '
            f'x2="{px(x1):.1f}" y2="{py(max(y1, 10.0**ly_lo)):.1f}" '
            'stroke="#555555" stroke-dasharray="3 5"/>'
        )
        out.append(
            f'<text x="{px(x1) - 4:.1f}" y="{py(max(y1, 10.0**ly_lo)) - 6:.1f}" '
            f'text-anchor="end" fill="#555555">{ref.label}</text>'
        )
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
