"""Deterministic JSON/CSV/SVG emission for experiment reports.

Every writer is a pure function of its inputs: keys are sorted, floats use
the shortest round-tripping representation, and no timestamps or machine
identifiers are embedded, so re-running a command reproduces its output
files byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

SCHEMA = "insulab-v1"

SWEEP_CSV_HEADER = "m,lambda_m,vanish_measure,min_trace"


def to_jsonable(obj):
    """Recursively convert dataclasses/arrays/scalars to JSON-ready values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: to_jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


def write_json(path, payload: dict) -> None:
    doc = {"schema": SCHEMA}
    doc.update(to_jsonable(payload))
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def write_csv(path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def line_plot_svg(
    series: list[tuple[str, list, list]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    marker_x: float | None = None,
    width: int = 640,
    height: int = 420,
) -> str:
    """A minimal polyline plot: axes, ticks, labeled series, optional marker.

    `series` is a list of (label, xs, ys).  Output is a standalone SVG
    document with deterministic formatting.
    """
    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b")
    margin_l, margin_r, margin_t, margin_b = 60, 20, 30, 45
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b

    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if marker_x is not None:
        xs_all = xs_all + [marker_x]
    x_lo, x_hi = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    y_lo, y_hi = (min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0)
    if x_hi - x_lo <= 0:
        x_hi = x_lo + 1.0
    if y_hi - y_lo <= 0:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x):
        return margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y):
        return margin_t + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" '
        f'font-size="14">{title}</text>',
    ]
    axis = (
        f'<line x1="{margin_l}" y1="{margin_t + plot_h}" '
        f'x2="{margin_l + plot_w}" y2="{margin_t + plot_h}" stroke="black"/>'
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" '
        f'y2="{margin_t + plot_h}" stroke="black"/>'
    )
    parts.append(axis)
    for tx in _ticks(x_lo, x_hi):
        parts.append(
            f'<line x1="{px(tx):.2f}" y1="{margin_t + plot_h}" '
            f'x2="{px(tx):.2f}" y2="{margin_t + plot_h + 5}" stroke="black"/>'
            f'<text x="{px(tx):.2f}" y="{margin_t + plot_h + 18}" '
            f'text-anchor="middle" font-size="10">{tx:.4g}</text>'
        )
    for ty in _ticks(y_lo, y_hi):
        parts.append(
            f'<line x1="{margin_l - 5}" y1="{py(ty):.2f}" x2="{margin_l}" '
            f'y2="{py(ty):.2f}" stroke="black"/>'
            f'<text x="{margin_l - 8}" y="{py(ty):.2f}" text-anchor="end" '
            f'font-size="10" dominant-baseline="middle">{ty:.4g}</text>'
        )
    parts.append(
        f'<text x="{margin_l + plot_w / 2:.1f}" y="{height - 8}" '
        f'text-anchor="middle" font-size="12">{xlabel}</text>'
        f'<text x="14" y="{margin_t + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-size="12" transform="rotate(-90 14 {margin_t + plot_h / 2:.1f})"'
        f'>{ylabel}</text>'
    )
    if marker_x is not None:
        parts.append(
            f'<line x1="{px(marker_x):.2f}" y1="{margin_t}" '
            f'x2="{px(marker_x):.2f}" y2="{margin_t + plot_h}" '
            f'stroke="#555555" stroke-dasharray="4,3"/>'
        )
    for k, (label, xs, ys) in enumerate(series):
        color = palette[k % len(palette)]
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{points}"/>'
        )
        parts.append(
            f'<text x="{margin_l + plot_w - 6}" y="{margin_t + 14 + 14 * k}" '
            f'text-anchor="end" font-size="11" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def write_svg(path, svg: str) -> None:
    Path(path).write_text(svg + ("\n" if not svg.endswith("\n") else ""))
