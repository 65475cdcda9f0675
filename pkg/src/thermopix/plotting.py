"""Minimal deterministic SVG line/scatter plots.

Every series is written as a ``<polyline>`` or a group of ``<circle>``s carrying
``data-series`` and a ``data-points`` attribute with the raw values, so tests
can compare plotted numbers structurally instead of by pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    style: str = "line"  # line | points


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def render_svg(
    series,
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = False,
    logy: bool = False,
    width: int = 640,
    height: int = 400,
    max_points: int = 4000,
) -> str:
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    tx = np.log10 if logx else (lambda v: np.asarray(v, dtype=float))
    ty = np.log10 if logy else (lambda v: np.asarray(v, dtype=float))

    xs = [tx(np.asarray(s.x, dtype=float)) for s in series]
    ys = [ty(np.asarray(s.y, dtype=float)) for s in series]
    allx = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    ally = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    x0, x1 = float(np.nanmin(allx)), float(np.nanmax(allx))
    y0, y1 = float(np.nanmin(ally)), float(np.nanmax(ally))
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        label = _fmt(10**v) if logx else _fmt(v)
        out.append(f'<line x1="{px(v):.2f}" y1="{mt + ph}" x2="{px(v):.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(v):.2f}" y="{mt + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{label}</text>')
    for v in _ticks(y0, y1):
        label = _fmt(10**v) if logy else _fmt(v)
        out.append(f'<line x1="{ml - 5}" y1="{py(v):.2f}" x2="{ml}" y2="{py(v):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py(v) + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="11">{label}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="13">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 16 {mt + ph / 2})">{escape(ylabel)}</text>'
    )

    for i, (s, sx, sy) in enumerate(zip(series, xs, ys)):
        color = PALETTE[i % len(PALETTE)]
        raw = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(np.asarray(s.x, float), np.asarray(s.y, float)))
        step = max(1, len(sx) // max_points)
        if s.style == "points":
            out.append(f"<g data-series={quoteattr(s.label)} data-points={quoteattr(raw)} fill=\"{color}\">")
            for a, b in zip(sx[::step], sy[::step]):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3"/>')
            out.append("</g>")
        else:
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(sx[::step], sy[::step]))
            out.append(
                f"<polyline data-series={quoteattr(s.label)} data-points={quoteattr(raw)} "
                f'points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        out.append(
            f'<text x="{ml + pw - 8}" y="{mt + 16 + 15 * i}" text-anchor="end" font-family="sans-serif" '
            f'font-size="12" fill="{color}">{escape(s.label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save_svg(path, series, **kw) -> Path:
    path = Path(path)
    path.write_text(render_svg(series, **kw))
    return path


def read_series(svg_text: str) -> dict[str, np.ndarray]:
    """Recover plotted ``(x, y)`` values keyed by series label."""
    import xml.etree.ElementTree as ET

    root = ET.fromstring(svg_text)
    out = {}
    for el in root.iter():
        label = el.get("data-series")
        if label is None:
            continue
        raw = el.get("data-points", "").split()
        out[label] = np.array([[float(v) for v in p.split(",")] for p in raw]) if raw else np.empty((0, 2))
    return out
