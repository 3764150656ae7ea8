"""Top-down (w_x, w_y) scatter of reference and estimated positions as SVG.

Points are written in data units (metres) inside groups carrying the
data-to-canvas transform, so the file can be read back numerically.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

from .trajectory import TrajectorySample

WIDTH, HEIGHT = 640, 560
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 30, 40, 60
REFERENCE_COLOR = "#d62728"
ESTIMATE_COLOR = "#2ca02c"


def _nice_step(span, target=6):
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 2.5, 5, 10):
        if raw <= m * mag:
            return m * mag
    return 10 * mag


def _fmt(v):
    s = f"{v:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def render_svg(reference: Sequence[TrajectorySample], estimate: Sequence[TrajectorySample],
               title: str = "") -> str:
    xs = [0.0] + [s.position[0] for s in reference] + [s.position[0] for s in estimate]
    ys = [0.0] + [s.position[1] for s in reference] + [s.position[1] for s in estimate]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0, 1.0) * 1.1
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    scale = min(plot_w, plot_h) / span
    # canvas = (MARGIN + plot/2) + scale * (data - centre), y flipped
    tx = MARGIN_LEFT + plot_w / 2 - scale * cx
    ty = MARGIN_TOP + plot_h / 2 + scale * cy
    xlo, xhi = cx - plot_w / 2 / scale, cx + plot_w / 2 / scale
    ylo, yhi = cy - plot_h / 2 / scale, cy + plot_h / 2 / scale

    def canvas(x, y):
        return tx + scale * x, ty - scale * y

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>',
    ]
    step = _nice_step(min(xhi - xlo, yhi - ylo))
    out.append('<g id="ticks" stroke="#cccccc" stroke-width="0.5">')
    labels = []
    v = math.ceil(xlo / step) * step
    while v <= xhi:
        px, _ = canvas(v, 0)
        out.append(f'<line x1="{_fmt(px)}" y1="{MARGIN_TOP}" x2="{_fmt(px)}" y2="{MARGIN_TOP + plot_h}"/>')
        labels.append(f'<text x="{_fmt(px)}" y="{MARGIN_TOP + plot_h + 16}" '
                      f'text-anchor="middle">{_fmt(v)}</text>')
        v += step
    v = math.ceil(ylo / step) * step
    while v <= yhi:
        _, py = canvas(0, v)
        out.append(f'<line x1="{MARGIN_LEFT}" y1="{_fmt(py)}" x2="{MARGIN_LEFT + plot_w}" y2="{_fmt(py)}"/>')
        labels.append(f'<text x="{MARGIN_LEFT - 6}" y="{_fmt(py + 4)}" text-anchor="end">{_fmt(v)}</text>')
        v += step
    out.append("</g>")
    out.extend(labels)
    out.append(f'<text x="{MARGIN_LEFT + plot_w / 2}" y="{HEIGHT - 20}" text-anchor="middle">w_x [m]</text>')
    out.append(f'<text x="18" y="{MARGIN_TOP + plot_h / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {MARGIN_TOP + plot_h / 2})">w_y [m]</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="14">{title}</text>')

    transform = f'matrix({_fmt(scale)} 0 0 {_fmt(-scale)} {_fmt(tx)} {_fmt(ty)})'
    r = 2.5 / scale
    for gid, color, stream in (("reference", REFERENCE_COLOR, reference),
                               ("estimate", ESTIMATE_COLOR, estimate)):
        out.append(f'<g id="{gid}" transform="{transform}" fill="{color}" stroke="none">')
        for s in stream:
            out.append(f'<circle cx="{float(s.position[0])!r}" cy="{float(s.position[1])!r}" r="{_fmt(r)}"/>')
        out.append("</g>")

    ox, oy = canvas(0, 0)
    out.append(f'<g id="origin"><rect x="{_fmt(ox - 5)}" y="{_fmt(oy - 5)}" width="10" height="10" '
               f'fill="#8c564b"/><text x="{_fmt(ox + 8)}" y="{_fmt(oy - 8)}">pallet</text></g>')

    lx, ly = MARGIN_LEFT + 10, MARGIN_TOP + 16
    out.append('<g id="legend">')
    for i, (name, color) in enumerate((("ground truth", REFERENCE_COLOR), ("estimate", ESTIMATE_COLOR))):
        out.append(f'<circle cx="{lx + 5}" cy="{ly + 18 * i - 4}" r="4" fill="{color}"/>')
        out.append(f'<text x="{lx + 14}" y="{ly + 18 * i}">{name}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_horizontal(reference: Sequence[TrajectorySample], estimate: Sequence[TrajectorySample],
                    out_file, title: str = "") -> Path:
    if not reference and not estimate:
        raise ValueError("nothing to plot")
    path = Path(out_file)
    path.write_text(render_svg(reference, estimate, title))
    return path
