"""Dependency-free SVG line plots built from metric CSVs."""

from __future__ import annotations

import csv
import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 480, 320
MARGIN = 56


def read_columns(path, x: str, y: str) -> tuple[list[float], list[float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: missing header row")
        for col in (x, y):
            if col not in reader.fieldnames:
                raise ValueError(f"{path}: no column {col!r}")
        rows = list(reader)
    return [float(r[x]) for r in rows], [float(r[y]) for r in rows]


def _span(vals):
    finite = [v for v in vals if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def svg_line_plot(xs, ys, xlabel: str, ylabel: str, title: str = "") -> str:
    """Polyline with one marker per finite point and labelled axes."""
    x0, x1 = _span(xs)
    y0, y1 = _span(ys)
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(v):
        return MARGIN + (v - x0) / (x1 - x0) * pw

    def py(v):
        return HEIGHT - MARGIN - (v - y0) / (y1 - y0) * ph

    pts = [(px(a), py(b)) for a, b in zip(xs, ys) if math.isfinite(a) and math.isfinite(b)]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line class="axis" x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line class="axis" x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
    ]
    for v, anchor_x in ((x0, MARGIN), (x1, WIDTH - MARGIN)):
        out.append(f'<text class="tick" x="{anchor_x:.2f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" font-size="11">{_fmt(v)}</text>')
    for v, anchor_y in ((y0, HEIGHT - MARGIN), (y1, MARGIN)):
        out.append(f'<text class="tick" x="{MARGIN - 6}" y="{anchor_y:.2f}" text-anchor="end" font-size="11">{_fmt(v)}</text>')
    out.append(
        f'<text class="xlabel" x="{WIDTH / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text class="ylabel" x="16" y="{HEIGHT / 2:.2f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {HEIGHT / 2:.2f})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(f'<text class="title" x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    if len(pts) > 1:
        path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="steelblue" stroke-width="1.5"/>')
    for a, b in pts:
        out.append(f'<circle class="point" cx="{a:.2f}" cy="{b:.2f}" r="3" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(path, out_path, x: str = "sparsity", y: str = "eval_acc", title: str = "") -> int:
    """Write an SVG of column ``y`` against ``x``; returns the number of points."""
    xs, ys = read_columns(path, x, y)
    with open(out_path, "w") as fh:
        fh.write(svg_line_plot(xs, ys, x, y, title))
    return len(xs)
