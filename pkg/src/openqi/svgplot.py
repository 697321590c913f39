"""Dependency-free log-log SVG rendering of CRLB curves."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 480
MARGIN = dict(left=80, right=220, top=30, bottom=60)
COLORS = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
DASHES = ("", "8,4", "2,3", "8,3,2,3")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _decades(lo: float, hi: float) -> list[float]:
    return [10.0**k for k in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)]


def render(curves: list[tuple[str, list[tuple[float, float]]]], title: str = "") -> str:
    """SVG text for labelled (N, CRLB) point lists; non-positive values are skipped."""
    if not curves:
        raise ValueError("nothing to plot")
    pts = [(n, y) for _, c in curves for n, y in c if n > 0 and y > 0 and math.isfinite(y)]
    if not pts:
        raise ValueError("no positive finite points to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo / 2, x_hi * 2
    if y_hi == y_lo:
        y_lo, y_hi = y_lo / 2, y_hi * 2
    lx0, lx1 = math.log10(x_lo) - 0.05, math.log10(x_hi) + 0.05
    ly0, ly1 = math.log10(y_lo) - 0.1, math.log10(y_hi) + 0.1

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (math.log10(x) - lx0) / (lx1 - lx0) * pw

    def py(y):
        return MARGIN["top"] + (ly1 - math.log10(y)) / (ly1 - ly0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle">{escape(title)}</text>')
    for d in _decades(10**lx0, 10**lx1):
        if 10**lx0 <= d <= 10**lx1:
            out.append(
                f'<text class="tick" x="{_fmt(px(d))}" y="{HEIGHT - MARGIN["bottom"] + 18}" '
                f'text-anchor="middle">{d:g}</text>'
            )
    for d in _decades(10**ly0, 10**ly1):
        if 10**ly0 <= d <= 10**ly1:
            out.append(
                f'<text class="tick" x="{MARGIN["left"] - 6}" y="{_fmt(py(d) + 4)}" '
                f'text-anchor="end">{d:g}</text>'
            )
    out.append(
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">N</text>'
    )
    out.append(
        f'<text x="20" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 20 {MARGIN["top"] + ph / 2:.1f})">CRLB of delta</text>'
    )

    # guides through the first point of the first curve
    first = next(((n, y) for _, c in curves for n, y in c if n > 0 and y > 0), pts[0])
    for slope, dash, name in ((-0.5, "4,4", "N^-1/2"), (-1.0, "1,3", "N^-1")):
        y0 = first[1] * (x_lo / first[0]) ** slope
        y1 = first[1] * (x_hi / first[0]) ** slope
        out.append(
            f'<line class="reference" x1="{_fmt(px(x_lo))}" y1="{_fmt(py(y0))}" '
            f'x2="{_fmt(px(x_hi))}" y2="{_fmt(py(y1))}" stroke="gray" '
            f'stroke-dasharray="{dash}"><title>{name}</title></line>'
        )

    legend_x = WIDTH - MARGIN["right"] + 12
    for i, (label, c) in enumerate(curves):
        color = COLORS[i % len(COLORS)]
        dash = DASHES[(i // len(COLORS)) % len(DASHES)]
        coords = " ".join(
            f"{_fmt(px(n))},{_fmt(py(y))}" for n, y in c if n > 0 and y > 0 and math.isfinite(y)
        )
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(
            f'<polyline class="curve" points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"{dash_attr}><title>{escape(label)}</title></polyline>'
        )
        ly = MARGIN["top"] + 10 + 16 * i
        out.append(
            f'<text class="legend" x="{legend_x + 24}" y="{ly + 4}" fill="{color}">'
            f"{escape(label)}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
