"""Static SVG line charts for rejection-rate (power) curves."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Tuple
from xml.sax.saxutils import escape, quoteattr

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=64, right=170, top=28, bottom=54)

# black circles, dotted green, dashed red, then a few extras
STYLES = [
    ("#000000", "none"),
    ("#1a9641", "2,3"),
    ("#d7191c", "8,4"),
    ("#2b83ba", "4,2,1,2"),
    ("#7b3294", "1,2"),
    ("#e66101", "6,2"),
]

Curve = Tuple[str, Sequence[Tuple[float, float]]]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_power_chart(curves: Sequence[Curve], path, *, title: str = "",
                       x_label: str = "true effect γ", y_label: str = "rejection rate",
                       reference_levels: Sequence[float] = (0.05, 1.0)) -> str:
    """Write a standalone SVG with one polyline per curve and return its text.

    ``curves`` is a list of ``(label, [(x, y), ...])`` with ``x`` ascending.
    Horizontal gray reference lines are drawn at ``reference_levels``.
    """
    if not curves:
        raise ValueError("need at least one curve")
    for label, pts in curves:
        xs = [p[0] for p in pts]
        if not pts:
            raise ValueError(f"curve {label!r} has no points")
        if any(b < a for a, b in zip(xs, xs[1:])):
            raise ValueError(f"curve {label!r} x values are not ascending")

    all_x = [p[0] for _, pts in curves for p in pts]
    all_y = [p[1] for _, pts in curves for p in pts] + list(reference_levels)
    x0, x1 = min(all_x), max(all_x)
    if x1 == x0:
        x1 = x0 + 1.0
    y0, y1 = min(0.0, min(all_y)), max(1.0, max(all_y))
    y1 += 0.05 * (y1 - y0)

    left, top = MARGIN["left"], MARGIN["top"]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="Helvetica, Arial, sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>')

    bottom = top + ph
    out.append(f'<path class="axis" d="M{left},{top} V{bottom:.2f} H{left + pw:.2f}" '
               'fill="none" stroke="#333333"/>')
    for k in range(6):
        xv = x0 + k * (x1 - x0) / 5
        out.append(f'<text class="tick" x="{_fmt(sx(xv))}" y="{bottom + 16:.2f}" '
                   f'text-anchor="middle">{xv:g}</text>')
    for k in range(6):
        yv = y0 + k * (y1 - y0) / 5
        out.append(f'<text class="tick" x="{left - 6}" y="{_fmt(sy(yv) + 4)}" '
                   f'text-anchor="end">{yv:.2f}</text>')
    out.append(f'<text class="axis-label" x="{left + pw / 2:.1f}" y="{HEIGHT - 12}" '
               f'text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text class="axis-label" x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(y_label)}</text>')

    for level in reference_levels:
        out.append(f'<line class="reference" x1="{left}" y1="{_fmt(sy(level))}" '
                   f'x2="{_fmt(left + pw)}" y2="{_fmt(sy(level))}" stroke="#999999"/>')

    for i, (label, pts) in enumerate(curves):
        color, dash = STYLES[i % len(STYLES)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        dash_attr = "" if dash == "none" else f' stroke-dasharray="{dash}"'
        out.append(f'<polyline class="curve" data-label={quoteattr(label)} points="{coords}" '
                   f'fill="none" stroke="{color}" stroke-width="1.6"{dash_attr}/>')
        if i % len(STYLES) == 0:
            out.extend(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2.5" fill="{color}"/>'
                       for x, y in pts)

    lx = left + pw + 16
    out.append('<g class="legend">')
    for i, (label, _) in enumerate(curves):
        color, dash = STYLES[i % len(STYLES)]
        ly = top + 12 + 18 * i
        dash_attr = "" if dash == "none" else f' stroke-dasharray="{dash}"'
        out.append(f'<g class="legend-entry"><path d="M{lx},{ly} h24" stroke="{color}" '
                   f'stroke-width="1.6"{dash_attr}/><text x="{lx + 30}" y="{ly + 4}">{escape(label)}</text></g>')
    out.append("</g>")
    out.append("</svg>")

    text = "\n".join(out) + "\n"
    Path(path).write_text(text, encoding="utf-8")
    return text
