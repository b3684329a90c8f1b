"""A small self-contained SVG writer: axes, polylines, scatter points, legend."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _tick(v: float) -> str:
    return f"{v:.6g}"


class _Panel:
    def __init__(self, x0, y0, w, h, xs, ys):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        lo_x, hi_x = min(xs), max(xs)
        lo_y, hi_y = min(ys), max(ys)
        if hi_x == lo_x:
            lo_x, hi_x = lo_x - 0.5, hi_x + 0.5
        if hi_y == lo_y:
            pad = 0.5 if lo_y == 0 else abs(lo_y) * 1e-9
            lo_y, hi_y = lo_y - pad, hi_y + pad
        self.lo_x, self.hi_x, self.lo_y, self.hi_y = lo_x, hi_x, lo_y, hi_y

    def px(self, x):
        return self.x0 + (x - self.lo_x) / (self.hi_x - self.lo_x) * self.w

    def py(self, y):
        return self.y0 + self.h - (y - self.lo_y) / (self.hi_y - self.lo_y) * self.h

    def axes(self, title: str) -> list[str]:
        x0, y0, w, h = self.x0, self.y0, self.w, self.h
        return [
            f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(w)}" height="{_fmt(h)}" '
            'fill="none" stroke="#000" stroke-width="1"/>',
            f'<text x="{_fmt(x0)}" y="{_fmt(y0 - 6)}" font-size="12">{escape(title)}</text>',
            f'<text x="{_fmt(x0)}" y="{_fmt(y0 + h + 14)}" font-size="10">{_tick(self.lo_x)}</text>',
            f'<text x="{_fmt(x0 + w)}" y="{_fmt(y0 + h + 14)}" font-size="10" text-anchor="end">{_tick(self.hi_x)}</text>',
            f'<text x="{_fmt(x0 - 4)}" y="{_fmt(y0 + h)}" font-size="10" text-anchor="end">{_tick(self.lo_y)}</text>',
            f'<text x="{_fmt(x0 - 4)}" y="{_fmt(y0 + 10)}" font-size="10" text-anchor="end">{_tick(self.hi_y)}</text>',
        ]


def _document(width: int, height: int, body: list[str]) -> str:
    head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="#fff"/>\n')
    return head + "\n".join(body) + "\n</svg>\n"


def line_panels(panels: Sequence[tuple[str, Sequence[float], Sequence[Sequence[float]], Sequence[str]]],
                width: int = 720, panel_height: int = 160) -> str:
    """Stacked panels; each is (title, x values, list of y series, series labels)."""
    body = []
    margin_l, margin_t, gap = 80, 30, 40
    for i, (title, xs, series, labels) in enumerate(panels):
        ys_all = [y for s in series for y in s] or [0.0]
        panel = _Panel(margin_l, margin_t + i * (panel_height + gap), width - margin_l - 20,
                       panel_height, list(xs) or [0.0], ys_all)
        body += panel.axes(title)
        for j, (s, lab) in enumerate(zip(series, labels)):
            colour = PALETTE[j % len(PALETTE)]
            pts = " ".join(f"{_fmt(panel.px(x))},{_fmt(panel.py(y))}" for x, y in zip(xs, s))
            body.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1" points="{pts}"/>')
            body.append(f'<text x="{_fmt(panel.x0 + panel.w - 4)}" y="{_fmt(panel.y0 + 14 + 12 * j)}" '
                        f'font-size="10" text-anchor="end" fill="{colour}">{escape(lab)}</text>')
    height = margin_t + len(panels) * (panel_height + gap)
    return _document(width, height, body)


def scatter(title: str, groups: Sequence[tuple[str, Sequence[float], Sequence[float]]],
            size: int = 520) -> str:
    """One square panel of point clouds, one colour per group."""
    xs = [x for _, gx, _ in groups for x in gx] or [0.0]
    ys = [y for _, _, gy in groups for y in gy] or [0.0]
    panel = _Panel(70, 30, size - 90, size - 70, xs, ys)
    body = panel.axes(title)
    for j, (lab, gx, gy) in enumerate(groups):
        colour = PALETTE[j % len(PALETTE)]
        for x, y in zip(gx, gy):
            body.append(f'<circle cx="{_fmt(panel.px(x))}" cy="{_fmt(panel.py(y))}" r="0.8" fill="{colour}"/>')
        body.append(f'<text x="{_fmt(panel.x0 + panel.w - 4)}" y="{_fmt(panel.y0 + 14 + 12 * j)}" '
                    f'font-size="10" text-anchor="end" fill="{colour}">{escape(lab)}</text>')
    return _document(size, size, body)
