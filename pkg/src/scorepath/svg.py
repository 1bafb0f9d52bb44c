"""Tiny deterministic SVG line-plot writer."""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    x = start
    while x <= hi + 1e-12 * span:
        out.append(round(x, 12))
        x += step
    return out


class SvgPlot:
    def __init__(self, xlim, ylim, width=640, height=480, title="", xlabel="", ylabel=""):
        self.xlim, self.ylim = (float(xlim[0]), float(xlim[1])), (float(ylim[0]), float(ylim[1]))
        self.w, self.h = width, height
        self.m = (60, 20, 40, 50)  # left, right, top, bottom
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.items = []
        self.legend = []

    def _px(self, x, y):
        l, r, t, b = self.m
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        px = l + (x - x0) / (x1 - x0) * (self.w - l - r)
        py = self.h - b - (y - y0) / (y1 - y0) * (self.h - t - b)
        return px, py

    def line(self, xs, ys, color="#000", width=1.0, dash=None, label=None):
        xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
        ok = np.isfinite(xs) & np.isfinite(ys)
        pts = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (self._px(x, y) for x, y in zip(xs[ok], ys[ok])))
        if not pts:
            return
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{extra} points="{pts}"/>')
        if label and label not in [lab for lab, _ in self.legend]:
            self.legend.append((label, color))

    def cross(self, x, y, color="#000", size=5):
        px, py = self._px(x, y)
        a, b, c, d = _fmt(px - size), _fmt(px + size), _fmt(py - size), _fmt(py + size)
        self.items.append(f'<path stroke="{color}" stroke-width="2" d="M{a},{c}L{b},{d}M{a},{d}L{b},{c}"/>')

    def _axes(self):
        l, r, t, b = self.m
        out = [f'<rect x="{l}" y="{t}" width="{self.w - l - r}" height="{self.h - t - b}" fill="none" stroke="#444"/>']
        for x in _nice_ticks(*self.xlim):
            px, _ = self._px(x, self.ylim[0])
            out.append(f'<text x="{_fmt(px)}" y="{self.h - b + 15}" font-size="10" text-anchor="middle">{x:g}</text>')
        for y in _nice_ticks(*self.ylim):
            _, py = self._px(self.xlim[0], y)
            out.append(f'<text x="{l - 5}" y="{_fmt(py + 3)}" font-size="10" text-anchor="end">{y:g}</text>')
        out.append(f'<text x="{self.w / 2}" y="{self.h - 10}" font-size="12" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="15" y="{self.h / 2}" font-size="12" text-anchor="middle" '
                   f'transform="rotate(-90 15 {self.h / 2})">{escape(self.ylabel)}</text>')
        out.append(f'<text x="{self.w / 2}" y="{t - 10}" font-size="13" text-anchor="middle">{escape(self.title)}</text>')
        for i, (label, color) in enumerate(self.legend):
            y = t + 15 + 15 * i
            out.append(f'<line x1="{l + 10}" y1="{y}" x2="{l + 30}" y2="{y}" stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{l + 35}" y="{y + 4}" font-size="10">{escape(label)}</text>')
        return out

    def render(self) -> str:
        l, r, t, b = self.m
        clip = (f'<clipPath id="plot"><rect x="{l}" y="{t}" width="{self.w - l - r}" '
                f'height="{self.h - t - b}"/></clipPath>')
        body = "\n".join(self.items)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">\n<defs>{clip}</defs>\n'
                f'<rect width="100%" height="100%" fill="white"/>\n'
                f'<g clip-path="url(#plot)">\n{body}\n</g>\n' + "\n".join(self._axes()) + "\n</svg>\n")

    def save(self, path) -> None:
        Path(path).write_text(self.render())
