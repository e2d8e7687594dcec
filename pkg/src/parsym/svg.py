"""Minimal deterministic SVG writer: fixed 800x800 canvas, one ``<path>`` per layer, legend block."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

SIZE = 800
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass
class Layer:
    name: str
    polylines: list = field(default_factory=list)
    closed: bool = False
    width: float = 1.5
    markers: bool = False


class Figure:
    """Collects layers in world coordinates and maps them into the fixed viewport."""

    def __init__(self, title: str = "", equal_aspect: bool = True, xlabel: str = "", ylabel: str = ""):
        self.title = title
        self.equal_aspect = equal_aspect
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.layers: list[Layer] = []

    def add(self, name: str, polylines, *, closed: bool = False, width: float = 1.5, markers: bool = False) -> None:
        polys = [np.asarray(p, float).reshape(-1, 2) for p in polylines]
        self.layers.append(Layer(name, polys, closed, width, markers))

    def _bounds(self):
        pts = [p for layer in self.layers for p in layer.polylines if len(p)]
        if not pts:
            return 0.0, 1.0, 0.0, 1.0
        allp = np.vstack(pts)
        x0, y0 = allp.min(axis=0)
        x1, y1 = allp.max(axis=0)
        if x1 - x0 < 1e-12:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 - y0 < 1e-12:
            y0, y1 = y0 - 0.5, y1 + 0.5
        if self.equal_aspect:
            span = max(x1 - x0, y1 - y0)
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            x0, x1, y0, y1 = cx - span / 2, cx + span / 2, cy - span / 2, cy + span / 2
        return x0, x1, y0, y1

    def _path_data(self, layer: Layer, tx) -> str:
        parts = []
        for p in layer.polylines:
            if not len(p):
                continue
            q = tx(p)
            if layer.markers:
                for x, y in q:
                    parts.append(f"M{x - 3:.2f},{y:.2f}h6M{x:.2f},{y - 3:.2f}v6")
                continue
            seg = "M" + "L".join(f"{x:.2f},{y:.2f}" for x, y in q)
            parts.append(seg + ("Z" if layer.closed else ""))
        return "".join(parts) or "M0,0"

    def render(self) -> str:
        x0, x1, y0, y1 = self._bounds()
        inner = SIZE - 2 * MARGIN
        sx = inner / (x1 - x0)
        sy = inner / (y1 - y0)

        def tx(p):
            return np.column_stack([MARGIN + (p[:, 0] - x0) * sx, SIZE - MARGIN - (p[:, 1] - y0) * sy])

        out = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
            f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
        ]
        if self.title:
            out.append(f'<text x="{SIZE / 2}" y="24" text-anchor="middle" font-size="16">{escape(self.title)}</text>')
        if self.xlabel:
            out.append(f'<text x="{SIZE / 2}" y="{SIZE - 14}" text-anchor="middle" font-size="13">{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(
                f'<text x="16" y="{SIZE / 2}" text-anchor="middle" font-size="13" '
                f'transform="rotate(-90 16 {SIZE / 2})">{escape(self.ylabel)}</text>'
            )
        for k, layer in enumerate(self.layers):
            color = COLORS[k % len(COLORS)]
            out.append(
                f'<path id="layer-{k}" data-layer="{escape(layer.name)}" d="{self._path_data(layer, tx)}" '
                f'fill="none" stroke="{color}" stroke-width="{layer.width}"/>'
            )
        out.append('<g id="legend">')
        for k, layer in enumerate(self.layers):
            y = MARGIN + 18 * k
            color = COLORS[k % len(COLORS)]
            out.append(f'<rect x="{SIZE - 190}" y="{y - 9}" width="12" height="12" fill="{color}"/>')
            out.append(f'<text x="{SIZE - 172}" y="{y + 2}" font-size="12">{escape(layer.name)}</text>')
        out.append("</g>")
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.render())


def circle(center, r: float, n: int = 256) -> np.ndarray:
    t = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    return np.column_stack([center[0] + r * np.cos(t), center[1] + r * np.sin(t)])


def line_in_box(omega, m: float, box) -> np.ndarray:
    """Segment of ``{x . omega = m}`` centred on ``box = (x0, y0, x1, y1)``, half a diagonal each way."""
    w = np.asarray(omega, float)
    tau = np.array([-w[1], w[0]])
    x0, y0, x1, y1 = box
    half = 0.5 * math.hypot(x1 - x0, y1 - y0)
    mid = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])
    c = mid + (m - mid @ w) * w
    return np.array([c - half * tau, c + half * tau])
