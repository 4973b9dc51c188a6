"""Minimal SVG rendering: 3-D paths, time series, line fits and heatmaps.

Everything is written with :mod:`xml.etree.ElementTree`, so the output is
well-formed XML with no plotting dependency.
"""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET

import numpy as np

WIDTH, HEIGHT, MARGIN = 640, 480, 48
COLORS = ("#1f77b4", "#d62728", "#7b3294", "#2ca02c")
MAX_POINTS = 4000


def _thin(*arrays, max_points=MAX_POINTS):
    n = len(arrays[0])
    if n <= max_points:
        return arrays
    idx = np.unique(np.linspace(0, n - 1, max_points).astype(int))
    return tuple(np.asarray(a)[idx] for a in arrays)


def _scale(values, lo, hi):
    values = np.asarray(values, dtype=float)
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return np.full(values.shape, 0.5 * (lo + hi)), (0.0, 1.0)
    vmin, vmax = float(finite.min()), float(finite.max())
    if vmax - vmin < 1e-12:
        vmin, vmax = vmin - 0.5, vmax + 0.5
    return lo + (values - vmin) / (vmax - vmin) * (hi - lo), (vmin, vmax)


def _svg(title):
    root = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        width=str(WIDTH),
        height=str(HEIGHT),
        viewBox=f"0 0 {WIDTH} {HEIGHT}",
    )
    ET.SubElement(root, "rect", width=str(WIDTH), height=str(HEIGHT), fill="white")
    t = ET.SubElement(root, "text", x=str(WIDTH // 2), y="24", attrib={"text-anchor": "middle", "font-size": "15"})
    t.text = title
    return root


def _text(root, x, y, s, anchor="start", size=11):
    t = ET.SubElement(root, "text", x=f"{x:.1f}", y=f"{y:.1f}",
                      attrib={"text-anchor": anchor, "font-size": str(size)})
    t.text = s


def _polyline(root, xs, ys, color, width=1.0):
    ok = np.isfinite(xs) & np.isfinite(ys)
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs[ok], ys[ok]))
    if pts:
        ET.SubElement(root, "polyline", points=pts, fill="none", stroke=color,
                      attrib={"stroke-width": f"{width:g}"})


def _axes(root, xr, yr, xlabel, ylabel):
    x0, x1, y0, y1 = MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN
    ET.SubElement(root, "rect", x=str(x0), y=str(y1), width=str(x1 - x0), height=str(y0 - y1),
                  fill="none", stroke="black")
    _text(root, x0, y0 + 16, f"{xr[0]:.3g}", "start")
    _text(root, x1, y0 + 16, f"{xr[1]:.3g}", "end")
    _text(root, x0 - 4, y0, f"{yr[0]:.3g}", "end")
    _text(root, x0 - 4, y1 + 10, f"{yr[1]:.3g}", "end")
    _text(root, 0.5 * (x0 + x1), y0 + 32, xlabel, "middle", 12)
    _text(root, 12, 0.5 * (y0 + y1), ylabel, "start", 12)


def _write(root, fp):
    ET.ElementTree(root).write(fp, encoding="utf-8", xml_declaration=True)


def isometric(states):
    """Project ``(x, y, z)`` rows to the plane with a fixed isometric view."""
    s = np.asarray(states, dtype=float)
    c = math.cos(math.pi / 6)
    u = c * (s[:, 0] - s[:, 1])
    v = s[:, 2] + 0.5 * (s[:, 0] + s[:, 1])
    return u, v


def path3d_svg(states, fp, title="trajectory"):
    """Isometric 3-D path of a trajectory with a projected axis triad."""
    (states,) = _thin(np.asarray(states, dtype=float))
    u, v = isometric(states)
    root = _svg(title)
    px, _ = _scale(u, MARGIN, WIDTH - MARGIN)
    py, _ = _scale(v, HEIGHT - MARGIN, MARGIN)
    _polyline(root, px, py, COLORS[0], 0.8)
    ox, oy = MARGIN + 10, HEIGHT - MARGIN - 10
    for name, vec in (("x", (1, 0, 0)), ("y", (0, 1, 0)), ("z", (0, 0, 1))):
        du, dv = isometric(np.array([vec], dtype=float))
        ex, ey = ox + 30 * du[0], oy - 30 * dv[0]
        ET.SubElement(root, "line", x1=str(ox), y1=str(oy), x2=f"{ex:.1f}", y2=f"{ey:.1f}", stroke="gray")
        _text(root, ex, ey, name, "middle")
    _write(root, fp)


def timeseries_svg(times, series: dict, fp, title="time series", xlabel="t"):
    """Overlay of several series against ``times`` on shared axes."""
    names = list(series)
    arrays = _thin(np.asarray(times, dtype=float), *[np.asarray(series[k], dtype=float) for k in names])
    t, cols = arrays[0], arrays[1:]
    root = _svg(title)
    px, xr = _scale(t, MARGIN, WIDTH - MARGIN)
    stacked = np.concatenate(cols) if cols else np.zeros(1)
    _, yr = _scale(stacked, 0, 1)
    for i, (name, col) in enumerate(zip(names, cols)):
        py = HEIGHT - MARGIN - (col - yr[0]) / (yr[1] - yr[0]) * (HEIGHT - 2 * MARGIN)
        _polyline(root, px, py, COLORS[i % len(COLORS)])
        _text(root, WIDTH - MARGIN - 4, MARGIN + 14 * (i + 1), name, "end")
    _axes(root, xr, yr, xlabel, "")
    _write(root, fp)


def fit_svg(times, values, slope, intercept, fp, title="log distance"):
    """Series with a fitted line ``intercept + slope * t``."""
    t, y = (np.asarray(a, dtype=float) for a in _thin(times, values))
    line = intercept + slope * t
    timeseries_svg(t, {"log distance": y, f"fit, slope {slope:.4g}": line}, fp, title)


def heatmap_svg(x_grid, y_grid, values, fp, title="heatmap", xlabel="y0", ylabel="z0"):
    """Cells coloured by ``values[i, j]`` at ``(x_grid[i], y_grid[j])``; nan cells grey."""
    values = np.asarray(values, dtype=float)
    nx, ny = values.shape
    root = _svg(title)
    finite = values[np.isfinite(values)]
    vmin, vmax = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = vmax - vmin if vmax > vmin else 1.0
    w = (WIDTH - 2 * MARGIN) / nx
    h = (HEIGHT - 2 * MARGIN) / ny
    for i in range(nx):
        for j in range(ny):
            v = values[i, j]
            if np.isfinite(v):
                f = (v - vmin) / span
                fill = f"rgb({int(255 * f)},{int(80 + 100 * (1 - abs(2 * f - 1)))},{int(255 * (1 - f))})"
            else:
                fill = "#bbbbbb"
            ET.SubElement(root, "rect", x=f"{MARGIN + i * w:.2f}", y=f"{HEIGHT - MARGIN - (j + 1) * h:.2f}",
                          width=f"{w:.2f}", height=f"{h:.2f}", fill=fill)
    _axes(root, (float(x_grid[0]), float(x_grid[-1])), (float(y_grid[0]), float(y_grid[-1])), xlabel, ylabel)
    _text(root, WIDTH - MARGIN, MARGIN - 6, f"min {vmin:.4g}, max {vmax:.4g}", "end")
    _write(root, fp)
