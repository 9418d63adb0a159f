"""Brute-force minimizers used to validate the closed-form optimizers.

They evaluate the noise functionals on successively finer grids and never
use the normal equations.
"""

from __future__ import annotations

import numpy as np

from . import kernels


def _c(x):
    return np.ascontiguousarray(np.asarray(x, dtype=float))


def zoom_min_1d(c0, w, g, v, center=0.0, half=4.0, n=401, levels=6, shrink=20.0):
    """Minimize ``c0 x^2 + sum_j w_j (x g_j - v_j)^2`` by zooming grids."""
    w, g, v = _c(w), _c(g), _c(v)
    best = np.inf
    for _ in range(levels + 8):
        xs = center + np.linspace(-half, half, n)
        val, x = kernels.quad_grid_min_1d(float(c0), w, g, v, xs)
        best = min(best, val)
        if abs(x - center) >= half * (1 - 2.0 / n):
            center = x  # minimizer on the boundary: move, keep width
            continue
        center, half = x, half / shrink
        levels -= 1
        if levels <= 0:
            break
    return best, center


def zoom_min_2d(c0, w, g, u, v, center=(0.0, 0.0), half=(4.0, 4.0), n=121, levels=6, shrink=12.0):
    """Minimize ``c0 x^2 + sum_j w_j (x g_j - y u_j - v_j)^2`` by zooming grids."""
    w, g, u, v = _c(w), _c(g), _c(u), _c(v)
    cx, cy = center
    hx, hy = half
    best = np.inf
    for _ in range(levels + 12):
        xs = cx + np.linspace(-hx, hx, n)
        ys = cy + np.linspace(-hy, hy, n)
        val, x, y = kernels.quad_grid_min_2d(float(c0), w, g, u, v, xs, ys)
        best = min(best, val)
        edge = abs(x - cx) >= hx * (1 - 2.0 / n) or abs(y - cy) >= hy * (1 - 2.0 / n)
        cx, cy = x, y
        if edge:
            continue
        hx, hy = hx / shrink, hy / shrink
        levels -= 1
        if levels <= 0:
            break
    return best, (cx, cy)
