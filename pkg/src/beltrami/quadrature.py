"""1D antiderivative tables and straight-line potentials backing the quadrature nodes."""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicHermiteSpline


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2.0, depth - 1))

    if a == b:
        return 0.0
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def antiderivative_table(integrand, variable, interval, offset=0.0, cells=2048, tol=1e-10):
    """Tabulate ``offset + int_0^s g`` on ``interval`` as a cubic Hermite spline.

    Node slopes are exact integrand values, so the interpolant's error is
    O(h^4) on top of the per-cell quadrature error.
    """
    from .expr import compile_expr

    g = compile_expr(integrand, (variable,), backend="math")
    lo, hi = float(interval[0]), float(interval[1])
    if not lo <= 0.0 <= hi:
        raise ValueError(f"interval {interval} must contain the base point 0")
    # split so that 0 is a grid node
    n_left = max(1, int(round(cells * (0.0 - lo) / (hi - lo)))) if lo < 0 else 0
    n_right = max(1, cells - n_left) if hi > 0 else 0
    left = np.linspace(lo, 0.0, n_left + 1) if n_left else np.array([0.0])
    right = np.linspace(0.0, hi, n_right + 1) if n_right else np.array([0.0])
    nodes = np.concatenate([left[:-1], right])
    per_cell = tol / max(len(nodes) - 1, 1)
    values = np.empty_like(nodes)
    zero = n_left
    values[zero] = offset
    for i in range(zero + 1, len(nodes)):
        values[i] = values[i - 1] + adaptive_simpson(g, nodes[i - 1], nodes[i], per_cell)
    for i in range(zero - 1, -1, -1):
        values[i] = values[i + 1] - adaptive_simpson(g, nodes[i], nodes[i + 1], per_cell)
    slopes = np.array([g(s) for s in nodes])
    return CubicHermiteSpline(nodes, values, slopes, extrapolate=False)


_GL_CACHE: dict = {}


def _gauss(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = leggauss(n)
    return _GL_CACHE[n]


def _segment_integral(grad_fn, start, end, order=24, panels=1):
    """Composite Gauss-Legendre of ``grad . d`` along ``start -> end`` (arrays of shape (N, 3))."""
    t, wts = _gauss(order)
    d = end - start
    total = np.zeros(len(start))
    edges = np.linspace(0.0, 1.0, panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        tt = 0.5 * (b - a) * t + 0.5 * (a + b)
        pts = start[:, None, :] + tt[None, :, None] * d[:, None, :]
        gx, gy, gz = grad_fn(pts[..., 0], pts[..., 1], pts[..., 2])
        integrand = gx * d[:, 0, None] + gy * d[:, 1, None] + gz * d[:, 2, None]
        total += 0.5 * (b - a) * integrand @ wts
    return total


def segment_integral(grad_fn, start, end, tol=1e-13, max_panels=256):
    """Panel-doubling Gauss-Legendre until successive estimates agree to ``tol``."""
    panels = 1
    prev = _segment_integral(grad_fn, start, end, panels=panels)
    while panels < max_panels:
        panels *= 2
        cur = _segment_integral(grad_fn, start, end, panels=panels)
        if np.all(np.abs(cur - prev) <= tol * (1.0 + np.abs(cur))):
            return cur
        prev = cur
    return prev


def _grad_fn(gradient):
    from .expr import compile_many
    return compile_many(gradient, backend="numpy")


def line_integral(gradient, anchor, x, y, z):
    """Potential at ``(x, y, z)`` by integrating ``gradient`` along the straight segment from ``anchor``."""
    x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))
    shape = x.shape
    end = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    start = np.broadcast_to(np.asarray(anchor, float), end.shape)
    out = segment_integral(_grad_fn(gradient), start, end)
    return out.reshape(shape) if shape else float(out[0])


def polyline_integral(gradient, vertices_per_point):
    """Integrate along a polyline per point; ``vertices_per_point`` has shape (N, K, 3)."""
    fn = _grad_fn(gradient)
    v = np.asarray(vertices_per_point, float)
    total = np.zeros(v.shape[0])
    for k in range(v.shape[1] - 1):
        total += segment_integral(fn, v[:, k, :], v[:, k + 1, :])
    return total
