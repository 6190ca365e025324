"""Gauss-Legendre rules: plain, piecewise and tensor-product."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _leggauss(m):
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a, b, m=24):
    """Nodes and weights of the ``m``-point rule on ``[a, b]``."""
    x, w = _leggauss(m)
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def piecewise_gauss_legendre(breaks, m=24):
    """Composite rule with one ``m``-point panel per interval of ``breaks``."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = _leggauss(m)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def tensor_gauss_legendre(lo, hi, m=24, panels=1):
    """Tensor-product rule on the box ``prod [lo_i, hi_i]``.

    Returns ``points (N, n)`` and ``weights (N,)``. Each axis is split into
    ``panels`` equal panels of ``m`` nodes.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    axes = [piecewise_gauss_legendre(np.linspace(a, b, panels + 1), m) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return points, weights


def sphere_rule(n, m=24):
    """Unit directions and weights integrating over the sphere ``S^{n-1}``.

    ``n = 1`` gives the two points ``+-1`` with unit weights; ``n = 2`` the
    trapezoid rule in the angle; ``n = 3`` Gauss-Legendre in ``cos(theta)``
    times the trapezoid rule in azimuth.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    if n == 2:
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(th), np.sin(th)], axis=-1), np.full(m, 2 * np.pi / m)
    if n == 3:
        c, wc = gauss_legendre(-1.0, 1.0, m)
        ph = 2 * np.pi * (np.arange(2 * m) + 0.5) / (2 * m)
        C, P = np.meshgrid(c, ph, indexing="ij")
        S = np.sqrt(1 - C ** 2)
        dirs = np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1).reshape(-1, 3)
        w = np.outer(wc, np.full(2 * m, np.pi / m)).ravel()
        return dirs, w
    raise ValueError(f"sphere rule not available for n = {n}")
