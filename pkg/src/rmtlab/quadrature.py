"""Quadrature rules used across the laboratory."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> tuple:
    """Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration to 1e-14.

    Initial guesses are the Chebyshev-like estimates; P_n and P_n' come from
    the three-term recurrence.
    """
    n = int(order)
    if n < 1:
        raise ValueError("order must be >= 1")
    k = np.arange(1, n + 1)
    x = np.cos(math.pi * (4 * k - 1) / (4 * n + 2))
    for _ in range(100):
        p0 = np.ones_like(x)
        p1 = x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        if n == 1:
            pn, pn_1 = p1, p0
        else:
            pn, pn_1 = p1, p0
        dp = n * (x * pn - pn_1) / (x * x - 1.0)
        dx = pn / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-14:
            break
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order_idx = np.argsort(x)
    x, w = x[order_idx], w[order_idx]
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_on(a: float, b: float, order: int) -> tuple:
    """Gauss-Legendre nodes/weights mapped to [a, b]."""
    x, w = gauss_legendre(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


@lru_cache(maxsize=64)
def gauss_hermite(order: int) -> tuple:
    """Gauss-Hermite nodes/weights for weight exp(-u^2) on the real line."""
    x, w = np.polynomial.hermite.hermgauss(int(order))
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w
