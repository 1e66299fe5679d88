"""Compiled evaluation of the tabulated log-density and its first two derivatives."""

import math

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def _right(x, alpha, c, order, out, k):
    p = 0.0
    p1 = 0.0
    p2 = 0.0
    for j in range(3):
        pw = -(j + 1) * alpha - 1.0
        xp = x**pw
        p += c[j] * xp
        p1 += c[j] * pw * xp / x
        p2 += c[j] * pw * (pw - 1.0) * xp / (x * x)
    out[0, k] = math.log(p)
    if order >= 1:
        l1 = p1 / p
        out[1, k] = l1
        if order >= 2:
            out[2, k] = p2 / p - l1 * l1


@numba.njit(cache=True, nogil=True)
def _left(x, alpha, s, b, order, out, k):
    beta = alpha / (alpha - 1.0)
    gam = (2.0 - alpha) / (2.0 * alpha)
    t = -x
    xi = (alpha - 1.0) * (t / (alpha * s)) ** beta
    out[0, k] = b[0] + gam * math.log(xi) - xi + b[1] / xi + b[2] / (xi * xi)
    if order >= 1:
        g1 = gam / xi - 1.0 - b[1] / (xi * xi) - 2.0 * b[2] / (xi * xi * xi)
        xi1 = beta * xi / t
        out[1, k] = -g1 * xi1
        if order >= 2:
            g2 = -gam / (xi * xi) + 2.0 * b[1] / xi**3 + 6.0 * b[2] / xi**4
            xi2 = beta * (beta - 1.0) * xi / (t * t)
            out[2, k] = g2 * xi1 * xi1 + g1 * xi2


@numba.njit(cache=True, nogil=True)
def evaluate(x, order, x0, h, i_left, coef, lo, hi, alpha, s, c, b):
    """Rows ``log p, (log p)', (log p)''`` (up to ``order``) at every ``x``."""
    n = x.size
    out = np.empty((order + 1, n))
    m = coef.shape[0]
    inv_h = 1.0 / h
    for k in range(n):
        v = x[k]
        if v > hi:
            _right(v, alpha, c, order, out, k)
            continue
        if v < lo:
            _left(v, alpha, s, b, order, out, k)
            continue
        pos = (v - x0) * inv_h
        i = int(math.floor(pos))
        j = i - i_left
        if j < 0:
            j = 0
        elif j > m - 1:
            j = m - 1
        t = pos - (j + i_left)
        r0, r1, r2, r3 = coef[j, 0], coef[j, 1], coef[j, 2], coef[j, 3]
        r4, r5, r6, r7 = coef[j, 4], coef[j, 5], coef[j, 6], coef[j, 7]
        out[0, k] = r0 + t * (r1 + t * (r2 + t * (r3 + t * (r4 + t * (r5 + t * (r6 + t * r7))))))
        if order >= 1:
            d = r1 + t * (2.0 * r2 + t * (3.0 * r3 + t * (4.0 * r4 + t * (5.0 * r5 + t * (6.0 * r6 + t * 7.0 * r7)))))
            out[1, k] = d * inv_h
            if order >= 2:
                d2 = 2.0 * r2 + t * (6.0 * r3 + t * (12.0 * r4 + t * (20.0 * r5 + t * (30.0 * r6 + t * 42.0 * r7))))
                out[2, k] = d2 * inv_h * inv_h
    return out
