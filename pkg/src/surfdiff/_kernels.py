"""Compiled inner loops: pointwise field derivatives and the Euler-Maruyama walk.

Every evaluator returns the six numbers (h, hx, hy, hxx, hxy, hyy).  Two field
kinds exist: a periodic sum of compact bumps, and a trigonometric sum.
"""

import math

import numpy as np
from numba import njit

KIND_TRIG = 0
KIND_BUMPS = 1

# exp(x) is subnormal or zero below this
LOG_TINY = math.log(np.finfo(np.float64).tiny)


@njit(cache=True)
def wrap(x, period):
    r = np.fmod(x, period)
    if r < 0.0:
        r += period
    return r


@njit(cache=True)
def bump_point(alpha, dx, dy):
    s = dx * dx + dy * dy
    if s >= 1.0:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    u = 1.0 / (1.0 - s)
    if -u < LOG_TINY:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0.0
    f = alpha * math.exp(-u)
    u2 = u * u
    c = (4.0 * u2 * u2 - 8.0 * u2 * u) * f
    return (
        f,
        -2.0 * dx * u2 * f,
        -2.0 * dy * u2 * f,
        -2.0 * u2 * f + c * dx * dx,
        c * dx * dy,
        -2.0 * u2 * f + c * dy * dy,
    )


@njit(cache=True)
def _bumps_at(x, y, centers, alpha, period, bin_start, bin_items, nb):
    x = wrap(x, period)
    y = wrap(y, period)
    h = hx = hy = hxx = hxy = hyy = 0.0
    if nb < 3:
        # neighbour bins would alias; scan everything
        for k in range(centers.shape[0]):
            dx = x - centers[k, 0]
            dy = y - centers[k, 1]
            dx -= period * round(dx / period)
            dy -= period * round(dy / period)
            v = bump_point(alpha, dx, dy)
            h += v[0]
            hx += v[1]
            hy += v[2]
            hxx += v[3]
            hxy += v[4]
            hyy += v[5]
        return h, hx, hy, hxx, hxy, hyy
    w = period / nb
    bx = min(int(x / w), nb - 1)
    by = min(int(y / w), nb - 1)
    for ox in range(-1, 2):
        cx = (bx + ox) % nb
        for oy in range(-1, 2):
            cy = (by + oy) % nb
            b = cx * nb + cy
            for j in range(bin_start[b], bin_start[b + 1]):
                k = bin_items[j]
                dx = x - centers[k, 0]
                dy = y - centers[k, 1]
                dx -= period * round(dx / period)
                dy -= period * round(dy / period)
                v = bump_point(alpha, dx, dy)
                h += v[0]
                hx += v[1]
                hy += v[2]
                hxx += v[3]
                hxy += v[4]
                hyy += v[5]
    return h, hx, hy, hxx, hxy, hyy


@njit(cache=True)
def _trig_at(x, y, kvec, ca, sa, period):
    x = wrap(x, period)
    y = wrap(y, period)
    h = hx = hy = hxx = hxy = hyy = 0.0
    for m in range(kvec.shape[0]):
        k1 = kvec[m, 0]
        k2 = kvec[m, 1]
        ph = k1 * x + k2 * y
        c = math.cos(ph)
        s = math.sin(ph)
        v = ca[m] * c + sa[m] * s
        d = sa[m] * c - ca[m] * s
        h += v
        hx += k1 * d
        hy += k2 * d
        hxx -= k1 * k1 * v
        hxy -= k1 * k2 * v
        hyy -= k2 * k2 * v
    return h, hx, hy, hxx, hxy, hyy


@njit(cache=True)
def eval_at(kind, x, y, period, kvec, ca, sa, centers, alpha, bin_start, bin_items, nb):
    if kind == KIND_TRIG:
        return _trig_at(x, y, kvec, ca, sa, period)
    return _bumps_at(x, y, centers, alpha, period, bin_start, bin_items, nb)


@njit(cache=True)
def eval_many(kind, pts, period, kvec, ca, sa, centers, alpha, bin_start, bin_items, nb):
    n = pts.shape[0]
    out = np.empty((n, 6))
    for i in range(n):
        v = eval_at(kind, pts[i, 0], pts[i, 1], period, kvec, ca, sa, centers, alpha,
                    bin_start, bin_items, nb)
        for j in range(6):
            out[i, j] = v[j]
    return out


@njit(cache=True)
def drift_sqrt(v):
    """Drift and symmetric square root of 2 g^{-1} from a six-tuple."""
    gx, gy = v[1], v[2]
    hxx, hxy, hyy = v[3], v[4], v[5]
    G = 1.0 + gx * gx + gy * gy
    php = gx * gx * hxx + 2.0 * gx * gy * hxy + gy * gy * hyy
    c = -(G * (hxx + hyy) - php) / (G * G)
    a11 = 2.0 - 2.0 * gx * gx / G
    a12 = -2.0 * gx * gy / G
    a22 = 2.0 - 2.0 * gy * gy / G
    sd = 2.0 / math.sqrt(G)
    t = math.sqrt(a11 + a22 + 2.0 * sd)
    return c * gx, c * gy, (a11 + sd) / t, a12 / t, (a22 + sd) / t


@njit(cache=True)
def em_walk(kind, x0, y0, dt, noise, drift_on, every, period, kvec, ca, sa, centers,
            alpha, bin_start, bin_items, nb):
    """Advance len(noise) Euler-Maruyama steps; record the state every ``every`` steps.

    Returns (samples, status) where status is -1 on success or the index of the
    first step that produced a non-finite state.
    """
    n = noise.shape[0]
    out = np.empty((n // every, 2))
    sq = math.sqrt(dt)
    x = x0
    y = y0
    r = 0
    for i in range(n):
        v = eval_at(kind, x, y, period, kvec, ca, sa, centers, alpha, bin_start, bin_items, nb)
        f1, f2, s11, s12, s22 = drift_sqrt(v)
        if not drift_on:
            f1 = 0.0
            f2 = 0.0
        z1 = noise[i, 0] * sq
        z2 = noise[i, 1] * sq
        x = x + f1 * dt + s11 * z1 + s12 * z2
        y = y + f2 * dt + s12 * z1 + s22 * z2
        if not (math.isfinite(x) and math.isfinite(y)):
            return out[:r], i
        if (i + 1) % every == 0:
            out[r, 0] = x
            out[r, 1] = y
            r += 1
    return out, -1
