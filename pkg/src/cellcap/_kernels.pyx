# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the Monte Carlo simulator.

Same signatures and semantics as ``cellcap._kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, sqrt, cos, pow, INFINITY, M_PI
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

BACKEND = "cython"

cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double LN10_OVER_10 = 0.23025850929940458


cdef inline double _uniform(uint64_t key, uint64_t counter) noexcept nogil:
    cdef uint64_t z = key + (counter + 1) * <uint64_t>0x9E3779B97F4A7C15ULL
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    z = z ^ (z >> 31)
    return (<double>(z >> 11) + 0.5) * TWO_M53


cdef inline double _torus_d2(double x1, double y1, double x2, double y2, double side) noexcept nogil:
    cdef double dx = x1 - x2
    cdef double dy = y1 - y2
    if dx < 0:
        dx = -dx
    if dy < 0:
        dy = -dy
    if dx > side - dx:
        dx = side - dx
    if dy > side - dy:
        dy = side - dy
    return dx * dx + dy * dy


def nearest_torus(const double[::1] px, const double[::1] py,
                  const double[::1] bx, const double[::1] by, double side):
    """Index of the nearest point of (bx, by) to every (px, py) on the torus.

    Targets are bucketed on a square grid and each query scans rings of
    buckets outward until no unvisited bucket can hold a closer point.  Ties
    go to the lowest index, as in a brute-force scan.
    """
    cdef Py_ssize_t n = px.shape[0]
    cdef Py_ssize_t m = bx.shape[0]
    if m == 0:
        raise ValueError("nearest_torus needs at least one target point")
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] res = out

    cdef Py_ssize_t g = <Py_ssize_t>sqrt(m / 2.0)
    if g < 1:
        g = 1
    cdef double cell = side / g
    cdef double inv = g / side
    cdef Py_ssize_t nb = g * g
    start_arr = np.zeros(nb + 1, dtype=np.int64)
    members_arr = np.empty(m, dtype=np.int64)
    cdef int64_t[::1] start = start_arr
    cdef int64_t[::1] members = members_arr
    fill_arr = np.zeros(nb, dtype=np.int64)
    cdef int64_t[::1] fill = fill_arr

    cdef Py_ssize_t i, j, k, b, cx, cy, r, ix, iy, ox, oy, best, rmax
    cdef double d, bestd, x, y, fx, fy, edge, reach
    with nogil:
        for j in range(m):
            b = _bucket(bx[j], by[j], inv, g)
            start[b + 1] += 1
        for b in range(nb):
            start[b + 1] += start[b]
        # members stay in ascending index order within a bucket
        for j in range(m):
            b = _bucket(bx[j], by[j], inv, g)
            members[start[b] + fill[b]] = j
            fill[b] += 1

        rmax = g // 2
        for i in range(n):
            x = px[i]
            y = py[i]
            cx = <Py_ssize_t>(x * inv)
            cy = <Py_ssize_t>(y * inv)
            if cx >= g:
                cx = g - 1
            if cy >= g:
                cy = g - 1
            if cx < 0:
                cx = 0
            if cy < 0:
                cy = 0
            fx = x - cx * cell
            fy = y - cy * cell
            edge = fx
            if cell - fx < edge:
                edge = cell - fx
            if fy < edge:
                edge = fy
            if cell - fy < edge:
                edge = cell - fy
            if edge < 0:
                edge = 0
            best = -1
            bestd = INFINITY
            r = 0
            while True:
                for ox in range(-r, r + 1):
                    for oy in range(-r, r + 1):
                        if ox != -r and ox != r and oy != -r and oy != r:
                            continue
                        ix = (cx + ox) % g
                        iy = (cy + oy) % g
                        if ix < 0:
                            ix += g
                        if iy < 0:
                            iy += g
                        b = ix * g + iy
                        for k in range(start[b], start[b + 1]):
                            j = members[k]
                            d = _torus_d2(x, y, bx[j], by[j], side)
                            if d < bestd or (d == bestd and j < best):
                                bestd = d
                                best = j
                if r >= rmax:
                    break
                # every bucket outside ring r is at least this far away
                reach = edge + r * cell
                if best >= 0 and bestd < reach * reach:
                    break
                r += 1
            res[i] = best
    return out


cdef inline Py_ssize_t _bucket(double x, double y, double inv, Py_ssize_t g) noexcept nogil:
    cdef Py_ssize_t ix = <Py_ssize_t>(x * inv)
    cdef Py_ssize_t iy = <Py_ssize_t>(y * inv)
    if ix >= g:
        ix = g - 1
    if iy >= g:
        iy = g - 1
    if ix < 0:
        ix = 0
    if iy < 0:
        iy = 0
    return ix * g + iy


cdef inline double _path_gain(double d2, double half, double r2min) noexcept nogil:
    if d2 < r2min:
        d2 = r2min
    if half == 2.0:
        return 1.0 / (d2 * d2)
    return pow(d2, -half)


def link_sinr(const double[::1] ux, const double[::1] uy, const int64_t[::1] serving,
              const double[::1] bx, const double[::1] by, const unsigned char[::1] transmit,
              double retain_prob, double side, double alpha, double tx_power,
              double noise_power, double shadow_sigma_db,
              uint64_t key_fading, uint64_t key_shadow, uint64_t key_thinning,
              double r_min):
    """SINR of each user i against its serving BS ``serving[i]``.

    Interferers are the BSs with ``transmit[j]`` set, other than the serving
    one, each kept with probability ``retain_prob`` (coin per link).  Link
    (i, j) draws from counter ``i * len(bx) + j`` of each keyed stream.
    """
    cdef Py_ssize_t n = ux.shape[0]
    cdef Py_ssize_t m = bx.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    tx_arr = np.flatnonzero(np.asarray(transmit)).astype(np.int64)
    cdef int64_t[::1] tx = tx_arr
    cdef Py_ssize_t ntx = tx.shape[0]
    cdef Py_ssize_t i, k
    cdef int64_t s, j
    cdef uint64_t c, row
    cdef double half = 0.5 * alpha
    cdef double r2min = r_min * r_min
    cdef double shadow_scale = shadow_sigma_db * LN10_OVER_10
    cdef bint shadowed = shadow_sigma_db > 0.0
    cdef bint thinned = retain_prob < 1.0
    cdef double x, y, gain, signal, interference
    with nogil:
        for i in range(n):
            x = ux[i]
            y = uy[i]
            s = serving[i]
            row = <uint64_t>i * <uint64_t>m
            c = row + <uint64_t>s
            signal = -log(_uniform(key_fading, c)) * tx_power * _path_gain(
                _torus_d2(x, y, bx[s], by[s], side), half, r2min)
            if shadowed:
                signal = signal * _shadow(key_shadow, c, shadow_scale)
            interference = 0.0
            for k in range(ntx):
                j = tx[k]
                if j == s:
                    continue
                c = row + <uint64_t>j
                if thinned and _uniform(key_thinning, c) >= retain_prob:
                    continue
                gain = -log(_uniform(key_fading, c)) * tx_power * _path_gain(
                    _torus_d2(x, y, bx[j], by[j], side), half, r2min)
                if shadowed:
                    gain = gain * _shadow(key_shadow, c, shadow_scale)
                interference = interference + gain
            interference = interference + noise_power
            if interference > 0.0:
                res[i] = signal / interference
            else:
                res[i] = INFINITY
    return out


cdef inline double _shadow(uint64_t key, uint64_t c, double scale) noexcept nogil:
    # log-normal factor from a Box-Muller normal
    cdef double u1 = _uniform(key, 2 * c)
    cdef double u2 = _uniform(key, 2 * c + 1)
    return exp(scale * sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2))
