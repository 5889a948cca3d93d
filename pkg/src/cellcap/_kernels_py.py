"""numpy implementations of the simulator's inner loops.

Used when the compiled extension is unavailable (or ``CELLCAP_PURE_PYTHON=1``).
Interference sums are accumulated left to right, like the compiled loop, so
both backends agree to the last few ulps.
"""

from __future__ import annotations

import numpy as np

from .rng import counter_uniform

BACKEND = "numpy"

_CHUNK_ELEMENTS = 1 << 21


def _torus_d2(x: np.ndarray, y: np.ndarray, bx: np.ndarray, by: np.ndarray, side: float) -> np.ndarray:
    dx = np.abs(x[:, None] - bx[None, :])
    dy = np.abs(y[:, None] - by[None, :])
    dx = np.minimum(dx, side - dx)
    dy = np.minimum(dy, side - dy)
    return dx * dx + dy * dy


def _rows_per_chunk(m: int) -> int:
    return max(1, _CHUNK_ELEMENTS // max(m, 1))


def nearest_torus(px, py, bx, by, side: float) -> np.ndarray:
    px = np.ascontiguousarray(px, dtype=np.float64)
    py = np.ascontiguousarray(py, dtype=np.float64)
    bx = np.ascontiguousarray(bx, dtype=np.float64)
    by = np.ascontiguousarray(by, dtype=np.float64)
    m = bx.shape[0]
    if m == 0:
        raise ValueError("nearest_torus needs at least one target point")
    out = np.empty(px.shape[0], dtype=np.int64)
    step = _rows_per_chunk(m)
    for lo in range(0, px.shape[0], step):
        hi = lo + step
        # argmin returns the first minimum, i.e. the lowest index on ties
        out[lo:hi] = np.argmin(_torus_d2(px[lo:hi], py[lo:hi], bx, by, side), axis=1)
    return out


def link_sinr(
    ux,
    uy,
    serving,
    bx,
    by,
    transmit,
    retain_prob: float,
    side: float,
    alpha: float,
    tx_power: float,
    noise_power: float,
    shadow_sigma_db: float,
    key_fading: int,
    key_shadow: int,
    key_thinning: int,
    r_min: float,
) -> np.ndarray:
    ux = np.ascontiguousarray(ux, dtype=np.float64)
    uy = np.ascontiguousarray(uy, dtype=np.float64)
    serving = np.ascontiguousarray(serving, dtype=np.int64)
    bx = np.ascontiguousarray(bx, dtype=np.float64)
    by = np.ascontiguousarray(by, dtype=np.float64)
    transmit = np.ascontiguousarray(transmit, dtype=bool)
    n, m = ux.shape[0], bx.shape[0]
    out = np.empty(n, dtype=np.float64)
    half = 0.5 * alpha
    shadow_scale = shadow_sigma_db * (np.log(10.0) / 10.0)
    cols = np.arange(m, dtype=np.uint64)
    step = _rows_per_chunk(m)
    for lo in range(0, n, step):
        hi = min(lo + step, n)
        rows = np.arange(lo, hi)
        counters = rows.astype(np.uint64)[:, None] * np.uint64(m) + cols[None, :]
        is_serving = cols[None, :] == serving[lo:hi, None].astype(np.uint64)
        keep = transmit[None, :] & ~is_serving
        if retain_prob < 1.0:
            keep &= counter_uniform(key_thinning, counters) < retain_prob
        d2 = np.maximum(_torus_d2(ux[lo:hi], uy[lo:hi], bx, by, side), r_min * r_min)
        path = 1.0 / (d2 * d2) if half == 2.0 else np.power(d2, -half)
        gain = -np.log(counter_uniform(key_fading, counters)) * tx_power * path
        if shadow_sigma_db > 0.0:
            u1 = counter_uniform(key_shadow, np.uint64(2) * counters)
            u2 = counter_uniform(key_shadow, np.uint64(2) * counters + np.uint64(1))
            gain = gain * np.exp(shadow_scale * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))
        signal = gain[is_serving]
        interference = np.where(keep, gain, 0.0)
        if m:
            total = np.cumsum(interference, axis=1)[:, -1] + noise_power
        else:
            total = np.full(hi - lo, noise_power)
        with np.errstate(divide="ignore", invalid="ignore"):
            out[lo:hi] = np.where(total > 0.0, signal / np.where(total > 0.0, total, 1.0), np.inf)
    return out
