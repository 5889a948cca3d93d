"""Time the compiled and numpy kernels on one simulator-sized trial.

    python benchmarks/bench_kernels.py [--repeat N] [--lambda-b F] [--lambda-u F]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cellcap import kernels, mcsim, rng
from cellcap.analytic import Densities


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def trial_inputs(d: Densities, seed: int = 0):
    window = mcsim.SimWindow.auto(d)
    bss = mcsim.sample_ppp(window, d.lambda_b, rng.generator(seed, 0, "bs"))
    users = mcsim.sample_ppp(window, d.lambda_u, rng.generator(seed, 0, "mu"))
    assignment = kernels.nearest_torus(users.x, users.y, bss.x, bss.y, window.side)
    selected = mcsim.schedule_uniform(assignment, len(bss), rng.generator(seed, 0, "schedule"))
    serving = np.flatnonzero(selected >= 0)
    chosen = users.points[selected[serving]]
    return window, bss, users, serving, chosen, (selected >= 0).astype(np.uint8)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--lambda-b", type=float, default=30.0)
    ap.add_argument("--lambda-u", type=float, default=30.0)
    args = ap.parse_args()

    d = Densities(args.lambda_b, args.lambda_u)
    window, bss, users, serving, chosen, transmit = trial_inputs(d)
    grid = np.ascontiguousarray((np.arange(256) + 0.5) * window.side / 256)
    gx, gy = (a.ravel() for a in np.meshgrid(grid, grid, indexing="ij"))
    keys = mcsim.LinkKeys.for_trial(0, 0)
    cx, cy = np.ascontiguousarray(chosen[:, 0]), np.ascontiguousarray(chosen[:, 1])

    cases = {
        "associate users": lambda k: k.nearest_torus(users.x, users.y, bss.x, bss.y, window.side),
        "cell areas (256^2 grid)": lambda k: k.nearest_torus(gx, gy, bss.x, bss.y, window.side),
        "sinr, alpha=4": lambda k: k.link_sinr(
            cx, cy, serving, bss.x, bss.y, transmit, 1.0, window.side, 4.0, 1.0, 0.0, 0.0,
            keys.fading, keys.shadow, keys.thinning, window.r_min),
        "sinr, alpha=3.5 + 8 dB shadowing": lambda k: k.link_sinr(
            cx, cy, serving, bss.x, bss.y, transmit, 1.0, window.side, 3.5, 1.0, 0.0, 8.0,
            keys.fading, keys.shadow, keys.thinning, window.r_min),
    }

    backends = kernels.available_backends()
    print(f"{len(bss)} BSs, {len(users)} users, {len(serving)} scheduled; best of {args.repeat}")
    print(f"{'kernel':36s}" + "".join(f"{name:>12s}" for name in backends) + "     speedup")
    for label, fn in cases.items():
        t = {name: best_of(lambda: fn(mod), args.repeat) for name, mod in backends.items()}
        row = f"{label:36s}" + "".join(f"{t[name] * 1e3:10.2f}ms" for name in backends)
        if "cython" in t:
            row += f"  {t['numpy'] / t['cython']:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
