"""Per-trial random streams.

Each trial owns independent streams keyed by ``(master_seed, trial_index,
role)``, so a trial's draws never depend on which worker ran it or in what
order.  Point sampling and scheduling use numpy ``Philox`` generators; the
per-link draws inside the kernels (fading, shadowing, thinning coins) use a
stateless SplitMix64 hash of ``(key, link counter)``.
"""

from __future__ import annotations

import numpy as np

ROLES = {"bs": 0, "mu": 1, "schedule": 2, "fading": 3, "shadow": 4, "thinning": 5}

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0**-53


def _entropy(master_seed: int, trial: int, role: str) -> list[int]:
    if role not in ROLES:
        raise KeyError(f"unknown stream role {role!r}")
    seed = int(master_seed) & _MASK64
    return [seed, int(trial), ROLES[role]]


def generator(master_seed: int, trial: int, role: str) -> np.random.Generator:
    """Philox generator for one (trial, role) pair."""
    ss = np.random.SeedSequence(_entropy(master_seed, trial, role))
    return np.random.Generator(np.random.Philox(ss))


def stream_key(master_seed: int, trial: int, role: str) -> int:
    """64-bit key for the counter-based hash used by the link kernels."""
    ss = np.random.SeedSequence(_entropy(master_seed, trial, role))
    return int(ss.generate_state(1, np.uint64)[0])


def counter_uniform(key: int, counters: np.ndarray) -> np.ndarray:
    """Uniform(0, 1) doubles from SplitMix64 over ``counters``; never 0 or 1.

    Bit-identical to the compiled kernel's generator.
    """
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + (c + np.uint64(1)) * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53
