"""Monte Carlo simulator for the PPP downlink on a square torus.

One trial draws the BS and MU processes, attaches every user to its nearest BS,
lets each BS schedule one of its users uniformly at random and evaluates the
SINR of every scheduled user under Rayleigh fading (and optional log-normal
shadowing).  Trials are independent and keyed by ``(master_seed, trial)``, so
results do not depend on how many workers run them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from . import kernels, rng
from .analytic import Channel, Densities, p_inactive

__all__ = [
    "AREA_BINS",
    "AREA_MAX",
    "EmptyPatternError",
    "Estimate",
    "EstimateSet",
    "LinkKeys",
    "LOAD_MAX",
    "PointPattern",
    "SimWindow",
    "TrialConfig",
    "TrialResult",
    "associate_nearest",
    "estimate_cell_areas",
    "run_experiment",
    "run_trial",
    "sample_ppp",
    "schedule_uniform",
    "sinr_sample",
    "trials_for_user_samples",
]

MIN_EXPECTED_POINTS = 500
R_MIN_FRACTION = 1e-6
AREA_MAX = 5.0
AREA_BINS = 100
LOAD_MAX = 50
DEFAULT_GRID = 256

InterferenceModel = Literal["dependent", "independent"]


class EmptyPatternError(RuntimeError):
    """No BS in the window; the realisation has to be redrawn."""


@dataclass(frozen=True)
class SimWindow:
    side: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.side) and self.side > 0):
            raise ValueError(f"window side must be positive, got {self.side!r}")

    @property
    def area(self) -> float:
        return self.side * self.side

    @property
    def r_min(self) -> float:
        return R_MIN_FRACTION * self.side

    @classmethod
    def auto(cls, d: Densities, min_expected: int = MIN_EXPECTED_POINTS) -> "SimWindow":
        """Smallest torus holding ``min_expected`` BSs and MUs on average."""
        return cls(math.sqrt(min_expected / min(d.lambda_b, d.lambda_u)))


@dataclass(frozen=True)
class PointPattern:
    points: np.ndarray  # (n, 2)
    density_used: float

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def x(self) -> np.ndarray:
        return np.ascontiguousarray(self.points[:, 0])

    @property
    def y(self) -> np.ndarray:
        return np.ascontiguousarray(self.points[:, 1])


@dataclass(frozen=True)
class LinkKeys:
    """Counter-hash keys for the per-link draws of one trial."""

    fading: int
    shadow: int
    thinning: int

    @classmethod
    def for_trial(cls, master_seed: int, trial: int) -> "LinkKeys":
        return cls(
            rng.stream_key(master_seed, trial, "fading"),
            rng.stream_key(master_seed, trial, "shadow"),
            rng.stream_key(master_seed, trial, "thinning"),
        )


@dataclass(frozen=True)
class TrialConfig:
    densities: Densities
    channel: Channel
    window: SimWindow | None = None
    master_seed: int = 42
    n_trials: int = 1
    interference_model: InterferenceModel = "dependent"
    compute_sinr: bool = True
    area_trials: int = 1
    grid_resolution: int = DEFAULT_GRID

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.interference_model not in ("dependent", "independent"):
            raise ValueError(f"unknown interference model {self.interference_model!r}")
        if self.grid_resolution < 256:
            raise ValueError("grid_resolution must be at least 256")
        if self.area_trials < 0:
            raise ValueError("area_trials must be >= 0")
        if self.window is None:
            object.__setattr__(self, "window", SimWindow.auto(self.densities))


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    samples: int


@dataclass
class TrialResult:
    n_bs: int
    n_users: int
    n_inactive: int
    n_selected: int
    n_success: int
    load_counts_typical: np.ndarray
    load_counts_tagged: np.ndarray
    areas: np.ndarray | None = None


@dataclass
class EstimateSet:
    p_inactive: Estimate
    p_selection: Estimate
    p_success: Estimate
    p_service: Estimate
    c_service: Estimate
    empirical_load_pmf_typical: np.ndarray
    empirical_load_pmf_tagged: np.ndarray
    empirical_area_hist_typical: np.ndarray
    empirical_area_hist_tagged: np.ndarray
    area_bin_edges: np.ndarray
    area_samples: np.ndarray = field(repr=False)
    n_trials: int = 0
    backend: str = kernels.BACKEND

    @property
    def user_samples(self) -> int:
        return self.p_selection.samples

    def area_mean_typical(self) -> float:
        return float(np.mean(self.area_samples)) if self.area_samples.size else math.nan

    def area_mean_tagged(self) -> float:
        a = self.area_samples
        return float(np.sum(a * a) / np.sum(a)) if a.size else math.nan


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------


def sample_ppp(window: SimWindow, density: float, stream: np.random.Generator) -> PointPattern:
    """Homogeneous PPP on the window: Poisson count, uniform positions."""
    if not density > 0:
        raise ValueError(f"density must be positive, got {density!r}")
    n = int(stream.poisson(density * window.area))
    pts = stream.uniform(0.0, window.side, size=(n, 2))
    # uniform(0, side) can round up to side itself
    np.minimum(pts, np.nextafter(window.side, 0.0), out=pts)
    return PointPattern(pts, float(density))


def associate_nearest(users: PointPattern, bss: PointPattern, window: SimWindow) -> np.ndarray:
    """Index of the nearest BS (toroidal metric) for every user."""
    if len(bss) == 0:
        raise EmptyPatternError("cannot associate users with an empty BS pattern")
    if len(users) == 0:
        return np.empty(0, dtype=np.int64)
    return kernels.nearest_torus(users.x, users.y, bss.x, bss.y, window.side)


def schedule_uniform(assignment: np.ndarray, n_bs: int, stream: np.random.Generator) -> np.ndarray:
    """Per BS, the index of one uniformly chosen attached user, or -1 if idle."""
    assignment = np.asarray(assignment, dtype=np.int64)
    selected = np.full(n_bs, -1, dtype=np.int64)
    if assignment.size == 0:
        return selected
    # the user with the smallest random key in each cell wins
    keys = stream.random(assignment.size)
    order = np.lexsort((keys, assignment))
    cells = assignment[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = cells[1:] != cells[:-1]
    selected[cells[first]] = order[first]
    return selected


def sinr_sample(
    users: PointPattern,
    serving: np.ndarray,
    bss: PointPattern,
    transmitting: np.ndarray,
    ch: Channel,
    window: SimWindow,
    keys: LinkKeys,
    retain_prob: float = 1.0,
) -> np.ndarray:
    """SINR of each user in ``users`` against ``bss[serving[i]]``.

    Interferers are the transmitting BSs other than the server, each kept with
    probability ``retain_prob``.  With no interferer and no noise the SINR is
    ``inf``.
    """
    if len(users) == 0:
        return np.empty(0)
    return kernels.link_sinr(
        users.x,
        users.y,
        np.ascontiguousarray(serving, dtype=np.int64),
        bss.x,
        bss.y,
        np.ascontiguousarray(transmitting, dtype=np.uint8),
        float(retain_prob),
        window.side,
        ch.alpha,
        ch.tx_power,
        ch.noise_power,
        ch.shadow_sigma_db,
        keys.fading,
        keys.shadow,
        keys.thinning,
        window.r_min,
    )


def _grid(window: SimWindow, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    c = (np.arange(resolution) + 0.5) * (window.side / resolution)
    gx, gy = np.meshgrid(c, c, indexing="ij")
    return gx.ravel(), gy.ravel()


def estimate_cell_areas(
    bss: PointPattern,
    window: SimWindow,
    grid_resolution: int = DEFAULT_GRID,
    density: float | None = None,
) -> np.ndarray:
    """Toroidal Voronoi cell areas by nearest-BS counting on a uniform grid.

    Every grid point belongs to exactly one cell, so the raw areas add up to
    the window area.  They are returned multiplied by ``density``; by default
    that is the realised intensity ``len(bss) / window.area``, which makes the
    mean normalised area exactly 1.  On a torus the cells always tile the
    window, so the realised rather than the nominal intensity sets their scale.
    """
    if grid_resolution < 256:
        raise ValueError("grid_resolution must be at least 256")
    if len(bss) == 0:
        raise EmptyPatternError("no BS to build cells around")
    gx, gy = _grid(window, grid_resolution)
    owner = kernels.nearest_torus(gx, gy, bss.x, bss.y, window.side)
    counts = np.bincount(owner, minlength=len(bss))
    cell = window.area / (grid_resolution * grid_resolution)
    lam = len(bss) / window.area if density is None else density
    return counts * (cell * lam)


def trials_for_user_samples(d: Densities, window: SimWindow, user_samples: int) -> int:
    """Trials needed for roughly ``user_samples`` users in total."""
    per_trial = d.lambda_u * window.area
    return max(1, math.ceil(user_samples / per_trial))


# ---------------------------------------------------------------------------
# trials and reduction
# ---------------------------------------------------------------------------


def _draw_bss(window: SimWindow, density: float, stream: np.random.Generator) -> PointPattern:
    while True:
        bss = sample_ppp(window, density, stream)
        if len(bss):
            return bss


def run_trial(cfg: TrialConfig, trial: int) -> TrialResult:
    d, ch, window = cfg.densities, cfg.channel, cfg.window
    seed = cfg.master_seed
    bss = _draw_bss(window, d.lambda_b, rng.generator(seed, trial, "bs"))
    users = sample_ppp(window, d.lambda_u, rng.generator(seed, trial, "mu"))

    assignment = associate_nearest(users, bss, window)
    load = np.bincount(assignment, minlength=len(bss))
    selected = schedule_uniform(assignment, len(bss), rng.generator(seed, trial, "schedule"))
    active = selected >= 0
    n_selected = int(active.sum())

    n_success = 0
    if cfg.compute_sinr and n_selected:
        serving = np.flatnonzero(active)
        chosen = PointPattern(users.points[selected[serving]], d.lambda_u)
        if cfg.interference_model == "dependent":
            transmitting, retain = active, 1.0
        else:
            transmitting, retain = np.ones(len(bss), dtype=bool), 1.0 - p_inactive(d)
        sinr = sinr_sample(
            chosen, serving, bss, transmitting, ch, window, LinkKeys.for_trial(seed, trial), retain
        )
        n_success = int(np.count_nonzero(sinr > ch.gamma_hat))

    typical = np.bincount(np.minimum(load, LOAD_MAX), minlength=LOAD_MAX + 1)
    tagged = np.bincount(np.minimum(load[assignment] - 1, LOAD_MAX), minlength=LOAD_MAX + 1)
    areas = None
    if trial < cfg.area_trials:
        areas = estimate_cell_areas(bss, window, cfg.grid_resolution)
    return TrialResult(
        n_bs=len(bss),
        n_users=len(users),
        n_inactive=int(len(bss) - n_selected),
        n_selected=n_selected,
        n_success=n_success,
        load_counts_typical=typical,
        load_counts_tagged=tagged,
        areas=areas,
    )


def _ratio_estimate(num: Sequence[int], den: Sequence[int]) -> Estimate:
    """Pooled ratio with a between-trial standard error (trial weights = denominators)."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    total = den.sum()
    if total == 0:
        return Estimate(math.nan, math.nan, 0)
    r = num.sum() / total
    t = np.count_nonzero(den)
    if t > 1:
        mask = den > 0
        w = den[mask] / total
        var = t / (t - 1) * np.sum(w * w * (num[mask] / den[mask] - r) ** 2)
    else:
        var = r * (1.0 - r) / total
    return Estimate(float(r), float(math.sqrt(var)), int(total))


def _normalise(counts: np.ndarray) -> np.ndarray:
    s = counts.sum()
    return counts / s if s > 0 else counts.astype(np.float64)


def area_histograms(areas: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Typical and area-weighted (tagged) mass histograms over [0, AREA_MAX].

    Areas beyond the range land in the last bin so each histogram sums to 1.
    """
    edges = np.linspace(0.0, AREA_MAX, AREA_BINS + 1)
    idx = np.minimum((areas / (AREA_MAX / AREA_BINS)).astype(np.int64), AREA_BINS - 1)
    typical = np.bincount(idx, minlength=AREA_BINS).astype(np.float64)
    tagged = np.bincount(idx, weights=areas, minlength=AREA_BINS)
    return _normalise(typical), _normalise(tagged), edges


def reduce_trials(cfg: TrialConfig, results: Sequence[TrialResult]) -> EstimateSet:
    n_bs = [r.n_bs for r in results]
    n_users = [r.n_users for r in results]
    p_in = _ratio_estimate([r.n_inactive for r in results], n_bs)
    p_sel = _ratio_estimate([r.n_selected for r in results], n_users)
    if cfg.compute_sinr:
        p_succ = _ratio_estimate([r.n_success for r in results], [r.n_selected for r in results])
        p_svc = _ratio_estimate([r.n_success for r in results], n_users)
    else:
        p_succ = p_svc = Estimate(math.nan, math.nan, 0)
    lam_u = cfg.densities.lambda_u
    c_svc = Estimate(p_svc.value * lam_u, p_svc.stderr * lam_u, p_svc.samples)

    typical = _normalise(sum(r.load_counts_typical for r in results))
    tagged = _normalise(sum(r.load_counts_tagged for r in results))
    area_parts = [r.areas for r in results if r.areas is not None]
    areas = np.concatenate(area_parts) if area_parts else np.empty(0)
    hist_typ, hist_tag, edges = area_histograms(areas)
    return EstimateSet(
        p_inactive=p_in,
        p_selection=p_sel,
        p_success=p_succ,
        p_service=p_svc,
        c_service=c_svc,
        empirical_load_pmf_typical=typical,
        empirical_load_pmf_tagged=tagged,
        empirical_area_hist_typical=hist_typ,
        empirical_area_hist_tagged=hist_tag,
        area_bin_edges=edges,
        area_samples=areas,
        n_trials=len(results),
        backend=kernels.BACKEND,
    )


def run_experiment(cfg: TrialConfig, workers: int = 1) -> EstimateSet:
    """Run ``cfg.n_trials`` independent trials and pool them in trial order."""
    trials = range(cfg.n_trials)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: run_trial(cfg, t), trials))
    else:
        results = [run_trial(cfg, t) for t in trials]
    return reduce_trials(cfg, results)
