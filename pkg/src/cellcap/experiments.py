"""Parameter sweeps, figure presets and their CSV / gnuplot output."""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import analytic, mcsim
from .analytic import Channel, Densities, db_to_linear
from .numerics import ConvergenceError, DomainError

METRICS = ("p_inactive", "p_selection", "p_success", "p_service", "c_service")
PATHS = (
    "analytic",
    "closed_form",
    "monte_carlo",
    "monte_carlo_shadowed",
    "asymptotic_dense_bs",
    "asymptotic_dense_users",
)
PARAMETERS = ("lambda_b", "lambda_u", "gamma_hat_db", "alpha")
PARAMETER_ALIASES = {"gamma_db": "gamma_hat_db", "gamma": "gamma_hat_db"}
FIGURES = ("fig2a", "fig2b", "fig3a", "fig3b", "fig4")
FIG4_ALPHAS = (2.5, 3.0, 3.5, 4.0)
DEFAULT_USER_SAMPLES = 100_000
FIGURE_SHADOW_DB = 8.0


@dataclass(frozen=True)
class FixedParams:
    """Everything a sweep holds constant; gamma in dB as on the command line."""

    lambda_b: float = 30.0
    lambda_u: float = 30.0
    gamma_hat_db: float = 0.0
    alpha: float = 4.0
    noise: float = 0.0
    power: float = 1.0
    shadow_db: float = 0.0

    def with_value(self, parameter: str, value: float) -> "FixedParams":
        return replace(self, **{parameter: value})

    def densities(self) -> Densities:
        return Densities(self.lambda_b, self.lambda_u)

    def channel(self, shadow_db: float | None = None) -> Channel:
        return Channel(
            alpha=self.alpha,
            gamma_hat=db_to_linear(self.gamma_hat_db),
            noise_power=self.noise,
            tx_power=self.power,
            shadow_sigma_db=self.shadow_db if shadow_db is None else shadow_db,
        )


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    fixed: FixedParams = FixedParams()
    paths: tuple[str, ...] = ("analytic",)
    metrics: tuple[str, ...] = METRICS
    seed: int = 42
    user_samples: int = DEFAULT_USER_SAMPLES
    n_trials: int | None = None
    workers: int = 1
    interference_model: str = "dependent"
    shadow_db: float = FIGURE_SHADOW_DB  # for the monte_carlo_shadowed path

    def __post_init__(self) -> None:
        param = PARAMETER_ALIASES.get(self.parameter, self.parameter)
        if param not in PARAMETERS:
            raise DomainError(f"unknown sweep parameter {self.parameter!r}; choose from {', '.join(PARAMETERS)}")
        object.__setattr__(self, "parameter", param)
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise DomainError("sweep needs at least one value")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise DomainError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", vals)
        if not self.paths:
            raise DomainError("at least one path is required")
        for p in self.paths:
            if p not in PATHS:
                raise DomainError(f"unknown path {p!r}; choose from {', '.join(PATHS)}")
        for m in self.metrics:
            if m not in METRICS:
                raise DomainError(f"unknown metric {m!r}")
        if self.interference_model not in ("dependent", "independent"):
            raise DomainError(f"unknown thinning model {self.interference_model!r}")

    def columns(self) -> list[str]:
        cols = [self.parameter]
        for p in self.paths:
            for m in self.metrics:
                cols.append(f"{p}_{m}")
                if p.startswith("monte_carlo"):
                    cols.append(f"{p}_{m}_se")
        return cols


@dataclass
class ResultRow:
    value: float
    columns: dict[str, float] = field(default_factory=dict)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def sweep_values(start: float, stop: float, step: float) -> tuple[float, ...]:
    """``start, start+step, ...`` up to ``stop`` inclusive, free of float drift."""
    if not step > 0:
        raise DomainError("--step must be positive")
    if stop < start:
        raise DomainError("--to must not be below --from")
    n = int(math.floor((stop - start) / step + 1e-9))
    return tuple(round(start + i * step, 12) for i in range(n + 1))


def _from_metrics(m: analytic.Metrics, metrics: Sequence[str], path: str) -> dict[str, float]:
    d = m.as_dict()
    return {f"{path}_{k}": d[k] for k in metrics}


def _from_estimates(e: mcsim.EstimateSet, metrics: Sequence[str], path: str) -> dict[str, float]:
    out = {}
    for k in metrics:
        est = getattr(e, k)
        out[f"{path}_{k}"] = est.value
        out[f"{path}_{k}_se"] = est.stderr
    return out


def _run_path(spec: SweepSpec, params: FixedParams, path: str) -> dict[str, float]:
    d = params.densities()
    if path == "analytic":
        return _from_metrics(analytic.metrics(d, params.channel(), "quadrature"), spec.metrics, path)
    if path == "closed_form":
        return _from_metrics(analytic.metrics(d, params.channel(), "closed_form"), spec.metrics, path)
    if path == "asymptotic_dense_bs":
        return _from_metrics(analytic.metrics_asymptotic_dense_bs(d, params.channel()), spec.metrics, path)
    if path == "asymptotic_dense_users":
        return _from_metrics(analytic.metrics_asymptotic_dense_users(d, params.channel()), spec.metrics, path)
    ch = params.channel(spec.shadow_db if path == "monte_carlo_shadowed" else None)
    window = mcsim.SimWindow.auto(d)
    trials = spec.n_trials or mcsim.trials_for_user_samples(d, window, spec.user_samples)
    cfg = mcsim.TrialConfig(
        densities=d,
        channel=ch,
        window=window,
        master_seed=spec.seed,
        n_trials=trials,
        interference_model=spec.interference_model,
        compute_sinr=any(m in spec.metrics for m in ("p_success", "p_service", "c_service")),
        area_trials=0,
    )
    return _from_estimates(mcsim.run_experiment(cfg, spec.workers), spec.metrics, path)


def run_sweep(spec: SweepSpec) -> list[ResultRow]:
    """Evaluate every requested path at every swept value, in sweep order.

    A path that cannot be evaluated at a row (invalid parameters, closed form
    outside its domain, quadrature failure) leaves NaN in its columns and its
    message in ``row.error``; other paths and later rows still run.  Monte
    Carlo rows all use the same master seed (common random numbers).
    """
    rows = []
    for v in spec.values:
        params = spec.fixed.with_value(spec.parameter, v)
        row = ResultRow(v)
        errors = []
        for p in spec.paths:
            try:
                row.columns.update(_run_path(spec, params, p))
            except (DomainError, ConvergenceError, ValueError) as exc:
                errors.append(f"{p}: {exc}")
                for c in spec.columns()[1:]:
                    if c.startswith(p + "_") and not _belongs_to_longer_path(c, p, spec.paths):
                        row.columns[c] = math.nan
        if errors:
            row.error = "; ".join(errors)
        rows.append(row)
    return rows


def _belongs_to_longer_path(column: str, path: str, paths: Sequence[str]) -> bool:
    # "monte_carlo_" is a prefix of "monte_carlo_shadowed_..."
    return any(q != path and q.startswith(path) and column.startswith(q + "_") for q in paths)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def rows_to_csv(spec: SweepSpec, rows: Sequence[ResultRow]) -> str:
    header = spec.columns()
    with_error = any(r.failed for r in rows)
    if with_error:
        header = header + ["error"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        line = [_fmt(r.value)] + [_fmt(r.columns[c]) for c in spec.columns()[1:]]
        if with_error:
            line.append(r.error or "")
        w.writerow(line)
    return buf.getvalue()


def table_to_csv(header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# figure presets
# ---------------------------------------------------------------------------


def _gnuplot(csv_name: str, title: str, xlabel: str, ylabel: str, series: Sequence[tuple[int, str, str]]) -> str:
    lines = [
        "# gnuplot script; run with: gnuplot -p " + Path(csv_name).with_suffix(".gp").name,
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set grid",
    ]
    plots = [f"'{csv_name}' using 1:{col} with {style} title '{name}'" for col, name, style in series]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def _lambda_b_grid() -> tuple[float, ...]:
    return sweep_values(5.0, 100.0, 5.0)


def _figure_sweep(name: str, seed: int, user_samples: int, workers: int, shadow_db: float) -> SweepSpec:
    fixed = FixedParams(lambda_u=30.0, gamma_hat_db=0.0, alpha=4.0, noise=0.0)
    if name == "fig2b":
        return SweepSpec(
            "lambda_b", _lambda_b_grid(), fixed, ("analytic", "monte_carlo"),
            ("p_inactive", "p_selection"), seed, user_samples, workers=workers,
        )
    metric = "p_service" if name == "fig3a" else "c_service"
    paths: tuple[str, ...] = ("closed_form", "analytic", "monte_carlo")
    if shadow_db > 0:
        paths += ("monte_carlo_shadowed",)
    return SweepSpec(
        "lambda_b", _lambda_b_grid(), fixed, paths, (metric,), seed, user_samples,
        workers=workers, shadow_db=shadow_db,
    )


def cell_area_config(seed: int = 42, user_samples: int = DEFAULT_USER_SAMPLES) -> mcsim.TrialConfig:
    """Simulation behind fig2a: lambda_b = lambda_u = 30, areas from every trial."""
    d = Densities(30.0, 30.0)
    window = mcsim.SimWindow.auto(d)
    trials = mcsim.trials_for_user_samples(d, window, user_samples)
    return mcsim.TrialConfig(d, Channel(), window, seed, trials, compute_sinr=False, area_trials=trials)


def figure_sweep_spec(
    name: str,
    seed: int = 42,
    user_samples: int = DEFAULT_USER_SAMPLES,
    workers: int = 1,
    shadow_db: float = 0.0,
) -> SweepSpec:
    """The sweep behind fig2b, fig3a or fig3b."""
    if name not in ("fig2b", "fig3a", "fig3b"):
        raise DomainError(f"{name!r} is not a sweep figure")
    return _figure_sweep(name, seed, user_samples, workers, shadow_db)


def figure_table(
    name: str,
    seed: int = 42,
    user_samples: int = DEFAULT_USER_SAMPLES,
    workers: int = 1,
    shadow_db: float = 0.0,
) -> tuple[str, str]:
    """CSV text and gnuplot script for one preset (nothing written to disk)."""
    if name not in FIGURES:
        raise DomainError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    csv_name = f"{name}.csv"

    if name == "fig2a":
        est = mcsim.run_experiment(cell_area_config(seed, user_samples), workers)
        edges = est.area_bin_edges
        width = edges[1] - edges[0]
        rows = []
        for i in range(len(edges) - 1):
            mid = 0.5 * (edges[i] + edges[i + 1])
            rows.append((
                mid,
                analytic.pdf_cell_area_typical(mid),
                analytic.pdf_cell_area_tagged(mid),
                est.empirical_area_hist_typical[i] / width,
                est.empirical_area_hist_tagged[i] / width,
            ))
        header = ["area", "f_x", "f_y", "monte_carlo_typical", "monte_carlo_tagged"]
        script = _gnuplot(csv_name, "Voronoi cell size", "normalized area", "density", [
            (2, "f_X", "lines"), (3, "f_Y", "lines"),
            (4, "typical cell (MC)", "points"), (5, "cell of a random MU (MC)", "points"),
        ])
        return table_to_csv(header, rows), script

    if name == "fig4":
        lbs = tuple(float(v) for v in _lambda_b_grid())
        header = ["lambda_b"] + [f"c_service_alpha_{a:g}" for a in FIG4_ALPHAS]
        rows = []
        for lb in lbs:
            d = Densities(lb, 30.0)
            rows.append([lb] + [analytic.c_service(d, Channel(alpha=a), "quadrature") for a in FIG4_ALPHAS])
        script = _gnuplot(csv_name, "Service capacity vs pathloss exponent", "lambda_b", "C_service",
                          [(i + 2, f"alpha={a:g}", "linespoints") for i, a in enumerate(FIG4_ALPHAS)])
        return table_to_csv(header, rows), script

    spec = _figure_sweep(name, seed, user_samples, workers, shadow_db)
    rows = run_sweep(spec)
    cols = spec.columns()
    series = [
        (i + 1, c, "points" if c.startswith("monte_carlo") else "lines")
        for i, c in enumerate(cols) if i and not c.endswith("_se")
    ]
    ylabel = {"fig2b": "probability", "fig3a": "p_service", "fig3b": "C_service"}[name]
    script = _gnuplot(csv_name, name, "lambda_b", ylabel, series)
    return rows_to_csv(spec, rows), script


def figure_preset(
    name: str,
    seed: int,
    out_dir: str | os.PathLike[str],
    user_samples: int = DEFAULT_USER_SAMPLES,
    workers: int = 1,
    shadow_db: float = 0.0,
) -> list[Path]:
    """Write ``<name>.csv`` and ``<name>.gp`` into ``out_dir``; returns both paths."""
    text, script = figure_table(name, seed, user_samples, workers, shadow_db)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    gp_path = out / f"{name}.gp"
    csv_path.write_text(text)
    gp_path.write_text(script)
    return [csv_path, gp_path]


def thinning_comparison(
    fixed: FixedParams,
    models: Sequence[str] = ("dependent", "independent"),
    seed: int = 42,
    user_samples: int = DEFAULT_USER_SAMPLES,
    n_trials: int | None = None,
    workers: int = 1,
) -> dict[str, mcsim.EstimateSet]:
    """Simulated service probability under true and independent thinning."""
    d = fixed.densities()
    ch = fixed.channel()
    window = mcsim.SimWindow.auto(d)
    trials = n_trials or mcsim.trials_for_user_samples(d, window, user_samples)
    out = {}
    for model in models:
        cfg = mcsim.TrialConfig(d, ch, window, seed, trials, model, area_trials=0)
        out[model] = mcsim.run_experiment(cfg, workers)
    return out


def load_pmf_table(est: mcsim.EstimateSet, d: Densities, n_max: int = 10) -> np.ndarray:
    """Rows of ``n, empirical typical, model typical, empirical tagged, model tagged``."""
    rows = []
    for n in range(n_max + 1):
        rows.append((
            n,
            est.empirical_load_pmf_typical[n],
            analytic.pmf_load_typical(n, d),
            est.empirical_load_pmf_tagged[n],
            analytic.pmf_load_tagged(n, d),
        ))
    return np.array(rows)
