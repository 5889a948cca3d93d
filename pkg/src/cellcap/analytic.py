"""Closed-form and integral performance formulas for a PPP downlink.

Base stations and mobile users are independent homogeneous PPPs, every user is
served by its nearest BS, and a BS schedules one of its users uniformly at
random on a single resource block.  Cell sizes follow the gamma(3.5) fit for
the Poisson-Voronoi typical cell.

All functions are pure; ``Densities`` and ``Channel`` are frozen value types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

from .numerics import (
    DEFAULT_ABS_TOL,
    DEFAULT_REL_TOL,
    DomainError,
    integrate_from,
    integrate_zero_to_infinity,
    log_gamma,
)

__all__ = [
    "CELL_SHAPE",
    "Channel",
    "Densities",
    "DivergentIntegralError",
    "Metrics",
    "c_service",
    "closed_form_applies",
    "db_to_linear",
    "k_factor",
    "k_prime",
    "load_pmf_support",
    "metrics",
    "metrics_asymptotic_dense_bs",
    "metrics_asymptotic_dense_users",
    "p_inactive",
    "p_selection",
    "p_service",
    "p_success",
    "pdf_cell_area_tagged",
    "pdf_cell_area_typical",
    "pmf_load_tagged",
    "pmf_load_typical",
]

CELL_SHAPE = 3.5
_LOG_SHAPE = math.log(CELL_SHAPE)
_LG_TYPICAL = log_gamma(CELL_SHAPE)
_LG_TAGGED = log_gamma(CELL_SHAPE + 1.0)

_SELECTION_SERIES_CUTOFF = 1e-8

Method = Literal["auto", "quadrature", "closed_form"]


class DivergentIntegralError(DomainError):
    """The interference integral does not converge (pathloss exponent <= 2)."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class Densities:
    """BS and MU intensities in points per unit area."""

    lambda_b: float
    lambda_u: float

    def __post_init__(self) -> None:
        for name in ("lambda_b", "lambda_u"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a finite positive number, got {v!r}")

    @property
    def rho(self) -> float:
        """Users per base station, lambda_u / lambda_b."""
        return self.lambda_u / self.lambda_b


@dataclass(frozen=True)
class Channel:
    """Link-budget parameters.

    ``gamma_hat`` is linear (not dB).  ``shadow_sigma_db`` only affects the
    simulator; the formulas here model pathloss and Rayleigh fading alone.
    """

    alpha: float = 4.0
    gamma_hat: float = 1.0
    noise_power: float = 0.0
    tx_power: float = 1.0
    shadow_sigma_db: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and self.alpha > 2.0):
            raise DivergentIntegralError(
                f"pathloss exponent must exceed 2 (got alpha={self.alpha!r}); "
                "the interference integral diverges"
            )
        if not (math.isfinite(self.gamma_hat) and self.gamma_hat > 0):
            raise DomainError(f"gamma_hat must be positive, got {self.gamma_hat!r}")
        if not (math.isfinite(self.noise_power) and self.noise_power >= 0):
            raise DomainError(f"noise_power must be >= 0, got {self.noise_power!r}")
        if not (math.isfinite(self.tx_power) and self.tx_power > 0):
            raise DomainError(f"tx_power must be positive, got {self.tx_power!r}")
        if not (math.isfinite(self.shadow_sigma_db) and self.shadow_sigma_db >= 0):
            raise DomainError(f"shadow_sigma_db must be >= 0, got {self.shadow_sigma_db!r}")

    @property
    def interference_limited(self) -> bool:
        return self.noise_power == 0.0


@dataclass(frozen=True)
class Metrics:
    p_inactive: float
    p_selection: float
    p_success: float
    p_service: float
    c_service: float
    lambda_i: float
    method: str = field(default="quadrature", compare=False)

    def as_dict(self) -> dict[str, float]:
        return {
            "p_inactive": self.p_inactive,
            "p_selection": self.p_selection,
            "p_success": self.p_success,
            "p_service": self.p_service,
            "c_service": self.c_service,
            "lambda_i": self.lambda_i,
        }


# ---------------------------------------------------------------------------
# cell size and load distributions
# ---------------------------------------------------------------------------


def _check_nonneg(name: str, v: float) -> float:
    v = float(v)
    if not v >= 0.0:
        raise DomainError(f"{name} must be >= 0, got {v!r}")
    return v


def pdf_cell_area_typical(x: float) -> float:
    """Density of the typical cell area, normalised by 1/lambda_b."""
    x = _check_nonneg("x", x)
    if x == 0.0 or math.isinf(x):
        return 0.0
    return math.exp(
        CELL_SHAPE * _LOG_SHAPE - _LG_TYPICAL + (CELL_SHAPE - 1.0) * math.log(x) - CELL_SHAPE * x
    )


def pdf_cell_area_tagged(y: float) -> float:
    """Density of the area of the cell covering a random user (size-biased)."""
    y = _check_nonneg("y", y)
    if y == 0.0 or math.isinf(y):
        return 0.0
    return math.exp(
        (CELL_SHAPE + 1.0) * _LOG_SHAPE - _LG_TAGGED + CELL_SHAPE * math.log(y) - CELL_SHAPE * y
    )


def _check_count(n: int) -> int:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise DomainError(f"n must be a non-negative integer, got {n!r}")
    return int(n)


def _log_pmf(n: int, rho: float, shape: float, lg_shape: float) -> float:
    # 3.5^shape Gamma(n+shape) rho^n / (Gamma(shape) n! (rho+3.5)^(n+shape));
    # the rate stays 3.5 for both the typical and the size-biased cell
    out = (
        shape * _LOG_SHAPE
        + log_gamma(n + shape)
        - lg_shape
        - log_gamma(n + 1.0)
        - (n + shape) * math.log(rho + CELL_SHAPE)
    )
    if n:
        out += n * math.log(rho)
    return out


def pmf_load_typical(n: int, d: Densities) -> float:
    """P[N = n], the number of users in the cell of a random BS."""
    n = _check_count(n)
    return math.exp(_log_pmf(n, d.rho, CELL_SHAPE, _LG_TYPICAL))


def pmf_load_tagged(n: int, d: Densities) -> float:
    """P[N' = n], the number of *other* users sharing a random user's cell."""
    n = _check_count(n)
    return math.exp(_log_pmf(n, d.rho, CELL_SHAPE + 1.0, _LG_TAGGED))


def load_pmf_support(rho: float, tagged: bool = False, tail: float = 1e-15) -> int:
    """Smallest n_max such that summing the PMF over 0..n_max is complete.

    Stops once n > 10 max(rho, 1) and the current term is below ``tail``.
    """
    d = Densities(1.0, rho)
    pmf = pmf_load_tagged if tagged else pmf_load_typical
    floor = 10.0 * max(rho, 1.0)
    n = 0
    while not (n > floor and pmf(n, d) < tail):
        n += 1
    return n


# ---------------------------------------------------------------------------
# activity and selection
# ---------------------------------------------------------------------------


def p_inactive(d: Densities) -> float:
    """Probability that a random BS has no user in its cell."""
    return (1.0 + d.rho / CELL_SHAPE) ** -CELL_SHAPE


def _active_fraction(rho: float) -> float:
    # 1 - (1 + rho/3.5)^-3.5 without cancellation for small rho
    return -math.expm1(-CELL_SHAPE * math.log1p(rho / CELL_SHAPE))


def p_selection(d: Densities) -> float:
    """Probability that a random user is the one its BS schedules."""
    rho = d.rho
    if rho < _SELECTION_SERIES_CUTOFF:
        return 1.0
    return _active_fraction(rho) / rho


# ---------------------------------------------------------------------------
# SINR success
# ---------------------------------------------------------------------------


def k_factor(ch: Channel, rel_tol: float = DEFAULT_REL_TOL, abs_tol: float = DEFAULT_ABS_TOL) -> float:
    """Interference integral gamma^(2/a) * int_{gamma^(-2/a)}^inf du / (1 + u^(a/2))."""
    alpha = ch.alpha
    if not alpha > 2.0:
        raise DivergentIntegralError(f"k diverges for alpha <= 2 (alpha={alpha!r})")
    half = alpha / 2.0
    scale = ch.gamma_hat ** (2.0 / alpha)
    lower = 1.0 / scale

    def f(u: float) -> float:
        return 1.0 / (1.0 + u**half)

    return scale * integrate_from(f, lower, rel_tol, abs_tol).value


def k_prime(gamma_hat: float) -> float:
    """Closed form of the interference integral at alpha = 4."""
    if not gamma_hat > 0:
        raise DomainError(f"gamma_hat must be positive, got {gamma_hat!r}")
    r = math.sqrt(gamma_hat)
    # pi/2 - arctan(1/r) == arctan(r) for r > 0
    return r * math.atan(r)


def closed_form_applies(ch: Channel) -> bool:
    return ch.alpha == 4.0 and ch.noise_power == 0.0


def _resolve(method: Method, ch: Channel) -> bool:
    """True when the closed form should be used."""
    if method == "auto":
        return closed_form_applies(ch)
    if method == "closed_form":
        if not closed_form_applies(ch):
            raise DomainError("closed form requires alpha = 4 and zero noise power")
        return True
    if method == "quadrature":
        return False
    raise ValueError(f"unknown method {method!r}")


def _success_integral(lambda_b: float, lambda_i: float, ch: Channel, k: float) -> float:
    """pi lambda_b int_0^inf exp(-pi (lambda_b + lambda_i k) x - gamma s2 x^(a/2) / s) dx.

    Integrated in v = pi lambda_b x so the integrand decays on an O(1) scale.
    """
    rate = 1.0 + (lambda_i / lambda_b) * k
    half = ch.alpha / 2.0
    noise_coef = ch.gamma_hat * ch.noise_power / ch.tx_power * (math.pi * lambda_b) ** -half

    if noise_coef == 0.0:
        def f(v: float) -> float:
            return math.exp(-rate * v)
    else:
        def f(v: float) -> float:
            return math.exp(-rate * v - noise_coef * v**half)

    return integrate_zero_to_infinity(f).value


def p_success(d: Densities, ch: Channel, method: Method = "auto") -> float:
    """Probability that the scheduled user's SINR exceeds gamma_hat.

    Active interferers are modelled as an independent thinning of the BS
    process with retention probability 1 - p_inactive.
    """
    active = _active_fraction(d.rho)
    if _resolve(method, ch):
        return 1.0 / (1.0 + active * k_prime(ch.gamma_hat))
    return _success_integral(d.lambda_b, d.lambda_b * active, ch, k_factor(ch))


def p_service(d: Densities, ch: Channel, method: Method = "auto") -> float:
    return p_selection(d) * p_success(d, ch, method)


def c_service(d: Densities, ch: Channel, method: Method = "auto") -> float:
    """Density of users that are both scheduled and above the SINR target."""
    return d.lambda_u * p_service(d, ch, method)


def metrics(d: Densities, ch: Channel, method: Method = "auto") -> Metrics:
    closed = _resolve(method, ch)
    pin = p_inactive(d)
    psel = p_selection(d)
    psucc = p_success(d, ch, "closed_form" if closed else "quadrature")
    psvc = psel * psucc
    return Metrics(
        p_inactive=pin,
        p_selection=psel,
        p_success=psucc,
        p_service=psvc,
        c_service=d.lambda_u * psvc,
        lambda_i=d.lambda_b * (1.0 - pin),
        method="closed_form" if closed else "quadrature",
    )


# ---------------------------------------------------------------------------
# asymptotic regimes
# ---------------------------------------------------------------------------


def metrics_asymptotic_dense_bs(d: Densities, ch: Channel, method: Method = "auto") -> Metrics:
    """lambda_b >> lambda_u: every user is scheduled and interferers have density lambda_u.

    ``p_inactive`` is reported as ``1 - rho`` clipped at 0; the
    approximation only makes sense for rho well below 1.
    """
    closed = _resolve(method, ch)
    if closed:
        kp = k_prime(ch.gamma_hat)
        psucc = d.lambda_b / (d.lambda_b + d.lambda_u * kp)
    else:
        psucc = _success_integral(d.lambda_b, d.lambda_u, ch, k_factor(ch))
    return Metrics(
        p_inactive=max(0.0, 1.0 - d.rho),
        p_selection=1.0,
        p_success=psucc,
        p_service=psucc,
        c_service=d.lambda_u * psucc,
        lambda_i=d.lambda_u,
        method="closed_form" if closed else "quadrature",
    )


def metrics_asymptotic_dense_users(d: Densities, ch: Channel, method: Method = "auto") -> Metrics:
    """lambda_u >> lambda_b: no BS is idle, so interferers have density lambda_b.

    Capacity is ``lambda_b * p_success`` regardless of lambda_u.  The
    selection probability 1/rho is clipped at 1 when rho < 1.
    """
    closed = _resolve(method, ch)
    if closed:
        psucc = 1.0 / (1.0 + k_prime(ch.gamma_hat))
    else:
        psucc = _success_integral(d.lambda_b, d.lambda_b, ch, k_factor(ch))
    psel = min(1.0, 1.0 / d.rho)
    return Metrics(
        p_inactive=0.0,
        p_selection=psel,
        p_success=psucc,
        p_service=psel * psucc,
        c_service=min(d.lambda_b, d.lambda_u) * psucc,
        lambda_i=d.lambda_b,
        method="closed_form" if closed else "quadrature",
    )
