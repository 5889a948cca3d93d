"""Special functions and semi-infinite quadrature.

Nothing in here knows about cellular networks; the analytic engine builds on
these two primitives.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

__all__ = [
    "ConvergenceError",
    "DomainError",
    "QuadratureResult",
    "integrate",
    "integrate_from",
    "integrate_zero_to_infinity",
    "log_gamma",
]

DEFAULT_REL_TOL = 1e-9
DEFAULT_ABS_TOL = 1e-12
MAX_EVALUATIONS = 1_000_000


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class ConvergenceError(ArithmeticError):
    """Adaptive quadrature ran out of budget before meeting its tolerance."""

    def __init__(self, message: str, best_estimate: float, abs_error_estimate: float, evaluations: int):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.abs_error_estimate = abs_error_estimate
        self.evaluations = evaluations


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int

    def __float__(self) -> float:
        return self.value


# ---------------------------------------------------------------------------
# log-gamma
# ---------------------------------------------------------------------------

_EULER_GAMMA = 0.57721566490153286061
_HALF_LOG_2PI = 0.91893853320467274178

# Bernoulli numbers B_2k / (2k (2k-1)) for the Stirling tail.
_STIRLING = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)


def _zeta_table(kmax: int) -> tuple[float, ...]:
    # zeta(k) - 1 for k = 2..kmax; partial sum plus Euler-Maclaurin tail
    n = 48
    out = []
    for k in range(2, kmax + 1):
        s = math.fsum(m ** -k for m in range(2, n))
        tail = (
            n ** (1 - k) / (k - 1)
            + 0.5 * n ** -k
            + k * n ** (-k - 1) / 12.0
            - k * (k + 1) * (k + 2) * n ** (-k - 3) / 720.0
            + k * (k + 1) * (k + 2) * (k + 3) * (k + 4) * n ** (-k - 5) / 30240.0
        )
        out.append(s + tail)
    return tuple(out)


_ZETA_M1 = _zeta_table(64)


def _log_gamma_1p(z: float) -> float:
    """ln Gamma(1 + z) for |z| <= 0.5 via the zeta power series."""
    # ln Gamma(1+z) = -gamma z + sum_{k>=2} (-1)^k zeta(k) z^k / k.  The
    # zeta(k) = 1 + (zeta(k) - 1) split lets the "1" parts sum to
    # -ln(1+z) + z, which keeps the series short.
    acc = 0.0
    zk = -z
    for k, zm1 in enumerate(_ZETA_M1, start=2):
        zk *= -z
        term = zm1 * zk / k
        acc += term
        if abs(term) < 1e-18 * (abs(acc) + 1e-300):
            break
    return z * (1.0 - _EULER_GAMMA) - math.log1p(z) + acc


def _stirling(x: float) -> float:
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    p = inv
    for c in _STIRLING:
        series += c * p
        p *= inv2
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + series


def log_gamma(x: float) -> float:
    """Natural logarithm of the gamma function for real ``x > 0``.

    Accurate to ~1e-15 relative away from the zeros at 1 and 2, and to a few
    ulps in absolute terms next to them.
    """
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"log_gamma requires a finite x > 0, got {x!r}")
    if x < 0.5:
        # one upward step keeps the argument in the series' disc
        return _log_gamma_1p(x) - math.log(x)
    if x <= 1.5:
        return _log_gamma_1p(x - 1.0)
    if x <= 2.5:
        return math.log(x - 1.0) + _log_gamma_1p(x - 2.0)
    if x >= 10.0:
        return _stirling(x)
    # 2.5 < x < 10: step down into [1.5, 2.5]; every term added is positive
    acc = 0.0
    while x > 2.5:
        x -= 1.0
        acc += math.log(x)
    return acc + log_gamma(x)


# ---------------------------------------------------------------------------
# adaptive Simpson
# ---------------------------------------------------------------------------


def _simpson(fa: float, fm: float, fb: float, h: float) -> float:
    return h * (fa + 4.0 * fm + fb) / 6.0


def _adaptive_simpson(
    g: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float,
    abs_tol: float,
    budget: int,
    initial_panels: int = 16,
) -> QuadratureResult:
    """Globally adaptive Simpson rule on a finite interval.

    Panels are kept in a max-heap keyed by their Richardson error estimate and
    the worst one is bisected until the summed estimate meets the tolerance.
    """
    evals = 0

    def ev(t: float) -> float:
        nonlocal evals
        evals += 1
        try:
            v = g(t)
        except OverflowError as exc:
            raise ConvergenceError(f"integrand overflowed at mapped point t={t!r}", math.nan, math.inf, evals) from exc
        if not math.isfinite(v):
            raise ConvergenceError(
                f"integrand is not finite at mapped point t={t!r}", math.nan, math.inf, evals
            )
        return v

    edges = [a + (b - a) * i / initial_panels for i in range(initial_panels + 1)]
    fe = [ev(t) for t in edges]
    heap: list[tuple[float, int, float, float, float, float, float, float, float, float, float]] = []
    total = 0.0
    err_total = 0.0
    seq = 0

    def push(lo, hi, flo, fq1, fmid, fq3, fhi):
        nonlocal total, err_total, seq
        h = hi - lo
        whole = _simpson(flo, fmid, fhi, h)
        halves = _simpson(flo, fq1, fmid, 0.5 * h) + _simpson(fmid, fq3, fhi, 0.5 * h)
        err = abs(halves - whole) / 15.0
        val = halves + (halves - whole) / 15.0
        total += val
        err_total += err
        heapq.heappush(heap, (-err, seq, lo, hi, flo, fq1, fmid, fq3, fhi, val, err))
        seq += 1

    for i in range(initial_panels):
        lo, hi = edges[i], edges[i + 1]
        mid = 0.5 * (lo + hi)
        push(lo, hi, fe[i], ev(0.5 * (lo + mid)), ev(mid), ev(0.5 * (mid + hi)), fe[i + 1])

    while err_total > max(rel_tol * abs(total), abs_tol):
        if evals + 4 > budget:
            raise ConvergenceError(
                f"quadrature did not converge within {budget} evaluations "
                f"(estimate {total!r}, error {err_total!r})",
                total,
                err_total,
                evals,
            )
        _, _, lo, hi, flo, fq1, fmid, fq3, fhi, val, err = heapq.heappop(heap)
        total -= val
        err_total -= err
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            raise ConvergenceError(
                "quadrature panel shrank below machine resolution", total + val, err_total + err, evals
            )
        left_q = 0.5 * (lo + mid)
        right_q = 0.5 * (mid + hi)
        push(lo, mid, flo, ev(0.5 * (lo + left_q)), fq1, ev(0.5 * (left_q + mid)), fmid)
        push(mid, hi, fmid, ev(0.5 * (mid + right_q)), fq3, ev(0.5 * (right_q + hi)), fhi)
        # re-sum occasionally to shed accumulated rounding from the running totals
        if seq % 512 == 0:
            total = math.fsum(e[9] for e in heap)
            err_total = math.fsum(e[10] for e in heap)

    total = math.fsum(e[9] for e in heap)
    err_total = math.fsum(e[10] for e in heap)
    return QuadratureResult(total, err_total, evals)


def _check_tols(rel_tol: float, abs_tol: float) -> None:
    if not (rel_tol > 0 and abs_tol > 0):
        raise DomainError("tolerances must be positive")


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    max_evaluations: int = MAX_EVALUATIONS,
) -> QuadratureResult:
    """Integrate ``f`` over the finite interval ``[a, b]``."""
    _check_tols(rel_tol, abs_tol)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError("integrate() needs finite limits")
    if a == b:
        return QuadratureResult(0.0, 0.0, 1)
    if b < a:
        r = integrate(f, b, a, rel_tol, abs_tol, max_evaluations)
        return QuadratureResult(-r.value, r.abs_error_estimate, r.evaluations)
    return _adaptive_simpson(f, a, b, rel_tol, abs_tol, max_evaluations)


def integrate_zero_to_infinity(
    f: Callable[[float], float],
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    max_evaluations: int = MAX_EVALUATIONS,
) -> QuadratureResult:
    """Integrate ``f`` over ``(0, inf)`` using ``x = t / (1 - t)``.

    Meant for integrands with exponential-type tails; the mapped integrand is
    taken to vanish at ``t = 1``.

    >>> round(integrate_zero_to_infinity(lambda x: math.exp(-x)).value, 12)
    1.0
    """
    _check_tols(rel_tol, abs_tol)

    def g(t: float) -> float:
        if t >= 1.0:
            return 0.0
        s = 1.0 - t
        x = t / s
        if math.isinf(x):
            return 0.0
        return f(x) / (s * s)

    return _adaptive_simpson(g, 0.0, 1.0, rel_tol, abs_tol, max_evaluations)


def integrate_from(
    f: Callable[[float], float],
    a: float,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    max_evaluations: int = MAX_EVALUATIONS,
) -> QuadratureResult:
    """Integrate ``f`` over ``(a, inf)``.

    The tail is stretched exponentially, ``x = a + expm1(t / (1 - t))``, so
    algebraic decay ``x**-p`` with ``p > 1`` turns into exponential decay in
    the mapped variable.  Tails decaying like ``1/x`` or slower never settle and
    end in :class:`ConvergenceError`.
    """
    _check_tols(rel_tol, abs_tol)
    a = float(a)
    if not math.isfinite(a):
        raise DomainError(f"lower limit must be finite, got {a!r}")

    def g(t: float) -> float:
        if t >= 1.0:
            return 0.0
        s = 1.0 - t
        u = t / s
        if u > 700.0:
            # exp(u) overflows; only a tail that has not decayed would matter here
            return _tail_guard(f, a, u, s)
        e = math.exp(u)
        return f(a + (e - 1.0)) * e / (s * s)

    return _adaptive_simpson(g, 0.0, 1.0, rel_tol, abs_tol, max_evaluations)


def _tail_guard(f: Callable[[float], float], a: float, u: float, s: float) -> float:
    # f(x) * x with x ~ e^u: evaluate in logs to avoid inf * 0
    x = a + math.exp(min(u, 709.0))
    fx = f(x)
    if fx == 0.0:
        return 0.0
    log_val = math.log(abs(fx)) + u - 2.0 * math.log(s)
    if log_val > 700.0:
        return math.inf
    return math.copysign(math.exp(log_val), fx)
