"""Mittag-Leffler function and the one-sided stable law on the real line.

Everything here works on the negative real axis (Mittag-Leffler) or on
``z > 0`` (stable density, CDF, survival).  All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
from scipy import integrate, optimize

from .errors import DomainError, NonConvergence
from .laplace import PRECISE_CONFIG, InversionConfig, LaplaceTransform, invert

__all__ = [
    "StabilityIndex",
    "EvalAccuracy",
    "DEFAULT_ACCURACY",
    "mittag_leffler",
    "ml_survival",
    "stable_density_g",
    "stable_density_g_laplace",
    "stable_cdf",
    "stable_sf",
    "as_alpha",
]

_EPS = 2.220446049250313e-16


@dataclass(frozen=True)
class StabilityIndex:
    """Fractional order ``alpha`` with ``0 < alpha < 1``."""

    alpha: float

    def __post_init__(self):
        a = self.alpha
        if not (isinstance(a, (int, float)) and math.isfinite(a) and 0.0 < a < 1.0):
            raise DomainError(f"alpha must lie strictly inside (0, 1), got {a!r}")

    def __float__(self):
        return float(self.alpha)


@dataclass(frozen=True)
class EvalAccuracy:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_terms: int = 10_000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.max_terms >= 1):
            raise ValueError("abs_tol, rel_tol must be > 0 and max_terms >= 1")


DEFAULT_ACCURACY = EvalAccuracy()


def as_alpha(alpha, allow_one: bool = False) -> float:
    """Coerce ``alpha`` (float or StabilityIndex) and check its range."""
    a = float(alpha)
    upper_ok = a <= 1.0 if allow_one else a < 1.0
    if not (math.isfinite(a) and a > 0.0 and upper_ok):
        rng = "(0, 1]" if allow_one else "(0, 1)"
        raise DomainError(f"alpha must lie in {rng}, got {alpha!r}")
    return a


# ---------------------------------------------------------------------------
# Mittag-Leffler
# ---------------------------------------------------------------------------


def _ml_series(a, y, acc):
    """Power series for E_a(-y); returns (value, error estimate) or None."""
    logy = math.log(y)
    parts = []
    err = 0.0
    peak = -math.inf
    budget = math.log(acc.abs_tol / (64 * _EPS))
    for k in range(acc.max_terms):
        lt = k * logy - math.lgamma(a * k + 1.0)
        if lt > budget:
            return None
        peak = max(peak, lt)
        mag = math.exp(lt)
        parts.append(mag if k % 2 == 0 else -mag)
        err += mag * (2.0 + abs(lt)) * _EPS
        if lt < peak and mag < 1e-3 * acc.abs_tol and mag < _EPS * math.exp(peak):
            return math.fsum(parts), err + mag
    return None


def _ml_asymptotic(a, y, acc):
    """Large-argument expansion E_a(-y) ~ sum_k (-1)^{k+1} y^{-k} / Gamma(1 - a k).

    ``1/Gamma(1 - a k)`` is written as ``Gamma(a k) sin(pi a k) / pi`` so that
    poles of Gamma at non-positive integers give exact zeros.
    """
    logy = math.log(y)
    parts = []
    prev = math.inf
    for k in range(1, acc.max_terms + 1):
        lb = math.lgamma(a * k) - k * logy - math.log(math.pi)
        bound = math.exp(lb)
        if bound > prev:
            return None
        if bound < 0.1 * acc.abs_tol:
            return math.fsum(parts), bound
        term = bound * math.sin(math.pi * a * k)
        parts.append(term if k % 2 == 1 else -term)
        prev = bound
    return None


def _ml_spectral(a, y, acc):
    """Integral form of E_a(-y) for 0 < a < 1.

    ``E_a(-y) = sin(a pi)/(a pi) int_0^inf exp(-v^{1/a}) y /
    (v^2 + 2 v y cos(a pi) + y^2) dv``, the spectral representation of the
    completely monotone function ``t -> E_a(-t^a)`` after ``r = v^{1/a}``.
    """
    c, s = math.cos(math.pi * a), math.sin(math.pi * a)
    front = s / (a * math.pi)
    v_hi = 60.0**a
    centre = max(-y * c, 0.0)
    width = y * s

    def f(v):
        return math.exp(-(v ** (1.0 / a))) * y / ((v + y * c) ** 2 + width * width)

    pts = sorted({p for p in (centre, centre - width, centre + width, centre + 5 * width) if 0 < p < v_hi})
    val, err = integrate.quad(
        f, 0.0, v_hi, points=pts or None, epsabs=0.1 * acc.abs_tol / front,
        epsrel=1e-12, limit=400,
    )
    return front * val, front * err


def mittag_leffler(alpha, x: float, acc: EvalAccuracy = DEFAULT_ACCURACY) -> float:
    """One-parameter Mittag-Leffler function ``E_alpha(x)`` for ``x <= 0``.

    Uses the power series while its largest term stays small enough for the
    requested absolute accuracy, the asymptotic expansion for large ``-x``,
    and a spectral integral in between.  ``alpha = 1`` is admitted and
    returns ``exp(x)``.

    Raises
    ------
    DomainError
        For ``x > 0`` or ``alpha`` outside ``(0, 1]``.
    NonConvergence
        If no branch reaches ``acc.abs_tol``.
    """
    a = as_alpha(alpha, allow_one=True)
    x = float(x)
    if not (x <= 0.0) or math.isnan(x):
        raise DomainError(f"mittag_leffler is implemented for x <= 0, got {x}")
    if x == 0.0:
        return 1.0
    if a == 1.0:
        return math.exp(x)
    y = -x
    if math.isinf(y):
        return 0.0
    for branch in (_ml_series, _ml_asymptotic):
        res = branch(a, y, acc)
        if res is not None and res[1] <= acc.abs_tol:
            return min(max(res[0], 0.0), 1.0)
    val, err = _ml_spectral(a, y, acc)
    if err > acc.abs_tol:
        raise NonConvergence(f"E_{a}({x}) reached only {err:.2e} absolute accuracy")
    return min(max(val, 0.0), 1.0)


def ml_survival(alpha, lambda_: float, t: float, acc: EvalAccuracy = DEFAULT_ACCURACY) -> float:
    """``P(J > t) = E_alpha(-(lambda t)^alpha)`` for a Mittag-Leffler waiting time."""
    if not lambda_ > 0:
        raise DomainError("lambda_ must be positive")
    if not t >= 0:
        raise DomainError("t must be nonnegative")
    a = as_alpha(alpha, allow_one=True)
    return mittag_leffler(a, -((lambda_ * t) ** a), acc)


# ---------------------------------------------------------------------------
# One-sided stable law, E exp(-u L) = exp(-u^alpha)
# ---------------------------------------------------------------------------


def _g_series(a, z, acc, survival=False):
    """Series in ``z^{-alpha}``; density, or survival if ``survival``.

    Returns (value, error estimate).
    """
    logz = math.log(z)
    parts = []
    err = 0.0
    peak = -math.inf
    for k in range(1, acc.max_terms + 1):
        if survival:
            lm = math.lgamma(a * k) - math.lgamma(k + 1.0) - a * k * logz
        else:
            lm = math.lgamma(a * k + 1.0) - math.lgamma(k + 1.0) - (a * k + 1.0) * logz
        lm -= math.log(math.pi)
        if k == 1:
            ceiling = min(lm + math.log(acc.rel_tol / _EPS), 700.0)
        elif lm > ceiling:
            # cancellation alone would exceed rel_tol; leave it to the integral
            return math.inf, math.inf
        peak = max(peak, lm)
        mag = math.exp(lm)
        term = mag * math.sin(math.pi * k * a)
        parts.append(term if k % 2 == 1 else -term)
        err += mag * (2.0 + abs(lm)) * _EPS
        if lm < peak and mag < 1e-18 * math.exp(peak):
            break
    else:
        return math.fsum(parts), math.inf
    return math.fsum(parts), err + mag


def _log_zolotarev(a, u):
    return (
        a * math.log(math.sin(a * u))
        + (1.0 - a) * math.log(math.sin((1.0 - a) * u))
        - math.log(math.sin(u))
    ) / (1.0 - a)


def _zolotarev(a, z, kind):
    """Integrals over Kanter's representation ``L = (A(U)/E)^{(1-a)/a}``.

    With ``q(u) = z^{-a/(1-a)} A(u)``:
    CDF ``G(z) = (1/pi) int_0^pi exp(-q) du`` and density
    ``g(z) = a / ((1-a) pi z) int_0^pi q exp(-q) du``.
    """
    logw = -a / (1.0 - a) * math.log(z)

    def logq(u):
        return logw + _log_zolotarev(a, u)

    if kind == "cdf":
        def f(u):
            lq = logq(u)
            return 0.0 if lq > 700.0 else math.exp(-math.exp(lq))
    else:
        def f(u):
            lq = logq(u)
            return 0.0 if lq > 700.0 else math.exp(lq - math.exp(lq))

    lo, hi = 1e-12, math.pi - 1e-12
    pts = []
    if logq(lo) < 0.0 < logq(hi):
        u1 = optimize.brentq(logq, lo, hi, xtol=1e-14)
        pts.append(u1)
        for target in (-3.0, 3.0):
            if logq(lo) < target < logq(hi):
                pts.append(optimize.brentq(lambda u: logq(u) - target, lo, hi, xtol=1e-14))
    val, err = integrate.quad(
        f, 0.0, math.pi, points=sorted(pts) or None, epsabs=0.0, epsrel=1e-12, limit=400
    )
    if kind == "cdf":
        return val / math.pi, err / math.pi
    front = a / ((1.0 - a) * math.pi * z)
    return front * val, front * err


def stable_density_g(alpha, z: float, acc: EvalAccuracy = DEFAULT_ACCURACY) -> float:
    """Density ``g_alpha(z)`` of ``L_alpha(1)`` (Laplace transform ``exp(-s^alpha)``).

    The alternating series in ``z^{-alpha}`` is used when its estimated
    cancellation error is below ``acc.rel_tol``; for small ``z`` the value
    comes from Zolotarev's integral over ``(0, pi)``.
    """
    a = as_alpha(alpha)
    z = float(z)
    if not z > 0:
        raise DomainError(f"stable density needs z > 0, got {z}")
    if math.isinf(z):
        return 0.0
    val, err = _g_series(a, z, acc)
    if 0 < val < math.inf and err <= acc.rel_tol * val:
        return val
    zval, zerr = _zolotarev(a, z, "pdf")
    if zerr <= max(acc.rel_tol * zval, acc.abs_tol * 1e-3):
        return max(zval, 0.0)
    raise NonConvergence(f"g_{a}({z}): series error {err:.2e}, integral error {zerr:.2e}")


def stable_sf(alpha, z: float, acc: EvalAccuracy = DEFAULT_ACCURACY) -> float:
    """``P(L_alpha(1) > z)``."""
    a = as_alpha(alpha)
    z = float(z)
    if not z > 0:
        return 1.0
    if math.isinf(z):
        return 0.0
    val, err = _g_series(a, z, acc, survival=True)
    if 0 < val < math.inf and err <= acc.rel_tol * val:
        return min(val, 1.0)
    cdf, cerr = _zolotarev(a, z, "cdf")
    if cerr > acc.abs_tol:
        raise NonConvergence(f"stable survival at z={z}: error {cerr:.2e}")
    return min(max(1.0 - cdf, 0.0), 1.0)


def stable_cdf(alpha, z: float, acc: EvalAccuracy = DEFAULT_ACCURACY) -> float:
    """``P(L_alpha(1) <= z)``, accurate in relative terms for small ``z``."""
    a = as_alpha(alpha)
    z = float(z)
    if not z > 0:
        return 0.0
    if math.isinf(z):
        return 1.0
    val, err = _g_series(a, z, acc, survival=True)
    if 0 < val < 0.5 and err <= acc.rel_tol * val:
        return 1.0 - val
    cdf, cerr = _zolotarev(a, z, "cdf")
    if cerr > max(acc.rel_tol * cdf, 1e-300):
        raise NonConvergence(f"stable cdf at z={z}: error {cerr:.2e}")
    return min(max(cdf, 0.0), 1.0)


def _exp_neg_power(a):
    def f_bar(s):
        return mpmath.exp(-(s**a))

    return LaplaceTransform(f_bar)


def stable_density_g_laplace(alpha, z: float, cfg: InversionConfig = PRECISE_CONFIG) -> float:
    """``g_alpha(z)`` by numerically inverting ``s -> exp(-s^alpha)``."""
    a = as_alpha(alpha)
    if not z > 0:
        raise DomainError(f"stable density needs z > 0, got {z}")
    return invert(_exp_neg_power(a), float(z), cfg)
