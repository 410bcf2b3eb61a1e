"""The alpha-stable subordinator ``L_alpha`` and its inverse ``Y_alpha``.

``Y_alpha(t) = inf{u : L_alpha(u) > t}``.  First passage duality together with
self-similarity gives ``P(Y_alpha(t) <= x) = P(L_alpha(1) >= t x^{-1/alpha})``,
which is how CDF and tail values are computed here.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, QuadratureFailure, TailLocationFailure
from .laplace import PRECISE_CONFIG, InversionConfig, LaplaceTransform, invert
from .specfun import (
    StabilityIndex,
    as_alpha,
    mittag_leffler,
    stable_cdf,
    stable_density_g,
    stable_sf,
)

__all__ = [
    "RngStream",
    "InverseSubordinatorLaw",
    "DensityGrid",
    "inv_stable_density",
    "inv_stable_density_via_laplace",
    "inverse_subordinator_cdf",
    "inverse_subordinator_sf",
    "inverse_subordinator_mean",
    "inverse_subordinator_ppf",
    "locate_upper_tail",
    "ml_laplace_identity_check",
    "build_density_grid",
    "build_limit_grid",
    "sample_stable_subordinator",
    "sample_inverse_subordinator",
    "limit_density_h_beta",
]

TAIL_PROB = 1e-6
_U53 = 2.0**-53


class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Streams with different ids are derived through ``numpy.random.SeedSequence``
    spawn keys, so they are statistically independent.  Not thread-safe:
    give each worker its own stream.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        for name, v in (("seed", seed), ("stream_id", stream_id)):
            if not (isinstance(v, (int, np.integer)) and 0 <= int(v) < 2**64):
                raise ValueError(f"{name} must be an integer in [0, 2**64)")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.gen = np.random.Generator(np.random.PCG64(ss))
        self.counter = 0

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    def uniform(self, size=None):
        """Uniform variates on the open interval (0, 1); one 53-bit draw each."""
        k = self.gen.integers(0, 2**53, size=size, dtype=np.int64)
        self.counter += 1 if size is None else int(np.prod(size))
        return (k + 0.5) * _U53

    def exponential(self, size=None):
        return -np.log(self.uniform(size))

    def normal(self, size=None):
        from scipy.special import ndtri

        return ndtri(self.uniform(size))


@dataclass(frozen=True)
class InverseSubordinatorLaw:
    """Law of ``Y_alpha(t)`` for fixed ``t``."""

    alpha: StabilityIndex
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError("t must be positive")

    def pdf(self, x):
        return inv_stable_density(self.alpha, self.t, x)

    def cdf(self, x):
        return inverse_subordinator_cdf(self.alpha, self.t, x)

    def mean(self):
        return inverse_subordinator_mean(self.alpha, self.t)


def _check_t(t):
    t = float(t)
    if not (t > 0 and math.isfinite(t)):
        raise DomainError(f"t must be positive and finite, got {t}")
    return t


def inv_stable_density(alpha, t: float, x: float) -> float:
    """Density ``h_alpha(t, x)`` of ``Y_alpha(t)``.

    ``h = t / (alpha x^{1+1/alpha}) g_alpha(t x^{-1/alpha})``.  At ``x -> 0``
    the density tends to ``t^{-alpha} / Gamma(1 - alpha)``, which is returned
    for ``x = 0`` and whenever ``t x^{-1/alpha}`` leaves double range.
    """
    a = as_alpha(alpha)
    t = _check_t(t)
    x = float(x)
    if x < 0:
        raise DomainError("x must be nonnegative")
    log_z = math.log(t) - math.log(x) / a if x > 0 else math.inf
    if log_z > 700.0:
        return t**-a / math.gamma(1.0 - a)
    z = math.exp(log_z)
    if z == 0.0:
        return 0.0
    return t / (a * x ** (1.0 + 1.0 / a)) * stable_density_g(a, z)


def inverse_subordinator_cdf(alpha, t: float, x: float) -> float:
    """``P(Y_alpha(t) <= x) = P(L_alpha(1) >= t x^{-1/alpha})``."""
    a = as_alpha(alpha)
    t = _check_t(t)
    if x <= 0:
        return 0.0
    log_z = math.log(t) - math.log(x) / a
    if log_z > 700.0:
        return 0.0
    return stable_sf(a, math.exp(log_z))


def inverse_subordinator_sf(alpha, t: float, x: float) -> float:
    """``P(Y_alpha(t) > x)``, accurate deep into the upper tail."""
    a = as_alpha(alpha)
    t = _check_t(t)
    if x <= 0:
        return 1.0
    log_z = math.log(t) - math.log(x) / a
    if log_z > 700.0:
        return 1.0
    return stable_cdf(a, math.exp(log_z))


def inverse_subordinator_mean(alpha, t: float) -> float:
    """``E[Y_alpha(t)] = t^alpha / Gamma(1 + alpha)``."""
    a = as_alpha(alpha)
    return _check_t(t) ** a / math.gamma(1.0 + a)


def inverse_subordinator_ppf(alpha, t: float, p: float) -> float:
    """Quantile of ``Y_alpha(t)`` for ``0 < p < 1`` by Brent's method on the CDF."""
    a = as_alpha(alpha)
    t = _check_t(t)
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie in (0, 1)")
    hi = locate_upper_tail(a, t, tail=min(1e-6, 0.5 * (1.0 - p)))
    lo = hi * 1e-300 ** a
    return optimize.brentq(
        lambda x: inverse_subordinator_cdf(a, t, x) - p, lo, hi, xtol=1e-300, rtol=1e-13
    )


def inv_stable_density_via_laplace(
    alpha, t: float, x: float, cfg: InversionConfig = PRECISE_CONFIG
) -> float:
    """``h_alpha(t, x)`` by inverting ``s -> s^{alpha-1} exp(-x s^alpha)`` in ``t``.

    This route never touches the series for ``g_alpha`` and serves as an
    independent check of :func:`inv_stable_density`.
    """
    a = as_alpha(alpha)
    t = _check_t(t)
    if not x > 0:
        raise DomainError("x must be positive")
    x_mp = mpmath.mpf(x)

    def f_bar(s):
        return s ** (a - 1.0) * mpmath.exp(-x_mp * s**a)

    return invert(LaplaceTransform(f_bar), t, cfg)


def limit_density_h_beta(alpha, beta: float, t: float, x: float) -> float:
    """Density of ``Y_alpha(t)^beta``.

    Equal to ``t / (alpha |beta| x^{1+1/(alpha beta)}) g_alpha(t x^{-1/(alpha beta)})``;
    evaluated as ``|beta|^{-1} x^{1/beta - 1} h_alpha(t, x^{1/beta})`` so the
    ``beta = 1`` case is the inverse stable density itself.
    """
    beta = float(beta)
    if beta == 0 or not math.isfinite(beta):
        raise DomainError("beta must be finite and nonzero")
    if not x > 0:
        raise DomainError("x must be positive")
    if beta == 1.0:
        return inv_stable_density(alpha, t, x)
    y = x ** (1.0 / beta)
    if y == 0.0 or math.isinf(y):
        return 0.0
    return x ** (1.0 / beta - 1.0) / abs(beta) * inv_stable_density(alpha, t, y)


# ---------------------------------------------------------------------------
# Tabulated densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Tabulated density on an increasing grid.

    ``mass`` is the trapezoid integral of ``h`` and ``quantile_hi`` the
    probability left of the last grid point.
    """

    x: np.ndarray
    h: np.ndarray
    mass: float = field(default=float("nan"))
    quantile_hi: float = 1.0 - TAIL_PROB
    check: bool = True

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        h = np.asarray(self.h, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "h", h)
        if math.isnan(self.mass):
            object.__setattr__(self, "mass", float(integrate.trapezoid(h, x)))
        if not self.check:
            return
        if x.ndim != 1 or x.shape != h.shape or x.size < 2:
            raise QuadratureFailure("grid arrays must be 1-d, equal length, >= 2 points")
        if np.any(np.diff(x) <= 0) or x[0] < 0:
            raise QuadratureFailure("grid x must be nonnegative and strictly increasing")
        if np.any(h < 0) or not np.all(np.isfinite(h)):
            raise QuadratureFailure("grid density must be finite and nonnegative")
        if abs(self.mass - 1.0) > 0.01:
            raise QuadratureFailure(f"grid mass {self.mass:.6f} deviates from 1 by more than 0.01")
        if self.quantile_hi < 1.0 - 1e-6 - 1e-15:
            raise QuadratureFailure("grid upper cutoff probability must be >= 1 - 1e-6")

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.h.tolist()))

    def cumulative(self) -> np.ndarray:
        """Cumulative trapezoid CDF, normalised to end at ``quantile_hi``."""
        c = integrate.cumulative_trapezoid(self.h, self.x, initial=0.0)
        return c / c[-1] * self.quantile_hi

    def cdf(self, values):
        return np.interp(values, self.x, self.cumulative(), left=0.0, right=1.0)

    def mean(self) -> float:
        return float(integrate.trapezoid(self.x * self.h, self.x) / self.mass)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "h"])
            for xi, hi in zip(self.x, self.h):
                w.writerow([f"{xi:.17g}", f"{hi:.17g}"])

    @classmethod
    def from_csv(cls, path, check: bool = True) -> "DensityGrid":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["x", "h"]:
            raise ValueError(f"{path}: expected header 'x,h'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        return cls(data[:, 0], data[:, 1], check=check)


def locate_upper_tail(alpha, t: float, tail: float = TAIL_PROB, max_iter: int = 200) -> float:
    """Smallest-ish ``x`` with ``P(Y_alpha(t) > x) <= tail`` (bisection in log x)."""
    a = as_alpha(alpha)
    t = _check_t(t)
    lo = t**a
    hi = lo
    it = 0
    while inverse_subordinator_sf(a, t, hi) > tail:
        lo, hi = hi, hi * 2.0
        it += 1
        if it >= max_iter:
            raise TailLocationFailure(f"no upper bracket for tail {tail} at alpha={a}, t={t}")
    if lo == hi:
        lo = hi / 2.0
        while inverse_subordinator_sf(a, t, lo) <= tail:
            lo /= 2.0
            it += 1
            if it >= max_iter:
                raise TailLocationFailure("no lower bracket for the upper tail")
    while hi / lo > 1.0 + 1e-6:
        mid = math.sqrt(lo * hi)
        if inverse_subordinator_sf(a, t, mid) > tail:
            lo = mid
        else:
            hi = mid
        it += 1
        if it >= max_iter:
            raise TailLocationFailure("tail bisection did not converge")
    return hi


def _grid_nodes(x_hi: float, n_points: int) -> np.ndarray:
    """0, a geometric run up to 1% of ``x_hi``, then linear spacing."""
    n_geo = max(n_points // 8, 4)
    n_lin = n_points - n_geo - 1
    geo = np.geomspace(1e-6 * x_hi, 0.01 * x_hi, n_geo, endpoint=False)
    lin = np.linspace(0.01 * x_hi, x_hi, n_lin)
    return np.concatenate(([0.0], geo, lin))


@lru_cache(maxsize=256)
def _cached_grid(a: float, t: float, n_points: int) -> DensityGrid:
    x_hi = locate_upper_tail(a, t)
    x = _grid_nodes(x_hi, n_points)
    h = np.array([inv_stable_density(a, t, xi) for xi in x])
    return DensityGrid(x, h, quantile_hi=1.0 - inverse_subordinator_sf(a, t, x_hi))


def build_density_grid(alpha, t: float, n_points: int = 512) -> DensityGrid:
    """Tabulate ``h_alpha(t, .)`` on ``[0, x_hi]`` with ``P(Y > x_hi) <= 1e-6``."""
    a = as_alpha(alpha)
    t = _check_t(t)
    if n_points < 64:
        raise ValueError("n_points must be >= 64")
    return _cached_grid(a, t, int(n_points))


@lru_cache(maxsize=64)
def _cached_limit_grid(a, beta, t, n_points):
    base = build_density_grid(a, t, n_points)
    y = base.x[1:]
    x = y**beta
    if beta < 0:
        x = x[::-1]
    h = np.array([limit_density_h_beta(a, beta, t, xi) for xi in x])
    if beta > 0:
        x = np.concatenate(([0.0], x))
        h0 = base.h[0] if beta == 1.0 else (0.0 if beta < 1.0 else math.inf)
        h = np.concatenate(([h0], h))
    return DensityGrid(x, h, quantile_hi=base.quantile_hi)


def build_limit_grid(alpha, beta: float, t: float, n_points: int = 512) -> DensityGrid:
    """Tabulate the density of ``Y_alpha(t)^beta`` on the image of the ``Y`` grid."""
    a = as_alpha(alpha)
    if not (beta > 0 and math.isfinite(beta)):
        raise DomainError("tabulated limit grids need beta > 0")
    return _cached_limit_grid(a, float(beta), _check_t(t), int(n_points))


def ml_laplace_identity_check(alpha, t: float, y: float, n_points: int = 2048) -> tuple[float, float]:
    """Return ``(int e^{-xy} h_alpha(t,x) dx, E_alpha(-y t^alpha))``.

    The integral is Simpson's rule over :func:`build_density_grid` nodes.
    """
    a = as_alpha(alpha)
    t = _check_t(t)
    if not y >= 0:
        raise DomainError("y must be nonnegative")
    grid = build_density_grid(a, t, n_points)
    lhs = float(integrate.simpson(np.exp(-grid.x * y) * grid.h, x=grid.x))
    return lhs, mittag_leffler(a, -y * t**a)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def sample_stable_subordinator(alpha, rng: RngStream, size=None):
    """Draw ``L_alpha(1)`` with ``E exp(-u L) = exp(-u^alpha)``.

    Kanter's representation: with ``U`` uniform on ``(0, pi)`` and ``E``
    standard exponential, ``L = (A(U) / E)^{(1-alpha)/alpha}`` where
    ``A(u) = [sin(alpha u)^alpha sin((1-alpha) u)^{1-alpha} / sin u]^{1/(1-alpha)}``.
    Consumes exactly two uniforms per variate.
    """
    a = as_alpha(alpha)
    u = math.pi * rng.uniform(size)
    e = rng.exponential(size)
    log_a = (
        a * np.log(np.sin(a * u)) + (1.0 - a) * np.log(np.sin((1.0 - a) * u)) - np.log(np.sin(u))
    ) / (1.0 - a)
    out = np.exp((1.0 - a) / a * (log_a - np.log(e)))
    return float(out) if size is None else out


def sample_inverse_subordinator(
    alpha, t: float, rng: RngStream, method: str = "stable_identity", size=None, n_points: int = 1024
):
    """Draw ``Y_alpha(t)``.

    ``stable_identity`` uses ``Y_alpha(t) = (t / L_alpha(1))^alpha`` in law;
    ``discrete_inversion`` inverts the piecewise-linear cumulative trapezoid
    CDF of a tabulated density with one uniform per draw.
    """
    a = as_alpha(alpha)
    t = _check_t(t)
    if method == "stable_identity":
        lv = sample_stable_subordinator(a, rng, size)
        return (t / lv) ** a
    if method == "discrete_inversion":
        grid = build_density_grid(a, t, n_points)
        cum = grid.cumulative()
        u = rng.uniform(size)
        i = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(cum) - 2)
        dc = cum[i + 1] - cum[i]
        frac = np.where(dc > 0, (u - cum[i]) / np.where(dc > 0, dc, 1.0), 0.0)
        out = grid.x[i] + frac * (grid.x[i + 1] - grid.x[i])
        return float(out) if size is None else out
    raise ValueError(f"unknown method {method!r}")
