"""Samplers for Poisson, fractional Poisson and compound processes.

The fractional non-homogeneous Poisson process (FNPP) is
``N_alpha(t) = N_1(Lambda(Y_alpha(t)))``, a unit-rate Poisson process run on
the clock ``Lambda`` and time-changed by the inverse stable subordinator.
For linear ``Lambda`` this is the fractional homogeneous process (FHPP),
a renewal process with Mittag-Leffler waiting times.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special, stats

from .errors import BudgetExceeded, DomainError, GridTooCoarse, QuadratureFailure
from .rates import RateFunction, cumulative, inverse
from .specfun import as_alpha
from .subordinator import (
    RngStream,
    build_density_grid,
    inv_stable_density,
    inverse_subordinator_ppf,
    sample_stable_subordinator,
)

__all__ = [
    "SamplePath",
    "StableLawParams",
    "JumpDistribution",
    "sample_poisson_path",
    "sample_nhpp",
    "sample_ml_waiting_times",
    "sample_fhpp_renewal",
    "sample_fhpp_count",
    "sample_fnpp_marginal",
    "sample_fnpp_path",
    "sample_fnpp_gergely_count",
    "fnpp_pmf",
    "fnpp_pmf_table",
    "sample_stable",
    "sample_jumps",
    "sample_compound_marginal",
    "write_values_csv",
    "write_path_csv",
]

GERGELY_MAX_DRAWS = 10**6


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Event times of a counting process observed on ``[0, horizon]``."""

    events: np.ndarray
    horizon: float

    def __post_init__(self):
        ev = np.asarray(self.events, dtype=float).reshape(-1)
        object.__setattr__(self, "events", ev)
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if ev.size:
            if ev[0] <= 0 or ev[-1] > self.horizon:
                raise ValueError("events must lie in (0, horizon]")
            if np.any(np.diff(ev) <= 0):
                raise ValueError("events must be strictly increasing")

    def count(self, t):
        """Right-continuous counting function ``#{events <= t}``."""
        res = np.searchsorted(self.events, t, side="right")
        return int(res) if np.ndim(res) == 0 else res

    def __len__(self):
        return self.events.size


@dataclass(frozen=True)
class StableLawParams:
    """Stable law ``S_alpha(sigma, beta, mu)`` with the characteristic function

    ``exp(-sigma^a |th|^a [1 - i beta sign(th) tan(pi a / 2)] + i mu th)`` for ``a != 1``
    and ``exp(-sigma |th| [1 + i beta (2/pi) sign(th) log|th|] + i mu th)`` for ``a = 1``.
    """

    alpha_s: float
    sigma: float = 1.0
    beta_s: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha_s <= 2:
            raise DomainError("alpha_s must lie in (0, 2]")
        if not self.sigma >= 0:
            raise DomainError("sigma must be nonnegative")
        if not -1 <= self.beta_s <= 1:
            raise DomainError("beta_s must lie in [-1, 1]")
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")

    def cf(self, theta):
        """Characteristic function at ``theta``."""
        th = np.asarray(theta, dtype=float)
        a, s, b = self.alpha_s, self.sigma, self.beta_s
        sg = np.sign(th)
        at = np.abs(th)
        if a == 1:
            with np.errstate(divide="ignore", invalid="ignore"):
                lg = np.where(at > 0, np.log(at), 0.0)
            psi = -s * at * (1 + 1j * b * 2 / math.pi * sg * lg)
        else:
            psi = -(s**a) * at**a * (1 - 1j * b * sg * math.tan(math.pi * a / 2))
        return np.exp(psi + 1j * self.mu * th)


@dataclass(frozen=True)
class JumpDistribution:
    """Law of the i.i.d. jumps of a compound process.

    ``gaussian`` uses ``mean`` and ``sd``.  ``pareto`` has survival function
    ``(scale / x)^tail_index`` on ``[scale, inf)``; when ``centered`` and
    ``tail_index > 1`` the mean ``tail_index scale / (tail_index - 1)`` is
    subtracted.
    """

    kind: str
    mean: float = 0.0
    sd: float = 1.0
    tail_index: float = 1.5
    scale: float = 1.0
    centered: bool = True

    def __post_init__(self):
        if self.kind == "gaussian":
            if not self.sd > 0:
                raise DomainError("sd must be positive")
        elif self.kind == "pareto":
            if not 0 < self.tail_index < 2:
                raise DomainError("pareto tail_index must lie in (0, 2)")
            if not self.scale > 0:
                raise DomainError("pareto scale must be positive")
        else:
            raise DomainError(f"unknown jump kind {self.kind!r}")

    @classmethod
    def gaussian(cls, mean: float = 0.0, sd: float = 1.0) -> "JumpDistribution":
        return cls("gaussian", mean=mean, sd=sd)

    @classmethod
    def pareto(cls, tail_index: float, scale: float = 1.0, centered: bool = True) -> "JumpDistribution":
        return cls("pareto", tail_index=tail_index, scale=scale, centered=centered)

    @property
    def shift(self) -> float:
        """Amount subtracted from each raw Pareto draw."""
        if self.kind == "pareto" and self.centered and self.tail_index > 1:
            return self.tail_index * self.scale / (self.tail_index - 1)
        return 0.0


# ---------------------------------------------------------------------------
# Poisson and renewal paths
# ---------------------------------------------------------------------------


def _arrivals(rate: float, horizon: float, rng: RngStream) -> np.ndarray:
    """Arrival times of a rate-``rate`` Poisson process on ``[0, horizon]``."""
    mean = rate * horizon
    batch = int(mean + 5 * math.sqrt(mean) + 10)
    out = []
    last = 0.0
    while True:
        gaps = rng.exponential(batch) / rate
        times = last + np.cumsum(gaps)
        keep = times[times <= horizon]
        out.append(keep)
        if keep.size < batch:
            break
        last = times[-1]
    return np.concatenate(out)


def sample_poisson_path(rate: float, horizon: float, rng: RngStream) -> SamplePath:
    """Homogeneous Poisson process with exponential inter-arrival times."""
    if not rate > 0:
        raise DomainError("rate must be positive")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    return SamplePath(_arrivals(float(rate), float(horizon), rng), float(horizon))


def sample_nhpp(rf: RateFunction, horizon: float, rng: RngStream) -> SamplePath:
    """Non-homogeneous Poisson process ``N_1(Lambda(t))``.

    Standard Poisson arrivals on ``[0, Lambda(horizon)]`` mapped through
    ``Lambda^{-1}``.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    arr = _arrivals(1.0, cumulative(rf, horizon), rng)
    ev = np.minimum(inverse(rf, arr), horizon) if arr.size else arr
    return SamplePath(ev, float(horizon))


def sample_ml_waiting_times(alpha, lambda_: float, rng: RngStream, size=None):
    """Mittag-Leffler waiting times with ``P(J > t) = E_alpha(-(lambda t)^alpha)``.

    Uses the Kozubowski-Rachev transformation
    ``J = -(1/lambda) log(U) [sin(a pi) / tan(a pi V) - cos(a pi)]^{1/a}``.
    Two uniforms per draw; open-interval uniforms make the endpoint guard
    unnecessary.
    """
    a = as_alpha(alpha, allow_one=True)
    if not lambda_ > 0:
        raise DomainError("lambda_ must be positive")
    u = rng.uniform(size)
    v = rng.uniform(size)
    if a == 1.0:
        return -np.log(u) / lambda_
    pa = math.pi * a
    # sin(pa)/tan(pa v) - cos(pa) = sin(pa (1 - v)) / sin(pa v), which stays
    # accurate when alpha is close to 1
    bracket = np.sin(pa * (1.0 - v)) / np.sin(pa * v)
    return -np.log(u) / lambda_ * bracket ** (1.0 / a)


def sample_fhpp_renewal(alpha, lambda_: float, horizon: float, rng: RngStream) -> SamplePath:
    """FHPP path as a renewal process with Mittag-Leffler waiting times.

    With waiting-time survival ``E_alpha(-(lambda t)^alpha)`` the counts agree
    in law with the time-change construction for the linear rate
    ``lambda^alpha``; the two parameterisations coincide at ``lambda = 1``.
    """
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    out = []
    last = 0.0
    batch = 16
    while True:
        times = last + np.cumsum(sample_ml_waiting_times(alpha, lambda_, rng, batch))
        keep = times[times <= horizon]
        out.append(keep)
        if keep.size < batch:
            break
        last = times[-1]
        batch = min(batch * 2, 1 << 16)
    ev = np.concatenate(out)
    # coincident sums are measure-zero but would break strict monotonicity
    ev = ev[np.concatenate(([True], np.diff(ev) > 0))] if ev.size else ev
    return SamplePath(ev, float(horizon))


def sample_fhpp_count(alpha, lambda_: float, t: float, rng: RngStream) -> int:
    """``N_alpha(t)`` from the renewal construction."""
    return sample_fhpp_renewal(alpha, lambda_, t, rng).count(t)


# ---------------------------------------------------------------------------
# Time-change construction
# ---------------------------------------------------------------------------


def _poisson_inverse(u, mean):
    """Poisson quantile at ``u`` (common random numbers across means)."""
    return stats.poisson.ppf(u, mean).astype(np.int64)


def sample_fnpp_marginal(alpha, rf: RateFunction, t: float, rng: RngStream, size=None, with_compensator: bool = False):
    """Draw ``N_alpha(t)`` exactly: ``Y = Y_alpha(t)``, then ``Poisson(Lambda(Y))``.

    Each replica consumes three uniforms (two for ``L_alpha(1)``, one for the
    Poisson inversion), so replicas at different ``t`` share random numbers.

    Parameters
    ----------
    with_compensator
        Also return ``Lambda(Y)`` and ``Y`` for each replica.
    """
    a = as_alpha(alpha)
    if not (t > 0 and math.isfinite(t)):
        raise DomainError("t must be positive")
    n = 1 if size is None else int(size)
    lv = sample_stable_subordinator(a, rng, n)
    y = (t / lv) ** a
    lam = cumulative(rf, y)
    u = rng.uniform(n)
    counts = _poisson_inverse(u, lam)
    if size is None:
        counts, lam, y = int(counts[0]), float(lam[0]), float(y[0])
    if with_compensator:
        return counts, lam, y
    return counts


def sample_fnpp_path(alpha, rf: RateFunction, horizon: float, grid_step: float, rng: RngStream) -> SamplePath:
    """Approximate FNPP path on ``[0, horizon]``.

    ``L_alpha`` is simulated on the operational-time lattice ``u_k = k grid_step``
    via independent increments ``grid_step^{1/alpha} L_alpha(1)`` and linearly
    interpolated between lattice points.  NHPP events at operational times
    ``tau_i`` are placed at calendar times ``L(tau_i)``.  The implied inverse
    differs from ``Y_alpha`` by less than one lattice cell.
    """
    a = as_alpha(alpha)
    if not horizon > 0 or not grid_step > 0:
        raise DomainError("horizon and grid_step must be positive")
    if horizon / grid_step < 10:
        raise GridTooCoarse(f"grid_step {grid_step} gives fewer than 10 cells on [0, {horizon}]")
    scale = grid_step ** (1.0 / a)
    levels = [np.zeros(1)]
    top = 0.0
    batch = 64
    while top <= horizon:
        inc = scale * sample_stable_subordinator(a, rng, batch)
        cum = top + np.cumsum(inc)
        levels.append(cum)
        top = float(cum[-1])
        batch = min(batch * 2, 1 << 16)
    lvals = np.concatenate(levels)
    k_end = int(np.searchsorted(lvals, horizon, side="right"))
    lvals = lvals[: k_end + 1]
    u_end = k_end * grid_step
    tau = inverse(rf, _arrivals(1.0, cumulative(rf, u_end), rng))
    ev = np.interp(tau / grid_step, np.arange(lvals.size), lvals)
    ev = ev[(ev > 0) & (ev <= horizon)]
    ev = ev[np.concatenate(([True], np.diff(ev) > 0))] if ev.size else ev
    return SamplePath(ev, float(horizon))


@lru_cache(maxsize=64)
def _y_quantile_999(a: float) -> float:
    return inverse_subordinator_ppf(a, 1.0, 0.999)


def sample_fnpp_gergely_count(alpha, rf: RateFunction, t: float, rng: RngStream, size=None):
    """``N_alpha(t)`` from record values (Gergely's construction).

    ``xi_i = Lambda^{-1}(E_i)`` are i.i.d. with CDF ``1 - exp(-Lambda)``; the
    strict record values form an NHPP with cumulative rate ``Lambda``, so the
    number of records not exceeding ``Y_alpha(t)`` is ``N_alpha(t)``.
    About ``e^{Lambda(Y)}`` draws are needed, hence the budget guard.

    Raises
    ------
    BudgetExceeded
        If ``exp(Lambda(t^alpha q))`` exceeds ``10^6``, with ``q`` the 0.999
        quantile of ``Y_alpha(1)``, or a replica actually needs more draws.
    """
    a = as_alpha(alpha)
    if not t > 0:
        raise DomainError("t must be positive")
    scale_lam = cumulative(rf, t**a * _y_quantile_999(a))
    if scale_lam > math.log(GERGELY_MAX_DRAWS):
        raise BudgetExceeded(
            f"Lambda(t^alpha q_0.999) = {scale_lam:.3g}; expected record budget exceeds 1e6 draws"
        )
    n = 1 if size is None else int(size)
    ys = (t / sample_stable_subordinator(a, rng, n)) ** a
    out = np.empty(n, dtype=np.int64)
    for i, y in enumerate(ys):
        out[i] = _count_records(rf, float(y), rng)
    return int(out[0]) if size is None else out


def _count_records(rf, y, rng):
    expected = math.exp(min(float(cumulative(rf, y)), 30.0))
    chunk = int(min(max(16, 2 * expected), GERGELY_MAX_DRAWS))
    drawn = 0
    running = -math.inf
    records = 0
    while True:
        xi = inverse(rf, rng.exponential(chunk))
        drawn += chunk
        over = np.flatnonzero(xi > y)
        stop = over[0] if over.size else chunk
        prefix = xi[:stop]
        if prefix.size:
            acc = np.maximum.accumulate(np.concatenate(([running], prefix)))
            records += int(np.count_nonzero(acc[1:] > acc[:-1]))
            running = float(acc[-1])
        if over.size:
            return records
        if drawn >= GERGELY_MAX_DRAWS:
            raise BudgetExceeded(f"more than {GERGELY_MAX_DRAWS} draws needed for one replica")
        chunk = min(chunk * 2, GERGELY_MAX_DRAWS - drawn)


# ---------------------------------------------------------------------------
# Marginal pmf
# ---------------------------------------------------------------------------


def _pmf_integrand_factory(rf, k, a, t):
    def f(u):
        lam = cumulative(rf, u)
        if lam <= 0:
            w = 1.0 if k == 0 else 0.0
        else:
            w = math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1))
        return w * inv_stable_density(a, t, u)

    return f


def fnpp_pmf(alpha, rf: RateFunction, t: float, k: int) -> float:
    """``P(N_alpha(t) = k) = int e^{-Lambda(u)} Lambda(u)^k / k! h_alpha(t, u) du``.

    Adaptive quadrature over ``[0, x_hi]`` with ``P(Y_alpha(t) > x_hi) <= 1e-6``.
    """
    a = as_alpha(alpha)
    if not t > 0:
        raise DomainError("t must be positive")
    k = int(k)
    if k < 0:
        raise DomainError("k must be nonnegative")
    grid = build_density_grid(a, t)
    x_hi = float(grid.x[-1])
    pts = _breakpoints(rf, k, x_hi)
    val, err = integrate.quad(
        _pmf_integrand_factory(rf, k, a, t), 0.0, x_hi, points=pts, limit=200, epsabs=1e-10, epsrel=1e-8
    )
    if not math.isfinite(val) or err > 1e-6:
        raise QuadratureFailure(f"pmf quadrature error {err:.2e} at k={k}")
    return min(max(val, 0.0), 1.0)


def _breakpoints(rf, k, x_hi):
    # the Poisson weight peaks where Lambda(u) = k
    if k == 0:
        return None
    u = float(inverse(rf, float(k)))
    return [u] if 0 < u < x_hi else None


def fnpp_pmf_table(alpha, rf: RateFunction, t: float, k_max: int) -> np.ndarray:
    """``P(N_alpha(t) = k)`` for ``k = 0..k_max`` in one vector quadrature."""
    a = as_alpha(alpha)
    if not t > 0:
        raise DomainError("t must be positive")
    ks = np.arange(int(k_max) + 1)
    lg = special.gammaln(ks + 1.0)
    grid = build_density_grid(a, t)
    x_hi = float(grid.x[-1])

    def f(u):
        lam = cumulative(rf, u)
        if lam <= 0:
            w = (ks == 0).astype(float)
        else:
            w = np.exp(-lam + ks * math.log(lam) - lg)
        return w * inv_stable_density(a, t, u)

    pts = sorted({float(inverse(rf, float(k))) for k in ks[1:] if inverse(rf, float(k)) < x_hi})
    edges = [0.0, *pts, x_hi]
    total = np.zeros(ks.size)
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        val, err = integrate.quad_vec(f, lo, hi, epsabs=1e-12, epsrel=1e-9, limit=200)
        if err > 1e-6:
            raise QuadratureFailure(f"pmf table quadrature error {err:.2e}")
        total += val
    return np.clip(total, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Stable variates and compound sums
# ---------------------------------------------------------------------------


def sample_stable(p: StableLawParams, rng: RngStream, size=None):
    """Chambers-Mallows-Stuck sampler for ``S_alpha(sigma, beta, mu)``."""
    n = 1 if size is None else int(size)
    v = math.pi * (rng.uniform(n) - 0.5)
    w = rng.exponential(n)
    a, b = p.alpha_s, p.beta_s
    if a == 1.0:
        hb = math.pi / 2 + b * v
        x = 2 / math.pi * (hb * np.tan(v) - b * np.log((math.pi / 2) * w * np.cos(v) / hb))
        out = p.sigma * x + p.mu
        if p.sigma > 0:
            out = out + 2 / math.pi * b * p.sigma * math.log(p.sigma)
    else:
        zeta = b * math.tan(math.pi * a / 2)
        bb = math.atan(zeta) / a
        ss = (1 + zeta * zeta) ** (1 / (2 * a))
        x = (
            ss
            * np.sin(a * (v + bb))
            / np.cos(v) ** (1 / a)
            * (np.cos(v - a * (v + bb)) / w) ** ((1 - a) / a)
        )
        out = p.sigma * x + p.mu
    return float(out[0]) if size is None else out


def sample_jumps(jump: JumpDistribution, rng: RngStream, size):
    """I.i.d. jumps; Pareto by inversion ``scale U^{-1/tail_index}``."""
    if jump.kind == "gaussian":
        return jump.mean + jump.sd * rng.normal(size)
    raw = jump.scale * rng.uniform(size) ** (-1.0 / jump.tail_index)
    return raw - jump.shift


def _sum_jumps(jump, counts, rng, block=1 << 22):
    """Sums of ``counts[i]`` i.i.d. jumps, drawn in bounded memory."""
    if jump.kind == "gaussian":
        # sum of n i.i.d. normals is N(n mean, n sd^2)
        z = rng.normal(counts.size)
        return counts * jump.mean + jump.sd * np.sqrt(counts) * z
    out = np.zeros(counts.size)
    i = 0
    while i < counts.size:
        j = i
        total = 0
        while j < counts.size and (total == 0 or total + counts[j] <= block):
            total += int(counts[j])
            j += 1
        x = sample_jumps(jump, rng, total)
        cs = np.concatenate(([0.0], np.cumsum(x)))
        ends = np.cumsum(counts[i:j])
        starts = ends - counts[i:j]
        out[i:j] = cs[ends] - cs[starts]
        i = j
    return out


def sample_compound_marginal(alpha, rf: RateFunction, jump: JumpDistribution, t: float, rng: RngStream, size=None, with_counts: bool = False):
    """``Z_alpha(t) = sum_{k <= N_alpha(t)} X_k`` with jumps independent of ``N``.

    Gaussian sums are drawn from their exact conditional law given ``N``.
    """
    n = 1 if size is None else int(size)
    counts = sample_fnpp_marginal(alpha, rf, t, rng, n)
    z = _sum_jumps(jump, counts, rng)
    z = np.where(counts == 0, 0.0, z)
    if size is None:
        z, counts = float(z[0]), int(counts[0])
    return (z, counts) if with_counts else z


# ---------------------------------------------------------------------------
# Dumps
# ---------------------------------------------------------------------------


def write_values_csv(values, path) -> None:
    """One value per line under the header ``value``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value"])
        arr = np.asarray(values).reshape(-1)
        fmt = (lambda v: str(int(v))) if np.issubdtype(arr.dtype, np.integer) else (lambda v: f"{v:.17g}")
        for v in arr:
            w.writerow([fmt(v)])


def write_path_csv(path_obj: SamplePath, path) -> None:
    """Event times under the header ``event_time``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_time"])
        for v in path_obj.events:
            w.writerow([f"{v:.17g}"])
