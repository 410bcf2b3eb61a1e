"""Real-axis numerical Laplace inversion built on Gaver functionals.

The Post-Widder limit ``f(t) = lim (-1)^n/n! (n/t)^{n+1} F^{(n)}(n/t)`` needs
high-order derivatives of the transform.  Gaver replaced the derivative by a
finite difference on the lattice ``s = k ln2 / t``; the resulting functionals
``G_n(t)`` converge to ``f(t)`` like ``1/n`` and are accelerated either with
Salzer's linear extrapolation (equivalent to the Stehfest formula) or with
Wynn's rho algorithm.

The Salzer weights for 14 nodes reach ~1.7e8, so plain double arithmetic
cannot do better than ~1e-9 even for ``F(s) = 1/s``; the default config
therefore runs the node arithmetic at 30 digits.  Peaked inverse functions
(for example the inverse stable density at ``alpha`` near 1) need many more
functionals and the Wynn rho accelerator, see ``PRECISE_CONFIG``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable

import mpmath

from .errors import DomainError, NumericalInstability

__all__ = [
    "LaplaceTransform",
    "InversionConfig",
    "DEFAULT_CONFIG",
    "PRECISE_CONFIG",
    "gaver_functional",
    "invert",
    "invert_with_error",
]

_LN2 = math.log(2.0)
_ACCELERATIONS = ("salzer", "none", "wynn_rho")

# mpmath keeps its working precision in a process-global context.
_MP_LOCK = threading.Lock()


@dataclass(frozen=True)
class LaplaceTransform:
    """A transform ``F(s) = int_0^inf e^{-su} f(u) du``.

    ``eval`` is called with one scalar ``s`` at a time.  Under an
    extended-precision config the argument is an ``mpmath.mpf`` and the
    callable must stick to arithmetic or ``mpmath.mp`` functions.
    ``eval`` must be safe to call from several threads.
    """

    eval: Callable
    domain_min: float = 0.0


@dataclass(frozen=True)
class InversionConfig:
    """Settings for :func:`invert`.

    n_terms
        Number of transform evaluations (the Stehfest ``N``); the
        accelerated estimate combines ``n_terms // 2`` Gaver functionals.
    acceleration
        ``"salzer"``, ``"wynn_rho"`` or ``"none"`` (last raw functional).
    dps
        Decimal digits of working precision, ``None`` for double.
    tol
        Relative band used by the instability check.
    """

    n_terms: int = 14
    acceleration: str = "salzer"
    dps: int | None = 30
    tol: float = 1e-3

    def __post_init__(self):
        if self.acceleration not in _ACCELERATIONS:
            raise ValueError(f"acceleration must be one of {_ACCELERATIONS}")
        if self.n_terms % 2 or self.n_terms < 4:
            raise ValueError("n_terms must be even and >= 4")
        cap = 32 if self.dps is None else 128
        if self.n_terms > cap:
            raise ValueError(f"n_terms must be <= {cap} at this precision")
        if self.dps is not None and self.dps < 15:
            raise ValueError("dps must be >= 15")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


DEFAULT_CONFIG = InversionConfig()
PRECISE_CONFIG = InversionConfig(n_terms=64, acceleration="wynn_rho", dps=80)


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _check_nodes(f_bar: LaplaceTransform, t: float) -> None:
    if not t > 0 or not math.isfinite(t):
        raise DomainError(f"inversion point must be positive and finite, got {t}")
    if _LN2 / t <= f_bar.domain_min:
        raise DomainError(
            f"smallest node ln2/t = {_LN2 / t:g} not above the abscissa "
            f"of convergence {f_bar.domain_min:g}"
        )


def gaver_functional(f_bar: LaplaceTransform, t: float, n: int) -> float:
    """Return the ``n``-th Gaver functional ``G_n(t)`` in double precision.

    ``G_n(t) = (n ln2 / t) C(2n, n) sum_k (-1)^k C(n, k) F((n + k) ln2 / t)``.
    Binomial weights are formed in log space so large ``n`` does not overflow.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _check_nodes(f_bar, t)
    a = _LN2 / t
    log_front = math.log(n * a) + _log_binom(2 * n, n)
    parts = []
    for k in range(n + 1):
        w = math.exp(log_front + _log_binom(n, k))
        v = float(f_bar.eval((n + k) * a))
        parts.append(w * v if k % 2 == 0 else -w * v)
    return math.fsum(parts)


def _functionals(values, a, m, ctx):
    """G_1..G_m from transform values at nodes j*a, j = 1..2m (1-based)."""
    out = []
    for n in range(1, m + 1):
        acc = ctx.zero
        for k in range(n + 1):
            term = ctx.binom(n, k) * values[n + k - 1]
            acc = acc + term if k % 2 == 0 else acc - term
        out.append(n * a * ctx.binom(2 * n, n) * acc)
    return out


class _DoubleCtx:
    zero = 0.0

    @staticmethod
    def binom(n, k):
        return float(math.comb(n, k))


class _MpCtx:
    zero = mpmath.mpf(0)

    @staticmethod
    def binom(n, k):
        return mpmath.mpf(math.comb(n, k))


def _salzer(g, ctx):
    m = len(g)
    acc = ctx.zero
    for k in range(1, m + 1):
        w = ctx.binom(m, k) * (ctx.zero + k) ** m / math.factorial(m)
        term = w * g[k - 1]
        acc = acc + term if (m - k) % 2 == 0 else acc - term
    return acc


def _wynn_rho(g):
    """Highest two even-column estimates of Wynn's rho table."""
    prev = [g[0] * 0] * (len(g) + 1)
    cur = list(g)
    estimates = [g[-1]]
    for k in range(1, len(g)):
        nxt = []
        for i in range(len(cur) - 1):
            d = cur[i + 1] - cur[i]
            if d == 0:
                return estimates[-1], estimates[-2] if len(estimates) > 1 else estimates[-1]
            nxt.append(prev[i + 1] + k / d)
        prev, cur = cur, nxt
        if k % 2 == 0:
            estimates.append(cur[-1])
    if len(estimates) == 1:
        return estimates[0], g[-2]
    return estimates[-1], estimates[-2]


def _estimate(f_bar, t, cfg):
    _check_nodes(f_bar, t)
    m = cfg.n_terms // 2
    if cfg.dps is None:
        ctx = _DoubleCtx
        a = _LN2 / t
        values = [float(f_bar.eval(j * a)) for j in range(1, cfg.n_terms + 1)]
        g = _functionals(values, a, m, ctx)
        return _accelerate(g, ctx, cfg), g
    with _MP_LOCK, mpmath.workdps(cfg.dps):
        ctx = _MpCtx
        a = mpmath.log(2) / mpmath.mpf(t)
        values = [mpmath.mpf(f_bar.eval(j * a)) for j in range(1, cfg.n_terms + 1)]
        g = _functionals(values, a, m, ctx)
        best, previous = _accelerate(g, ctx, cfg)
        return (float(best), float(previous)), [float(x) for x in g]


def _accelerate(g, ctx, cfg):
    if cfg.acceleration == "none":
        return g[-1], g[-2]
    if cfg.acceleration == "salzer":
        return _salzer(g, ctx), _salzer(g[:-1], ctx)
    return _wynn_rho(g)


def invert_with_error(
    f_bar: LaplaceTransform, t: float, cfg: InversionConfig = DEFAULT_CONFIG
) -> tuple[float, float]:
    """Like :func:`invert` but also return the estimated absolute error.

    The error estimate is the change between the final accelerated value and
    the one obtained with one fewer functional (or one fewer rho column).
    No instability check is applied.
    """
    (best, previous), _ = _estimate(f_bar, t, cfg)
    return float(best), abs(float(best) - float(previous))


def invert(f_bar: LaplaceTransform, t: float, cfg: InversionConfig = DEFAULT_CONFIG) -> float:
    """Approximate ``f(t)`` from its Laplace transform.

    Raises
    ------
    DomainError
        If ``t <= 0`` or the smallest node ``ln2/t`` is not inside the
        half-plane of convergence.
    NumericalInstability
        If the last two accelerated estimates differ by more than
        ``10 * cfg.tol`` relative to the local scale of the functionals.
    """
    (best, previous), g = _estimate(f_bar, t, cfg)
    best, previous = float(best), float(previous)
    if not math.isfinite(best):
        raise NumericalInstability(f"non-finite inversion result at t={t}")
    scale = max(abs(best), max(abs(x) for x in g[-3:]), 1e-300)
    if abs(best - previous) > 10.0 * cfg.tol * scale:
        raise NumericalInstability(
            f"accelerated estimates {previous:.6g} -> {best:.6g} at t={t} "
            f"disagree beyond {10 * cfg.tol:g} relative"
        )
    return best
