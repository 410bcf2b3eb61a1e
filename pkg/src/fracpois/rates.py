"""Cumulative rate functions of non-homogeneous Poisson processes.

Three families are supported:

* ``linear``:  ``Lambda(t) = lam t``
* ``weibull``: ``Lambda(t) = (t / b)^c``
* ``makeham``: ``Lambda(t) = (c / b)(e^{bt} - 1) + mu t``

Linear and Weibull rates are regularly varying with index 1 and ``c``;
Makeham's rate grows exponentially and is not regularly varying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NonConvergence

__all__ = [
    "RateFunction",
    "cumulative",
    "intensity",
    "inverse",
    "estimate_rv_index",
]

KINDS = ("linear", "weibull", "makeham")
_EXP_LIMIT = 700.0


def _positive(name, v):
    v = float(v)
    if not (v > 0 and math.isfinite(v)):
        raise DomainError(f"{name} must be positive and finite, got {v}")
    return v


@dataclass(frozen=True)
class RateFunction:
    """A cumulative rate ``Lambda`` with ``Lambda(0) = 0`` and ``Lambda -> inf``.

    Use the :meth:`linear`, :meth:`weibull` and :meth:`makeham` constructors.
    """

    kind: str
    lam: float | None = None
    b: float | None = None
    c: float | None = None
    mu: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown rate kind {self.kind!r}")
        if self.kind == "linear":
            object.__setattr__(self, "lam", _positive("lambda", self.lam))
        elif self.kind == "weibull":
            object.__setattr__(self, "b", _positive("b", self.b))
            # c = 0 would give Lambda = 1 everywhere on (0, inf) and Lambda(0) != 0
            object.__setattr__(self, "c", _positive("c", self.c))
        else:
            object.__setattr__(self, "c", _positive("c", self.c))
            object.__setattr__(self, "b", _positive("b", self.b))
            mu = float(self.mu if self.mu is not None else 0.0)
            if not (mu >= 0 and math.isfinite(mu)):
                raise DomainError("mu must be nonnegative and finite")
            object.__setattr__(self, "mu", mu)

    @classmethod
    def linear(cls, lam: float) -> "RateFunction":
        return cls("linear", lam=lam)

    @classmethod
    def weibull(cls, b: float, c: float) -> "RateFunction":
        return cls("weibull", b=b, c=c)

    @classmethod
    def makeham(cls, c: float, b: float, mu: float = 0.0) -> "RateFunction":
        return cls("makeham", c=c, b=b, mu=mu)

    @property
    def declared_rv_index(self) -> float | None:
        """Index of regular variation, ``None`` when not regularly varying."""
        if self.kind == "linear":
            return 1.0
        if self.kind == "weibull":
            return self.c
        return None

    def spec(self) -> str:
        """Textual form understood by the command line parser."""
        if self.kind == "linear":
            return f"linear:lambda={self.lam!r}"
        if self.kind == "weibull":
            return f"weibull:b={self.b!r},c={self.c!r}"
        return f"makeham:c={self.c!r},b={self.b!r},mu={self.mu!r}"

    def __call__(self, t):
        return cumulative(self, t)


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


def cumulative(rf: RateFunction, t):
    """``Lambda(t)``; accepts scalars or arrays.

    Raises ``OverflowError`` for Makeham rates with ``b t > 700``.
    """
    t, scalar = _as_array(t)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("t must be nonnegative")
    if rf.kind == "linear":
        res = rf.lam * t
    elif rf.kind == "weibull":
        res = (t / rf.b) ** rf.c
    else:
        bt = rf.b * t
        if np.any(bt > _EXP_LIMIT):
            raise OverflowError(f"makeham rate: b*t = {np.max(bt):g} exceeds {_EXP_LIMIT:g}")
        res = rf.c / rf.b * np.expm1(bt) + rf.mu * t
    return _out(res, scalar)


def intensity(rf: RateFunction, t):
    """Derivative ``lambda(t)`` of the cumulative rate."""
    t, scalar = _as_array(t)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("t must be nonnegative")
    if rf.kind == "linear":
        res = np.full_like(t, rf.lam)
    elif rf.kind == "weibull":
        if rf.c < 1 and np.any(t == 0):
            raise DomainError("weibull intensity with c < 1 diverges at t = 0")
        res = rf.c / rf.b * (t / rf.b) ** (rf.c - 1.0)
    else:
        bt = rf.b * t
        if np.any(bt > _EXP_LIMIT):
            raise OverflowError(f"makeham rate: b*t = {np.max(bt):g} exceeds {_EXP_LIMIT:g}")
        res = rf.c * np.exp(bt) + rf.mu
    return _out(res, scalar)


def _makeham_inverse(rf: RateFunction, u: np.ndarray, max_iter: int = 200) -> np.ndarray:
    lo = np.zeros_like(u)
    # (c / b)(e^{bt} - 1) <= Lambda(t) and mu t <= Lambda(t) both bound the root
    hi = np.log1p(rf.b * u / rf.c) / rf.b
    if rf.mu > 0:
        with np.errstate(over="ignore"):
            hi = np.minimum(hi, u / rf.mu)
    t = hi.copy()
    tol = 1e-10 * np.maximum(1.0, u)
    for _ in range(max_iter):
        f = cumulative(rf, t) - u
        done = np.abs(f) <= tol
        if np.all(done):
            return t
        lo = np.where(f < 0, t, lo)
        hi = np.where(f > 0, t, hi)
        step = t - f / intensity(rf, t)
        bad = ~((step > lo) & (step < hi))
        t = np.where(done, t, np.where(bad, 0.5 * (lo + hi), step))
    raise NonConvergence("makeham inversion did not converge in 200 iterations")


def inverse(rf: RateFunction, u):
    """Solve ``Lambda(t) = u`` for ``t``.

    Closed form for linear and Weibull; for Makeham a Newton iteration
    safeguarded by bisection reaches ``|Lambda(t) - u| <= 1e-10 max(1, u)``.
    """
    u, scalar = _as_array(u)
    if np.any(u < 0) or np.any(np.isnan(u)):
        raise DomainError("u must be nonnegative")
    if rf.kind == "linear":
        res = u / rf.lam
    elif rf.kind == "weibull":
        res = rf.b * u ** (1.0 / rf.c)
    else:
        res = _makeham_inverse(rf, np.atleast_1d(u).astype(float))
        res = res.reshape(u.shape)
    return _out(res, scalar)


def estimate_rv_index(rf: RateFunction, x: float, t_grid) -> list[float]:
    """``log(Lambda(x t) / Lambda(t)) / log(x)`` for each ``t`` in ``t_grid``.

    Converges to the index of regular variation when one exists.
    """
    x = _positive("x", x)
    if x == 1.0:
        raise DomainError("x must differ from 1")
    ts = np.asarray(t_grid, dtype=float)
    if np.any(ts <= 0):
        raise DomainError("t_grid values must be positive")
    if rf.kind == "linear":
        return [1.0] * len(ts)
    if rf.kind == "weibull":
        # the ratio is exactly x^c; form it in log space to avoid rounding
        return [float(rf.c * math.log(x * t / rf.b) - rf.c * math.log(t / rf.b)) / math.log(x) for t in ts]
    num = cumulative(rf, x * ts)
    den = cumulative(rf, ts)
    return [float(v) for v in np.log(num / den) / math.log(x)]
