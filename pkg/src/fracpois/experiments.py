"""Monte Carlo experiments for the limit theorems of fractional Poisson processes.

Every experiment is a deterministic function of its parameters and seed.
Replicas are generated in fixed blocks of ``CHUNK`` with stream
``RngStream(seed, block_index)``; workers only decide which thread computes
a block, so reports do not depend on the worker count.  The same block
streams are reused at every time point, which couples the samples across
times (common random numbers).

For scans over a parameter other than time (``alpha`` or ``lambda``) the
``t`` field of each ``per_time`` entry holds the scanned value and
``params["scan"]`` names it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .processes import (
    JumpDistribution,
    StableLawParams,
    _sum_jumps,
    fnpp_pmf_table,
    sample_compound_marginal,
    sample_fnpp_marginal,
    sample_stable,
)
from .rates import RateFunction, cumulative
from .specfun import as_alpha
from .subordinator import RngStream, build_density_grid, build_limit_grid

__all__ = [
    "CHUNK",
    "KsResult",
    "ExperimentReport",
    "ks_one_sample",
    "ks_two_sample",
    "clt_experiment",
    "scaling_experiment",
    "alpha_to_one_experiment",
    "stability_experiment",
    "anscombe_experiment",
    "brownian_mixture_experiment",
    "emit_report",
    "load_report",
    "report_to_json",
]

CHUNK = 1000
HIST_BINS = 60
# stream ids at or above this offset are reserved for reference samples
_REF_STREAM = 1 << 32
_CAL_STREAM = 1 << 33


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KsResult:
    statistic: float
    n: int


def ks_one_sample(samples, ref_cdf) -> KsResult:
    """Kolmogorov-Smirnov distance between the sample and ``ref_cdf``.

    ``ref_cdf`` is called once with the sorted sample as an array.
    """
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    n = x.size
    if n == 0:
        raise ValueError("samples must be nonempty")
    f = np.clip(np.asarray(ref_cdf(x), dtype=float), 0.0, 1.0)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - f)), float(np.max(f - (i - 1) / n)))
    return KsResult(min(max(d, 0.0), 1.0), n)


def ks_two_sample(a, b) -> KsResult:
    res = stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return KsResult(float(res.statistic), int(np.size(a)))


def _histogram(x) -> list[dict]:
    """60 equal bins over the central 0.1%..99.9% range; outliers join the end bins."""
    x = np.asarray(x, dtype=float)
    lo, hi = (float(v) for v in np.quantile(x, [0.001, 0.999]))
    if not hi > lo:
        lo, hi = lo - 0.5, lo + 0.5
    edges = np.linspace(lo, hi, HIST_BINS + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, HIST_BINS - 1)
    counts = np.bincount(idx, minlength=HIST_BINS)
    return [
        {"lo": float(edges[i]), "hi": float(edges[i + 1]), "count": int(counts[i])}
        for i in range(HIST_BINS)
    ]


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class ExperimentReport:
    name: str
    params: dict
    seed: int
    n_samples: int
    per_time: list = field(default_factory=list)
    histogram: list = field(default_factory=list)
    verdict: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = [e["t"] for e in self.per_time]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("per_time entries must have strictly increasing t")
        for e in self.per_time:
            if not 0.0 <= e["ks"] <= 1.0:
                raise ValueError("ks statistics must lie in [0, 1]")
        if self.histogram and sum(b["count"] for b in self.histogram) != self.n_samples:
            raise ValueError("histogram counts must sum to n_samples")

    @property
    def passed(self) -> bool:
        return bool(self.verdict.get("pass", False))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "per_time": [
                {"t": e["t"], "ks": e["ks"], "mean": e["mean"], "variance": e["variance"], "extra": e["extra"]}
                for e in self.per_time
            ],
            "histogram": [{"lo": b["lo"], "hi": b["hi"], "count": b["count"]} for b in self.histogram],
            "verdict": self.verdict,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(
            name=d["name"],
            params=d["params"],
            seed=d["seed"],
            n_samples=d["n_samples"],
            per_time=d["per_time"],
            histogram=d["histogram"],
            verdict=d["verdict"],
        )


def _entry(t, ks, sample, extra=None):
    sample = np.asarray(sample, dtype=float)
    return {
        "t": float(t),
        "ks": float(ks),
        "mean": float(np.mean(sample)),
        "variance": float(np.var(sample, ddof=1)) if sample.size > 1 else 0.0,
        "extra": dict(extra or {}),
    }


def report_to_json(report: ExperimentReport) -> str:
    """Serialise with a fixed key order; refuses NaN and infinities."""
    return json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n"


def _report_to_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    meta = {k: v for k, v in report.to_dict().items() if k not in ("per_time", "histogram")}
    buf.write("# meta " + json.dumps(meta, allow_nan=False) + "\n")
    buf.write("# per_time\n")
    w.writerow(["t", "ks", "mean", "variance", "extra"])
    for e in report.per_time:
        w.writerow([repr(e["t"]), repr(e["ks"]), repr(e["mean"]), repr(e["variance"]),
                    json.dumps(e["extra"], allow_nan=False)])
    buf.write("# histogram\n")
    w.writerow(["lo", "hi", "count"])
    for b in report.histogram:
        w.writerow([repr(b["lo"]), repr(b["hi"]), str(b["count"])])
    return buf.getvalue()


def emit_report(report: ExperimentReport, path, format: str = "json") -> None:
    """Write ``report`` as JSON or sectioned CSV."""
    if format == "json":
        text = report_to_json(report)
    elif format == "csv":
        text = _report_to_csv(report)
    else:
        raise ValueError(f"unknown format {format!r}")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def load_report(path) -> ExperimentReport:
    """Read a report written by :func:`emit_report` (either format)."""
    with open(path, newline="") as fh:
        text = fh.read()
    if not text.startswith("# meta "):
        return ExperimentReport.from_dict(json.loads(text))
    lines = text.splitlines()
    meta = json.loads(lines[0][len("# meta "):])
    section = None
    per_time, hist = [], []
    for row in csv.reader(lines[1:]):
        if row and row[0].startswith("#"):
            section = row[0][2:]
            continue
        if row in (["t", "ks", "mean", "variance", "extra"], ["lo", "hi", "count"]):
            continue
        if section == "per_time":
            per_time.append({"t": float(row[0]), "ks": float(row[1]), "mean": float(row[2]),
                             "variance": float(row[3]), "extra": json.loads(row[4])})
        elif section == "histogram":
            hist.append({"lo": float(row[0]), "hi": float(row[1]), "count": int(row[2])})
    return ExperimentReport(per_time=per_time, histogram=hist, **meta)


# ---------------------------------------------------------------------------
# Replica orchestration
# ---------------------------------------------------------------------------


def _check_run(n, seed, workers):
    if not (isinstance(n, (int, np.integer)) and n > 0):
        raise ValueError("n must be a positive integer")
    if not (isinstance(seed, (int, np.integer)) and 0 <= seed < 2**64):
        raise ValueError("seed must be an integer in [0, 2**64)")
    if not (isinstance(workers, (int, np.integer)) and workers >= 1):
        raise ValueError("workers must be a positive integer")


def _run_blocks(fn, n, seed, workers, stream_offset=0):
    """Apply ``fn(rng, m)`` to consecutive blocks and concatenate in block order.

    ``fn`` may return an array or a tuple of arrays.
    """
    sizes = [min(CHUNK, n - i) for i in range(0, n, CHUNK)]
    jobs = [(RngStream(seed, stream_offset + b), m) for b, m in enumerate(sizes)]
    if workers == 1:
        parts = [fn(r, m) for r, m in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda j: fn(*j), jobs))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)


def _times(times):
    ts = [float(t) for t in times]
    if not ts or any(t <= 0 or not math.isfinite(t) for t in ts):
        raise ValueError("times must be a nonempty list of positive reals")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("times must be strictly increasing")
    return ts


def _strictly_decreasing(v):
    return all(b < a for a, b in zip(v, v[1:]))


def _nonincreasing(v):
    return all(b <= a for a, b in zip(v, v[1:]))


def _verdict(checks: dict, thresholds: dict, required=None) -> dict:
    keys = required if required is not None else list(checks)
    return {
        "pass": bool(all(checks[k] for k in keys)),
        "thresholds": thresholds,
        "checks": {k: bool(v) for k, v in checks.items()},
    }


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


def clt_experiment(alpha, rf: RateFunction, times, n: int, seed: int, workers: int = 1,
                   threshold: float = 0.03) -> ExperimentReport:
    """Compensator-normalised counts ``(N - Lambda(Y)) / sqrt(Lambda(Y))`` vs N(0, 1).

    Replicas whose compensator underflows to 0 are redrawn from the same
    block stream and counted in ``extra["redraw_fraction"]``.
    """
    a = as_alpha(alpha)
    ts = _times(times)
    _check_run(n, seed, workers)
    per_time = []
    last = None
    for t in ts:
        def block(rng, m, t=t):
            cnt, lam, _ = sample_fnpp_marginal(a, rf, t, rng, m, with_compensator=True)
            redraws = 0
            bad = lam <= 0
            while np.any(bad):
                k = int(np.count_nonzero(bad))
                redraws += k
                c2, l2, _ = sample_fnpp_marginal(a, rf, t, rng, k, with_compensator=True)
                cnt[bad], lam[bad] = c2, l2
                bad = lam <= 0
            return (cnt - lam) / np.sqrt(lam), np.array([redraws])

        z, redraws = _run_blocks(block, n, seed, workers)
        ks = ks_one_sample(z, special.ndtr).statistic
        per_time.append(_entry(t, ks, z, {"redraw_fraction": float(redraws.sum()) / n}))
        last = z
    kss = [e["ks"] for e in per_time]
    checks = {"final_ks": kss[-1] < threshold, "ks_decreasing": _strictly_decreasing(kss)}
    return ExperimentReport(
        name="clt",
        params={"alpha": a, "rate": rf.spec(), "times": ts, "workers_independent": True},
        seed=int(seed),
        n_samples=int(n),
        per_time=per_time,
        histogram=_histogram(last),
        verdict=_verdict(checks, {"final_ks": threshold}, ["final_ks"]),
    )


def limit_cdf(alpha, beta: float, n_points: int = 4096):
    """CDF of ``Y_alpha(1)^beta`` by trapezoid integration of its density."""
    grid = build_limit_grid(alpha, beta, 1.0, n_points)
    return grid.cdf


def scaling_experiment(alpha, rf: RateFunction, times, n: int, seed: int, workers: int = 1,
                       threshold: float = 0.05) -> ExperimentReport:
    """``N_alpha(t) / Lambda(t^alpha)`` vs the law of ``Y_alpha(1)^beta``.

    ``beta`` is the declared index of regular variation of ``rf``.
    """
    a = as_alpha(alpha)
    beta = rf.declared_rv_index
    if beta is None:
        raise ValueError("scaling experiment needs a regularly varying rate (linear or weibull)")
    ts = _times(times)
    _check_run(n, seed, workers)
    ref = limit_cdf(a, beta)
    limit_mean = math.gamma(1 + beta) / math.gamma(1 + a * beta)
    per_time = []
    last = None
    for t in ts:
        norm = cumulative(rf, t**a)
        x = _run_blocks(lambda rng, m, t=t: sample_fnpp_marginal(a, rf, t, rng, m) / norm, n, seed, workers)
        ks = ks_one_sample(x, ref).statistic
        se = float(np.std(x, ddof=1) / math.sqrt(n))
        per_time.append(_entry(t, ks, x, {"limit_mean": limit_mean, "mean_se": se}))
        last = x
    kss = [e["ks"] for e in per_time]
    checks = {"final_ks": kss[-1] < threshold, "ks_decreasing": _strictly_decreasing(kss)}
    return ExperimentReport(
        name="scaling",
        params={"alpha": a, "rate": rf.spec(), "beta": beta, "times": ts},
        seed=int(seed),
        n_samples=int(n),
        per_time=per_time,
        histogram=_histogram(last),
        verdict=_verdict(checks, {"final_ks": threshold}, ["final_ks"]),
    )


def alpha_to_one_experiment(alphas, rf: RateFunction, t: float, k_max: int = 60,
                            threshold: float = 0.05) -> ExperimentReport:
    """Total variation between the FNPP marginal and Poisson(``Lambda(t)``) as ``alpha -> 1``.

    Deterministic; ``ks`` holds the truncated TV distance and there is no
    histogram.
    """
    als = [float(as_alpha(x)) for x in alphas]
    if not als or any(b <= a for a, b in zip(als, als[1:])):
        raise ValueError("alphas must be a nonempty increasing list")
    if not t > 0:
        raise ValueError("t must be positive")
    ks = np.arange(int(k_max) + 1)
    lam_t = cumulative(rf, t)
    pois = stats.poisson.pmf(ks, lam_t)
    per_time = []
    for a in als:
        pmf = fnpp_pmf_table(a, rf, t, k_max)
        tv = 0.5 * float(np.sum(np.abs(pmf - pois)))
        mean = float(np.sum(ks * pmf))
        var = float(np.sum(ks**2 * pmf) - mean**2)
        per_time.append({"t": a, "ks": tv, "mean": mean, "variance": var,
                         "extra": {"alpha": a, "pmf_mass": float(pmf.sum())}})
    tvs = [e["ks"] for e in per_time]
    checks = {"tv_decreasing": _strictly_decreasing(tvs), "final_tv": tvs[-1] < threshold}
    return ExperimentReport(
        name="alpha_to_one",
        params={"alphas": als, "rate": rf.spec(), "t": float(t), "k_max": int(k_max), "scan": "alpha",
                "statistic": "total_variation", "poisson_tail": float(stats.poisson.sf(k_max, lam_t))},
        seed=0,
        n_samples=int(k_max) + 1,
        per_time=per_time,
        histogram=[],
        verdict=_verdict(checks, {"final_tv": threshold}),
    )


def stability_experiment(alpha, lambda_: float, times, epsilons, n: int, seed: int, workers: int = 1,
                         threshold: float = 0.1) -> ExperimentReport:
    """Exceedance probabilities ``P(|N_alpha(t) / (C t^alpha) - 1| > eps)``, ``C = lambda / Gamma(1+alpha)``.

    ``ks`` compares ``N/(C t^alpha)`` with the law of ``Gamma(1+alpha) Y_alpha(1)``.
    """
    a = as_alpha(alpha)
    ts = _times(times)
    eps = [float(e) for e in epsilons]
    if not eps or any(e <= 0 for e in eps):
        raise ValueError("epsilons must be positive")
    _check_run(n, seed, workers)
    rf = RateFunction.linear(lambda_)
    c = lambda_ / math.gamma(1 + a)
    g = math.gamma(1 + a)
    y_cdf = build_density_grid(a, 1.0, 1024).cdf
    per_time = []
    exceed = {e: [] for e in eps}
    last = None
    for t in ts:
        x = _run_blocks(lambda rng, m, t=t: sample_fnpp_marginal(a, rf, t, rng, m) / (c * t**a), n, seed, workers)
        extra = {}
        for e in eps:
            p = float(np.mean(np.abs(x - 1.0) > e))
            exceed[e].append(p)
            extra[f"exceed_eps={e!r}"] = p
        ks = ks_one_sample(x, lambda v: y_cdf(v / g)).statistic
        per_time.append(_entry(t, ks, x, extra))
        last = x
    checks = {}
    for e in eps:
        checks[f"nonincreasing_eps={e!r}"] = _nonincreasing(exceed[e])
        checks[f"final_below_eps={e!r}"] = exceed[e][-1] < threshold
    return ExperimentReport(
        name="stability",
        params={"alpha": a, "lambda": float(lambda_), "times": ts, "epsilons": eps, "C": c},
        seed=int(seed),
        n_samples=int(n),
        per_time=per_time,
        histogram=_histogram(last),
        verdict=_verdict(checks, {"final_exceedance": threshold}),
    )


def pareto_stable_sigma(tail_index: float, scale: float) -> float:
    """Classical norming: ``m^{-1/a}`` times centred Pareto sums tends to ``S_a(sigma, 1, 0)``."""
    a = tail_index
    c_a = (1 - a) / (math.gamma(2 - a) * math.cos(math.pi * a / 2))
    return (scale**a / c_a) ** (1 / a)


def _calibrate_sigma(jump: JumpDistribution, seed: int, workers: int, m: int = 10**5,
                     n_cal: int = 2000, n_ref: int = 10**5) -> float:
    """Fit ``sigma`` by matching the interquartile range of ``m^{-1/a} S_m``
    to that of standard ``S_a(1, 1, 0)`` draws."""
    a = jump.tail_index
    sums = _run_blocks(lambda rng, k: _sum_jumps(jump, np.full(k, m), rng), n_cal, seed, workers, _CAL_STREAM)
    sums = sums * m ** (-1 / a)
    std = _run_blocks(lambda rng, k: sample_stable(StableLawParams(a, 1.0, 1.0, 0.0), rng, k),
                      n_ref, seed, workers, _CAL_STREAM + (1 << 20))
    q = [0.25, 0.75]
    return float(np.diff(np.quantile(sums, q))[0] / np.diff(np.quantile(std, q))[0])


def anscombe_experiment(alpha, lambda_: float, jump: JumpDistribution, times, n: int, seed: int,
                        workers: int = 1, threshold: float | None = None) -> ExperimentReport:
    """Randomly indexed compound sums ``a_m Z_alpha(t)`` with ``m = floor(C t^alpha)``.

    Compared by two-sample KS with direct draws from the stable limit:
    ``N(0, sd^2)`` for Gaussian jumps, ``S_a(sigma*, 1, 0)`` for centred
    Pareto jumps where ``sigma*`` is calibrated on plain partial sums.
    """
    a = as_alpha(alpha)
    ts = _times(times if isinstance(times, (list, tuple)) else [times])
    _check_run(n, seed, workers)
    if jump.kind == "pareto" and not (1 < jump.tail_index < 2 and jump.centered):
        raise ValueError("anscombe experiment supports centred pareto jumps with tail index in (1, 2)")
    if jump.kind == "gaussian" and jump.mean != 0:
        raise ValueError("anscombe experiment needs centred gaussian jumps")
    rf = RateFunction.linear(lambda_)
    c = lambda_ / math.gamma(1 + a)
    if jump.kind == "gaussian":
        index = 2.0
        ref_params = StableLawParams(2.0, jump.sd / math.sqrt(2.0), 0.0, 0.0)
        params_extra = {}
        threshold = 0.05 if threshold is None else threshold
    else:
        index = jump.tail_index
        sigma = _calibrate_sigma(jump, seed, workers)
        ref_params = StableLawParams(index, sigma, 1.0, 0.0)
        params_extra = {"sigma_calibrated": sigma, "sigma_theory": pareto_stable_sigma(index, jump.scale)}
        threshold = 0.07 if threshold is None else threshold
    ref = _run_blocks(lambda rng, k: sample_stable(ref_params, rng, k), n, seed, workers, _REF_STREAM)
    per_time = []
    last = None
    for t in ts:
        m = math.floor(c * t**a)
        a_m = m ** (-1 / index) if m >= 1 else 1.0
        z, cnt = _run_blocks(
            lambda rng, k, t=t: sample_compound_marginal(a, rf, jump, t, rng, k, with_counts=True), n, seed, workers
        )
        x = a_m * z
        zero_frac = float(np.mean(cnt == 0))
        ks = ks_two_sample(x, ref).statistic
        per_time.append(_entry(t, ks, x, {"m": m, "zero_count_fraction": zero_frac,
                                          "insufficient_t": bool(zero_frac > 0.5 or m < 1)}))
        last = x
    checks = {"final_ks": per_time[-1]["ks"] < threshold}
    return ExperimentReport(
        name="anscombe",
        params={"alpha": a, "lambda": float(lambda_), "jump": jump.kind, "tail_index": index,
                "scale": jump.scale if jump.kind == "pareto" else jump.sd, "times": ts, "C": c,
                "reference": {"alpha_s": ref_params.alpha_s, "sigma": ref_params.sigma,
                              "beta_s": ref_params.beta_s, "mu": ref_params.mu}, **params_extra},
        seed=int(seed),
        n_samples=int(n),
        per_time=per_time,
        histogram=_histogram(last),
        verdict=_verdict(checks, {"final_ks": threshold}),
    )


def brownian_mixture_cdf(alpha, t: float, n_points: int = 1024):
    """``F(x) = int Phi(x / sqrt(u)) h_alpha(t, u) du`` on the tabulated density."""
    grid = build_density_grid(alpha, t, n_points)
    u = grid.x
    w = grid.h / grid.mass

    def cdf(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(x.size)
        su = np.sqrt(u)
        for s in range(0, x.size, 2048):
            xs = x[s:s + 2048, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                phi = np.where(su > 0, special.ndtr(xs / np.where(su > 0, su, 1.0)),
                               np.where(xs > 0, 1.0, np.where(xs < 0, 0.0, 0.5)))
            out[s:s + 2048] = integrate.trapezoid(phi * w, u, axis=1)
        return np.clip(out, 0.0, 1.0)

    return cdf


def brownian_mixture_experiment(alpha, lambdas, t: float, n: int, seed: int, workers: int = 1,
                                threshold: float = 0.05) -> ExperimentReport:
    """``(N - lambda Y) / sqrt(lambda)`` for the FHPP vs the mixture ``B(Y_alpha(t))``."""
    a = as_alpha(alpha)
    lams = _times(lambdas)
    _check_run(n, seed, workers)
    if not t > 0:
        raise ValueError("t must be positive")
    ref = brownian_mixture_cdf(a, t)
    per_time = []
    last = None
    for lam in lams:
        rf = RateFunction.linear(lam)

        def block(rng, m, lam=lam, rf=rf):
            cnt, _, y = sample_fnpp_marginal(a, rf, t, rng, m, with_compensator=True)
            return (cnt - lam * y) / math.sqrt(lam)

        x = _run_blocks(block, n, seed, workers)
        per_time.append(_entry(lam, ks_one_sample(x, ref).statistic, x, {"lambda": lam}))
        last = x
    kss = [e["ks"] for e in per_time]
    checks = {"ks_decreasing": _strictly_decreasing(kss), "final_ks": kss[-1] < threshold}
    return ExperimentReport(
        name="brownian_mixture",
        params={"alpha": a, "lambdas": lams, "t": float(t), "scan": "lambda"},
        seed=int(seed),
        n_samples=int(n),
        per_time=per_time,
        histogram=_histogram(last),
        verdict=_verdict(checks, {"final_ks": threshold}),
    )
