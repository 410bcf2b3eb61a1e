"""Command line interface: ``fracpois <command> ...``.

Exit codes: 0 success (and passing verdict), 1 failing verdict, 2 usage
error, 3 numerical failure.  Options may also come from ``--config FILE``
with one ``key = value`` per line; command line flags take precedence.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments as ex
from . import processes as pr
from . import specfun as sf
from . import subordinator as sb
from .errors import FracPoisError, NumericalInstability
from .laplace import PRECISE_CONFIG
from .rates import RateFunction

__all__ = ["main", "run", "parse_rate_spec", "RateSpecError"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class RateSpecError(ValueError):
    def __init__(self, spec: str, pos: int, msg: str):
        super().__init__(f"bad rate spec {spec!r} at position {pos}: {msg}")
        self.pos = pos


_RATE_KEYS = {"linear": ("lambda",), "weibull": ("b", "c"), "makeham": ("c", "b", "mu")}


def parse_rate_spec(s: str) -> RateFunction:
    """Parse ``linear:lambda=v``, ``weibull:b=v,c=v`` or ``makeham:c=v,b=v,mu=v``."""
    kind, sep, rest = s.partition(":")
    if kind not in _RATE_KEYS:
        raise RateSpecError(s, 0, f"unknown kind {kind!r}, expected one of {sorted(_RATE_KEYS)}")
    if not sep:
        raise RateSpecError(s, len(kind), "expected ':' after the kind")
    values = {}
    pos = len(kind) + 1
    for item in rest.split(","):
        key, eq, val = item.partition("=")
        key = key.strip()
        if not eq:
            raise RateSpecError(s, pos, f"expected key=value, got {item!r}")
        if key not in _RATE_KEYS[kind]:
            raise RateSpecError(s, pos, f"unknown parameter {key!r} for {kind}")
        if key in values:
            raise RateSpecError(s, pos, f"duplicate parameter {key!r}")
        try:
            values[key] = float(val)
        except ValueError:
            raise RateSpecError(s, pos + len(key) + 1, f"not a number: {val!r}") from None
        pos += len(item) + 1
    missing = [k for k in _RATE_KEYS[kind] if k not in values and not (kind == "makeham" and k == "mu")]
    if missing:
        raise RateSpecError(s, len(s), f"missing parameter(s) {missing}")
    if kind == "linear":
        return RateFunction.linear(values["lambda"])
    if kind == "weibull":
        return RateFunction.weibull(values["b"], values["c"])
    return RateFunction.makeham(values["c"], values["b"], values.get("mu", 0.0))


def _rate_arg(s: str) -> RateFunction:
    try:
        return parse_rate_spec(s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _float_list(s: str) -> list[float]:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {s!r}") from None


def _threshold(s: str):
    key, eq, val = s.partition("=")
    if not eq:
        raise argparse.ArgumentTypeError(f"expected key=value, got {s!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {val!r}") from None


def _xmax(s: str):
    if s == "auto":
        return s
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError("--xmax must be 'auto' or a positive number") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("--xmax must be positive")
    return v


# ---------------------------------------------------------------------------
# Parser construction
# ---------------------------------------------------------------------------


def _leaf(sub, name, help_, func, required=()):
    p = sub.add_parser(name, help=help_, description=help_)
    p.set_defaults(func=func, _required=tuple(required))
    p.add_argument("--config", help="key = value file supplying option defaults")
    return p


def _opt(p, flag, **kw):
    p.add_argument(flag, **kw)


def _common_out(p, fmt=False):
    _opt(p, "--out", help="output file (default: standard output)")
    if fmt:
        _opt(p, "--format", choices=("json", "csv"), default="json")


def _rand(p):
    _opt(p, "--seed", type=int, help="64-bit seed (required)")


def build_parser() -> tuple[argparse.ArgumentParser, list]:
    parser = argparse.ArgumentParser(prog="fracpois", description=__doc__.split("\n")[0])
    parser.add_argument("--config", help="key = value file supplying option defaults")
    top = parser.add_subparsers(dest="command", metavar="command")
    top.required = True
    leaves = []

    # eval
    pe = top.add_parser("eval", help="evaluate special functions").add_subparsers(dest="what", metavar="function")
    pe.required = True
    p = _leaf(pe, "ml", "Mittag-Leffler function E_alpha(x)", _cmd_eval_ml, ("alpha", "x"))
    _opt(p, "--alpha", type=float, help="0 < alpha <= 1")
    _opt(p, "--x", type=float)
    leaves.append(p)
    p = _leaf(pe, "ml-survival", "E_alpha(-lambda t^alpha)", _cmd_eval_mls, ("alpha", "t"))
    _opt(p, "--alpha", type=float)
    _opt(p, "--lambda", dest="lam", type=float, default=1.0)
    _opt(p, "--t", type=float)
    leaves.append(p)
    p = _leaf(pe, "g", "one-sided stable density g_alpha(z)", _cmd_eval_g, ("alpha", "z"))
    _opt(p, "--alpha", type=float)
    _opt(p, "--z", type=float)
    leaves.append(p)
    p = _leaf(pe, "h", "inverse stable subordinator density h_alpha(t, x)", _cmd_eval_h, ("alpha", "t", "x"))
    _opt(p, "--alpha", type=float)
    _opt(p, "--t", type=float)
    _opt(p, "--x", type=float)
    _opt(p, "--route", choices=("series", "laplace"), default="series")
    leaves.append(p)

    # density
    pd = top.add_parser("density", help="tabulate densities as CSV").add_subparsers(dest="what", metavar="density")
    pd.required = True
    p = _leaf(pd, "inv-subordinator", "density of Y_alpha(t) on a grid", _cmd_density_inv, ("alpha", "t"))
    _opt(p, "--alpha", type=float)
    _opt(p, "--t", type=float)
    _opt(p, "--xmax", type=_xmax, default="auto")
    _opt(p, "--n-points", dest="n_points", type=int, default=512)
    _common_out(p)
    leaves.append(p)
    p = _leaf(pd, "limit", "density of Y_alpha(t)^beta on a grid", _cmd_density_limit, ("alpha", "beta", "t"))
    _opt(p, "--alpha", type=float)
    _opt(p, "--beta", type=float)
    _opt(p, "--t", type=float, default=1.0)
    _opt(p, "--n-points", dest="n_points", type=int, default=512)
    _common_out(p)
    leaves.append(p)

    # sample
    ps = top.add_parser("sample", help="draw samples").add_subparsers(dest="what", metavar="sampler")
    ps.required = True
    samplers = {
        "stable-subordinator": ("L_alpha(1) draws", ("alpha",)),
        "inverse-subordinator": ("Y_alpha(t) draws", ("alpha", "t")),
        "fnpp": ("FNPP marginal counts N_alpha(t)", ("alpha", "rate", "t")),
        "gergely": ("FNPP counts from record values", ("alpha", "rate", "t")),
        "fhpp": ("FHPP counts from the renewal construction", ("alpha", "lam", "t")),
        "compound": ("compound FNPP marginal Z_alpha(t)", ("alpha", "rate", "t")),
        "stable": ("stable law S_a(sigma, beta, mu) draws", ("alpha_s",)),
        "fhpp-path": ("one FHPP path (event times)", ("alpha", "lam", "horizon")),
        "fnpp-path": ("one FNPP path on an operational-time grid", ("alpha", "rate", "horizon", "grid_step")),
        "nhpp-path": ("one NHPP path", ("rate", "horizon")),
    }
    for name, (help_, req) in samplers.items():
        p = _leaf(ps, name, help_, _cmd_sample, ("seed",) + req)
        _rand(p)
        _opt(p, "--n", type=int, default=1000, help="number of draws")
        _opt(p, "--alpha", type=float)
        _opt(p, "--t", type=float)
        _opt(p, "--horizon", type=float)
        _opt(p, "--grid-step", dest="grid_step", type=float)
        _opt(p, "--rate", type=_rate_arg, help="linear:lambda=v | weibull:b=v,c=v | makeham:c=v,b=v,mu=v")
        _opt(p, "--lambda", dest="lam", type=float)
        _opt(p, "--method", choices=("stable_identity", "discrete_inversion"), default="stable_identity")
        _opt(p, "--jump", choices=("gaussian", "pareto"), default="gaussian")
        _opt(p, "--jump-mean", dest="jump_mean", type=float, default=0.0)
        _opt(p, "--jump-sd", dest="jump_sd", type=float, default=1.0)
        _opt(p, "--tail-index", dest="tail_index", type=float, default=1.5)
        _opt(p, "--scale", type=float, default=1.0)
        _opt(p, "--alpha-s", dest="alpha_s", type=float)
        _opt(p, "--sigma", type=float, default=1.0)
        _opt(p, "--beta-s", dest="beta_s", type=float, default=0.0)
        _opt(p, "--mu", type=float, default=0.0)
        _opt(p, "--stream", type=int, default=0, help="stream id within the seed")
        _common_out(p)
        p.set_defaults(sampler=name)
        leaves.append(p)

    # pmf
    p = _leaf(top, "pmf", "FNPP marginal pmf P(N_alpha(t) = k)", _cmd_pmf, ("alpha", "rate", "t"))
    _opt(p, "--alpha", type=float)
    _opt(p, "--rate", type=_rate_arg)
    _opt(p, "--t", type=float)
    _opt(p, "--k", type=int, help="single k (default: table up to --k-max)")
    _opt(p, "--k-max", dest="k_max", type=int, default=20)
    _common_out(p)
    leaves.append(p)

    # experiments
    px = top.add_parser("experiment", help="run Monte Carlo experiments").add_subparsers(dest="what", metavar="experiment")
    px.required = True
    exps = {
        "clt": ("compensator-normalised CLT", ("alpha", "rate", "times")),
        "scaling": ("regular-variation scaling limit", ("alpha", "rate", "times")),
        "alpha-to-one": ("TV distance to Poisson as alpha -> 1", ("alphas", "rate", "t")),
        "stability": ("relative stability exceedances", ("alpha", "lam", "times", "epsilons")),
        "anscombe": ("randomly indexed compound sums vs stable law", ("alpha", "lam", "times")),
        "brownian": ("Brownian mixture limit over lambda", ("alpha", "lambdas", "t")),
    }
    for name, (help_, req) in exps.items():
        extra = () if name == "alpha-to-one" else ("seed",)
        p = _leaf(px, name, help_, _cmd_experiment, extra + req)
        _rand(p)
        _opt(p, "--alpha", type=float)
        _opt(p, "--alphas", type=_float_list)
        _opt(p, "--rate", type=_rate_arg)
        _opt(p, "--lambda", dest="lam", type=float)
        _opt(p, "--lambdas", type=_float_list)
        _opt(p, "--t", type=float)
        _opt(p, "--times", type=_float_list)
        _opt(p, "--epsilons", type=_float_list)
        _opt(p, "--k-max", dest="k_max", type=int, default=60)
        _opt(p, "--n", type=int, default=10000)
        _opt(p, "--workers", type=int, default=1)
        _opt(p, "--jump", choices=("gaussian", "pareto"), default="gaussian")
        _opt(p, "--jump-sd", dest="jump_sd", type=float, default=1.0)
        _opt(p, "--tail-index", dest="tail_index", type=float, default=1.5)
        _opt(p, "--scale", type=float, default=1.0)
        _opt(p, "--threshold", type=_threshold, action="append", default=None,
             help="override a verdict threshold, e.g. final_ks=0.04")
        _common_out(p, fmt=True)
        p.set_defaults(experiment=name)
        leaves.append(p)
    return parser, leaves


# ---------------------------------------------------------------------------
# Config file handling
# ---------------------------------------------------------------------------


def _read_config(path: str) -> dict:
    cfg = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for no, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, val = line.partition("=")
        if not eq:
            raise UsageError(f"{path}:{no}: expected 'key = value'")
        cfg[key.strip().replace("-", "_")] = val.strip()
    return cfg


def _apply_config(leaves, cfg: dict) -> None:
    known = set()
    for p in leaves:
        dests = {a.dest: a for a in p._actions}
        aliases = {a.option_strings[0].lstrip("-").replace("-", "_"): a.dest for a in p._actions if a.option_strings}
        values = {}
        for key, val in cfg.items():
            dest = aliases.get(key, key)
            if dest in dests and dest not in ("help", "config"):
                action = dests[dest]
                # argparse does not convert defaults of append actions
                values[dest] = [action.type(val)] if isinstance(action, argparse._AppendAction) else val
                known.add(key)
        p.set_defaults(**values)
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _check_finite(values, what="output"):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericalInstability(f"non-finite values in {what}")


def _emit_text(text: str, out) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _print_value(v: float) -> int:
    _check_finite([v])
    print(repr(float(v)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _cmd_eval_ml(a):
    return _print_value(sf.mittag_leffler(a.alpha, a.x))


def _cmd_eval_mls(a):
    return _print_value(sf.ml_survival(a.alpha, a.lam, a.t))


def _cmd_eval_g(a):
    return _print_value(sf.stable_density_g(a.alpha, a.z))


def _cmd_eval_h(a):
    if a.route == "laplace":
        return _print_value(sb.inv_stable_density_via_laplace(a.alpha, a.t, a.x, PRECISE_CONFIG))
    return _print_value(sb.inv_stable_density(a.alpha, a.t, a.x))


def _grid_csv(x, h) -> str:
    _check_finite(h, "density")
    lines = ["x,h"] + [f"{xi:.17g},{hi:.17g}" for xi, hi in zip(x, h)]
    return "\n".join(lines) + "\n"


def _cmd_density_inv(a):
    if a.n_points < 64:
        raise UsageError("--n-points must be >= 64")
    if a.xmax == "auto":
        grid = sb.build_density_grid(a.alpha, a.t, a.n_points)
        x, h = grid.x, grid.h
    else:
        x = sb._grid_nodes(a.xmax, a.n_points)
        h = np.array([sb.inv_stable_density(a.alpha, a.t, xi) for xi in x])
    _emit_text(_grid_csv(x, h), a.out)
    return EXIT_OK


def _cmd_density_limit(a):
    if a.n_points < 64:
        raise UsageError("--n-points must be >= 64")
    grid = sb.build_limit_grid(a.alpha, a.beta, a.t, a.n_points)
    _emit_text(_grid_csv(grid.x, grid.h), a.out)
    return EXIT_OK


def _values_csv(values, header="value") -> str:
    arr = np.asarray(values).reshape(-1)
    if np.issubdtype(arr.dtype, np.integer):
        body = [str(int(v)) for v in arr]
    else:
        _check_finite(arr, "samples")
        body = [f"{v:.17g}" for v in arr]
    return "\n".join([header, *body]) + "\n"


def _cmd_sample(a):
    if a.n < 1:
        raise UsageError("--n must be positive")
    rng = sb.RngStream(a.seed, a.stream)
    s = a.sampler
    if s == "stable-subordinator":
        out = sb.sample_stable_subordinator(a.alpha, rng, a.n)
    elif s == "inverse-subordinator":
        out = sb.sample_inverse_subordinator(a.alpha, a.t, rng, a.method, a.n)
    elif s == "fnpp":
        out = pr.sample_fnpp_marginal(a.alpha, a.rate, a.t, rng, a.n)
    elif s == "gergely":
        out = pr.sample_fnpp_gergely_count(a.alpha, a.rate, a.t, rng, a.n)
    elif s == "fhpp":
        out = np.array([pr.sample_fhpp_count(a.alpha, a.lam, a.t, rng) for _ in range(a.n)], dtype=np.int64)
    elif s == "compound":
        jump = _jump(a, centered_mean=a.jump_mean)
        out = pr.sample_compound_marginal(a.alpha, a.rate, jump, a.t, rng, a.n)
    elif s == "stable":
        out = pr.sample_stable(pr.StableLawParams(a.alpha_s, a.sigma, a.beta_s, a.mu), rng, a.n)
    else:
        if s == "fhpp-path":
            path = pr.sample_fhpp_renewal(a.alpha, a.lam, a.horizon, rng)
        elif s == "fnpp-path":
            path = pr.sample_fnpp_path(a.alpha, a.rate, a.horizon, a.grid_step, rng)
        else:
            path = pr.sample_nhpp(a.rate, a.horizon, rng)
        _emit_text(_values_csv(path.events.astype(float), "event_time"), a.out)
        return EXIT_OK
    _emit_text(_values_csv(out), a.out)
    return EXIT_OK


def _jump(a, centered_mean=0.0):
    if a.jump == "gaussian":
        return pr.JumpDistribution.gaussian(centered_mean, a.jump_sd)
    return pr.JumpDistribution.pareto(a.tail_index, a.scale, True)


def _cmd_pmf(a):
    if a.k is not None:
        if a.k < 0:
            raise UsageError("--k must be nonnegative")
        return _print_value(pr.fnpp_pmf(a.alpha, a.rate, a.t, a.k))
    if a.k_max < 0:
        raise UsageError("--k-max must be nonnegative")
    table = pr.fnpp_pmf_table(a.alpha, a.rate, a.t, a.k_max)
    _check_finite(table, "pmf")
    lines = ["k,pmf"] + [f"{k},{p:.17g}" for k, p in enumerate(table)]
    _emit_text("\n".join(lines) + "\n", a.out)
    return EXIT_OK


_THRESHOLD_KEYS = {
    "clt": "final_ks", "scaling": "final_ks", "alpha-to-one": "final_tv",
    "stability": "final_exceedance", "anscombe": "final_ks", "brownian": "final_ks",
}


def _cmd_experiment(a):
    name = a.experiment
    kw = {}
    for key, val in a.threshold or []:
        if key != _THRESHOLD_KEYS[name]:
            raise UsageError(f"experiment {name} has threshold {_THRESHOLD_KEYS[name]!r}, not {key!r}")
        kw["threshold"] = val
    if name != "alpha-to-one":
        if a.n < 1 or a.workers < 1:
            raise UsageError("--n and --workers must be positive")
        run = {"n": a.n, "seed": a.seed, "workers": a.workers}
    if name == "clt":
        rep = ex.clt_experiment(a.alpha, a.rate, a.times, **run, **kw)
    elif name == "scaling":
        if a.rate.declared_rv_index is None:
            raise UsageError("scaling needs a regularly varying rate (linear or weibull)")
        rep = ex.scaling_experiment(a.alpha, a.rate, a.times, **run, **kw)
    elif name == "alpha-to-one":
        rep = ex.alpha_to_one_experiment(a.alphas, a.rate, a.t, a.k_max, **kw)
    elif name == "stability":
        rep = ex.stability_experiment(a.alpha, a.lam, a.times, a.epsilons, **run, **kw)
    elif name == "anscombe":
        rep = ex.anscombe_experiment(a.alpha, a.lam, _jump(a), a.times, **run, **kw)
    else:
        rep = ex.brownian_mixture_experiment(a.alpha, a.lambdas, a.t, **run, **kw)
    if a.format == "json":
        text = ex.report_to_json(rep)
    else:
        text = ex._report_to_csv(rep)
    _emit_text(text, a.out)
    summary = ", ".join(f"t={e['t']:g} ks={e['ks']:.4f}" for e in rep.per_time)
    print(f"{rep.name}: {summary}; verdict {'PASS' if rep.passed else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def run(argv=None) -> int:
    """Parse ``argv``, run the command and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv)
        if known.config:
            _apply_config(leaves, _read_config(known.config))
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0) and EXIT_USAGE
        missing = [r for r in args._required if getattr(args, r, None) is None]
        if missing:
            raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
        return args.func(args)
    except UsageError as exc:
        print(f"fracpois: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, FracPoisError) as exc:
        if isinstance(exc, ValueError):
            print(f"fracpois: invalid argument: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"fracpois: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RuntimeError as exc:
        print(f"fracpois: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"fracpois: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fracpois: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
