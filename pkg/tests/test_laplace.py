import math

import mpmath
import numpy as np
import pytest

from fracpois.errors import DomainError, NumericalInstability
from fracpois.laplace import (
    DEFAULT_CONFIG,
    PRECISE_CONFIG,
    InversionConfig,
    LaplaceTransform,
    gaver_functional,
    invert,
    invert_with_error,
)
from fracpois.subordinator import inverse_subordinator_ppf

ONE = LaplaceTransform(lambda s: 1 / s)
EXP = LaplaceTransform(lambda s: 1 / (s + 1))
HALF = LaplaceTransform(lambda s: s**-0.5 * mpmath.exp(-mpmath.sqrt(s)))
RAMP = LaplaceTransform(lambda s: 1 / s**2)


def ramp_functional(t, n):
    """Exact Gaver functional of F(s) = 1/s^2, f(t) = t.

    Summing the binomial series in closed form gives
    G_n(t) = t (H_{2n} - H_{n-1}) / ln 2 with H the harmonic numbers.
    """
    h = lambda m: sum(1 / k for k in range(1, m + 1))
    return t * (h(2 * n) - h(n - 1)) / math.log(2)


class TestConfig:
    def test_defaults(self):
        assert DEFAULT_CONFIG.n_terms == 14
        assert DEFAULT_CONFIG.acceleration == "salzer"

    @pytest.mark.parametrize("kw", [{"n_terms": 3}, {"n_terms": 15}, {"n_terms": 2}, {"acceleration": "euler"},
                                    {"n_terms": 34, "dps": None}, {"dps": 10}, {"tol": 0}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            InversionConfig(**kw)


class TestInvert:
    def test_examples(self):
        assert invert(ONE, 3.0) == pytest.approx(1.0, abs=1e-12)
        assert invert(EXP, 1.0) == pytest.approx(math.exp(-1), rel=1e-4)
        assert invert(HALF, 1.0) == pytest.approx(0.43939128947, rel=1e-4)

    def test_constant_exact(self):
        for t in (0.5, 1.0, 5.0, 20.0):
            assert abs(invert(ONE, t) - 1.0) <= 1e-10

    def test_salzer_beats_plain(self):
        plain = InversionConfig(acceleration="none")
        for f, t, exact in ((ONE, 3.0, 1.0), (EXP, 1.0, math.exp(-1)), (HALF, 1.0, 0.43939128947)):
            assert abs(invert_with_error(f, t)[0] - exact) <= abs(invert_with_error(f, t, plain)[0] - exact)

    def test_double_precision_path(self):
        cfg = InversionConfig(dps=None)
        assert invert(EXP, 1.0, cfg) == pytest.approx(math.exp(-1), rel=1e-4)

    def test_precise_config(self):
        assert invert(HALF, 1.0, PRECISE_CONFIG) == pytest.approx(0.43939128947, rel=1e-9)
        assert invert(EXP, 2.0, PRECISE_CONFIG) == pytest.approx(math.exp(-2), rel=1e-8)

    def test_density_transforms_nonnegative(self):
        # 50 central points per alpha: 5 times x 10 quantile levels of Y_alpha(t)
        for a in (0.3, 0.6, 0.9):
            for t in (0.5, 1.0, 2.0, 5.0, 10.0):
                for p in np.linspace(0.01, 0.99, 10):
                    x = inverse_subordinator_ppf(a, t, p)
                    f = LaplaceTransform(lambda s, a=a, x=x: s ** (a - 1) * mpmath.exp(-x * s**a))
                    assert invert(f, t, PRECISE_CONFIG) >= -1e-6

    def test_domain(self):
        with pytest.raises(DomainError):
            invert(ONE, 0.0)
        with pytest.raises(DomainError):
            invert(ONE, -1.0)
        shifted = LaplaceTransform(lambda s: 1 / (s - 2), domain_min=2.0)
        with pytest.raises(DomainError):
            invert(shifted, 1.0)
        assert invert(shifted, 0.1, PRECISE_CONFIG) == pytest.approx(math.exp(0.2), rel=1e-6)

    def test_instability_detected(self):
        # a narrow peak cannot be resolved by 14 nodes
        peaked = LaplaceTransform(lambda s: s ** (0.9 - 1) * mpmath.exp(-0.05 * s**0.9))
        with pytest.raises(NumericalInstability):
            invert(peaked, 0.2)


class TestGaverFunctional:
    def test_constant(self):
        assert gaver_functional(ONE, 1.0, 4) == pytest.approx(1.0, abs=1e-12)

    def test_exp_monotone(self):
        g = [gaver_functional(EXP, 1.0, n) for n in range(2, 13)]
        err = [abs(v - math.exp(-1)) for v in g]
        assert all(b < a for a, b in zip(err, err[1:]))

    def test_ramp_matches_closed_form(self):
        # alternating double-precision sums lose digits as n grows
        for n, rel in ((1, 1e-12), (4, 1e-10), (8, 1e-8), (12, 1e-5)):
            assert gaver_functional(RAMP, 2.0, n) == pytest.approx(ramp_functional(2.0, n), rel=rel)
        # G_8 = 2.2733, so the O(1/n) bias at n = 8 is about 0.27
        assert gaver_functional(RAMP, 2.0, 8) == pytest.approx(2.27332, abs=1e-5)
        errs = [abs(gaver_functional(RAMP, 2.0, n) - 2.0) for n in (4, 8, 12)]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        exact = [abs(ramp_functional(2.0, n) - 2.0) for n in (8, 16, 32, 64)]
        assert all(b < a for a, b in zip(exact, exact[1:]))

    def test_large_n_no_overflow(self):
        assert math.isfinite(gaver_functional(ONE, 1.0, 200))
