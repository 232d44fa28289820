import math

import numpy as np
import pytest
from scipy import special

from vgfx.errors import ConfigError
from vgfx.model import SubordinatorParams, fx_case_study
from vgfx.subordinator import (RngStream, draw_block, draw_blocks, sample_gamma_increments,
                               sample_subordinated_increments, standard_gamma_mt)


def within(sample_stat, target, se, k):
    return abs(sample_stat - target) <= k * se


def gamma_var_se(shape, rate, n):
    # Var of the sample variance ~ (mu4 - sigma^4)/n with mu4 = 3k(k+2)/rate^4
    var = shape / rate ** 2
    mu4 = 3 * shape * (shape + 2) / rate ** 4
    return math.sqrt((mu4 - var * var) / n)


class TestGammaIncrements:
    def test_unit_rate_moments(self):
        sub = SubordinatorParams(1.0, 1.0)
        n = 10 ** 6
        x = sample_gamma_increments(sub, 0.1, n, RngStream(11))
        assert within(x.mean(), 0.1, math.sqrt(0.1 / n), 4)
        assert within(x.var(ddof=1), 0.1, gamma_var_se(0.1, 1.0, n), 4)

    def test_figure_configuration_mean(self):
        sub = SubordinatorParams(1.0, 0.5)
        assert sub.increment_mean(0.1) == pytest.approx(0.1 / 0.5)
        n = 200_000
        x = sample_gamma_increments(sub, 0.1, n, RngStream(12))
        assert within(x.mean(), 0.2, math.sqrt(0.4 / n), 4)

    def test_small_shape_ks(self):
        sub = SubordinatorParams(1.0, 1.0)
        n = 10 ** 5
        x = np.sort(sample_gamma_increments(sub, 0.01, n, RngStream(13)))
        assert np.all(x > 0)
        cdf = special.gammainc(0.01, x)
        i = np.arange(1, n + 1)
        d = max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n))
        assert d < 1.628 / math.sqrt(n)  # 1% Kolmogorov critical value

    def test_large_shape(self):
        gen = RngStream(5).generator()
        x = standard_gamma_mt(7.5, 200_000, gen)
        assert within(x.mean(), 7.5, math.sqrt(7.5 / x.size), 4)

    def test_tiny_shape_stays_positive(self):
        x = standard_gamma_mt(1e-4, 10_000, RngStream(3).generator())
        assert np.all(x > 0) and np.all(np.isfinite(x))

    def test_validation(self):
        with pytest.raises(ConfigError):
            sample_gamma_increments(SubordinatorParams(), 0.0, 10, RngStream(1))
        with pytest.raises(ConfigError):
            sample_gamma_increments(SubordinatorParams(), 0.1, 0, RngStream(1))
        with pytest.raises(ConfigError):
            RngStream(-1)


class TestSubordinatedIncrements:
    def test_unit_clock(self):
        n = 10 ** 6
        x = sample_subordinated_increments(np.ones(n), RngStream(21))
        var = x.var(axis=0, ddof=1)
        assert np.all(np.abs(var - 1.0) <= 4 * math.sqrt(2.0 / n))
        c = np.corrcoef(x.T)[np.triu_indices(4, 1)]
        assert np.all(np.abs(c) <= 4 / math.sqrt(n))

    def test_scaling(self):
        x = sample_subordinated_increments(np.full(200_000, 0.25), RngStream(22))
        np.testing.assert_allclose(x.std(axis=0), 0.5, rtol=0.01)

    def test_correlated_pipeline(self):
        _, corr = fx_case_study()
        n = 10 ** 6
        z = sample_subordinated_increments(np.ones(n), RngStream(23), corr.cholesky)
        w = z @ corr.cholesky.T
        r = np.corrcoef(w[:, 0], w[:, 1])[0, 1]
        assert abs(r - (-0.1)) <= 4 * (1 - 0.01) / math.sqrt(n)

    def test_vg_marginal(self):
        sub = SubordinatorParams(1.0, 1.0)
        dt = 0.5
        n = 10 ** 6
        dg = sample_gamma_increments(sub, dt, n, RngStream(24))
        x = sample_subordinated_increments(dg, RngStream(25))[:, 0]
        # Var(x^2) = 3 E[g^2] - E[g]^2 = 2.25 - 0.25 for shape 0.5, rate 1
        assert within(x.var(), sub.increment_mean(dt), math.sqrt(2.0 / n), 6)
        excess = np.mean(x ** 4) / np.mean(x ** 2) ** 2 - 3
        # excess kurtosis 3/(alpha dt) = 6; the estimator is noisy, 6 sigma ~ 0.6 here
        assert abs(excess - 3 / (sub.alpha * dt)) < 0.6

    def test_bad_h_shape(self):
        with pytest.raises(ConfigError):
            sample_subordinated_increments(np.ones(3), RngStream(1), np.eye(3))


class TestStreams:
    def test_reproducible(self):
        sub = SubordinatorParams()
        a = draw_block(sub, 0.1, 50, RngStream(9, 4))
        b = draw_block(sub, 0.1, 50, RngStream(9, 4))
        assert np.array_equal(a.dgamma, b.dgamma) and np.array_equal(a.dgauss, b.dgauss)
        assert np.all(a.dgamma > 0) and a.dgauss.shape == (50, 4)

    def test_partition_independent(self):
        sub = SubordinatorParams()
        g_all, z_all = draw_blocks(sub, 0.1, 20, 77, range(10))
        g_part, z_part = draw_blocks(sub, 0.1, 20, 77, [6, 7, 8, 9])
        assert np.array_equal(g_all[6:], g_part) and np.array_equal(z_all[6:], z_part)

    def test_distinct_streams_uncorrelated(self):
        a = RngStream(1, 0).generator().standard_normal(100_000)
        b = RngStream(1, 1).generator().standard_normal(100_000)
        c = RngStream(2, 0).generator().standard_normal(100_000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(a.size)
        assert abs(np.corrcoef(a, c)[0, 1]) < 4 / math.sqrt(a.size)
