import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from vgfx.engine import NEVER, SimConfig, TimeGrid, convergence_study, run_kernel, simulate, step
from vgfx.engine import backend
from vgfx.engine.convergence import aggregate, fit_slope
from vgfx.errors import ConfigError
from vgfx.model import (CorrelationStructure, LocalizationConfig, ModelParams,
                        SubordinatorParams, drift)


def prm_dict(p):
    return {k: getattr(p, k) for k in ("kappa_v", "kappa_d", "kappa_f", "a_v", "a_d", "a_f",
                                       "sigma_v", "sigma_d", "sigma_f", "theta_s", "theta_v",
                                       "theta_d", "theta_f")}


def advance_one(x, dg, z, dt, p, corr, calendar=False, absorb=False, advance=None):
    advance = advance or backend.advance_paths
    m = x.shape[0]
    states = np.empty((m, 2, 4))
    states[:, 0] = x
    ex = np.full(m, NEVER, dtype=np.int64)
    advance(states, np.ascontiguousarray(dg[:, None]), np.ascontiguousarray(z[:, None, :]),
            np.ascontiguousarray(corr.cholesky), p.as_array(), dt, corr.rho_sf,
            calendar, absorb, 0.0, False, ex)
    return states[:, 1]


class TestTimeGrid:
    def test_basics(self):
        g = TimeGrid(0.0, 5.0, 50)
        assert g.dt == 0.1 and g.times[-1] == pytest.approx(5.0) and g.times.size == 51

    @pytest.mark.parametrize("args", [(-1.0, 1.0, 5), (1.0, 1.0, 5), (0.0, 1.0, 0)])
    def test_invalid(self, args):
        with pytest.raises(ConfigError):
            TimeGrid(*args)


class TestStep:
    def test_zero_noise_mean_reversion(self, case_study):
        p0, corr = case_study
        p = ModelParams(**{**prm_dict(p0), "sigma_v": 0.0, "sigma_d": 0.0, "sigma_f": 0.0})
        cfg = SimConfig(n_paths=1)
        # S carries sqrt(V) noise even with every sigma at 0, so start from V = 0
        x = (100.0, 0.0, 0.03, 0.03)
        out = step(x, 0.1, [1.3, -0.2, 0.4, 2.0], 0.1, p, corr.cholesky, cfg)
        assert out.s == 100.0
        assert abs(out.v - p.a_v) < abs(x[1] - p.a_v)
        assert abs(out.rd - p.a_d) < abs(x[2] - p.a_d)
        assert abs(out.rf - p.a_f) < abs(x[3] - p.a_f)

    def test_pure_drift_calendar(self, case_study):
        p, corr = case_study
        cfg = SimConfig(n_paths=1, drift_clock="calendar")
        x = np.array([100.0, 0.03, 0.05, 0.02])
        out = step(x, 1e-300, np.zeros(4), 0.01, p, corr.cholesky, cfg)
        np.testing.assert_allclose(out, x + drift(x, p, corr.rho_sf) * 0.01, rtol=1e-15)

    @pytest.mark.parametrize("clock", ["subordinated", "calendar"])
    def test_matches_oracle(self, case_study, clock):
        p0, corr = case_study
        p = ModelParams(**{**prm_dict(p0), "theta_s": 0.01, "theta_v": 0.002,
                           "theta_d": 0.001, "theta_f": 0.003})
        rng = np.random.default_rng(3)
        H = corr.cholesky.tolist()
        cfg = SimConfig(n_paths=1, drift_clock=clock)
        for _ in range(500):
            x = tuple(rng.uniform([50, -0.02, -0.01, -0.01], [150, 0.1, 0.1, 0.1]))
            dg = rng.gamma(0.1, 2.0)
            z = tuple(rng.standard_normal(4))
            want = oracles.em_step(x, dg, z, H, prm_dict(p),
                                   0.1 if clock == "calendar" else None)
            assert tuple(step(x, dg, z, 0.1, p, corr.cholesky, cfg)) == want

    def test_step_matches_kernels(self, case_study):
        p, corr = case_study
        rng = np.random.default_rng(4)
        m = 2000
        x = rng.uniform([50, -0.02, -0.01, -0.01], [150, 0.1, 0.1, 0.1], size=(m, 4))
        dg = rng.gamma(0.1, 2.0, m)
        z = rng.standard_normal((m, 4))
        cfg = SimConfig(n_paths=1)
        ref = np.array([step(x[i], dg[i], z[i], 0.1, p, corr.cholesky, cfg) for i in range(m)])
        assert np.array_equal(advance_one(x, dg, z, 0.1, p, corr,
                                          advance=backend.fallback_advance), ref)
        if backend.compiled_advance is not None:
            assert np.array_equal(advance_one(x, dg, z, 0.1, p, corr,
                                              advance=backend.compiled_advance), ref)

    def test_absorb_clamps(self, case_study):
        p, corr = case_study
        cfg = SimConfig(n_paths=1, truncation="absorb")
        out = step((100.0, 0.001, 0.001, 0.001), 0.5, [0.0, -5.0, -5.0, -5.0], 0.1, p,
                   corr.cholesky, cfg)
        assert min(out) >= 0.0


@pytest.mark.skipif(backend.compiled_advance is None, reason="compiled kernel not built")
class TestBackends:
    @pytest.mark.parametrize("loc", [None, LocalizationConfig(120), LocalizationConfig(120, apply=False)])
    @pytest.mark.parametrize("trunc", ["full", "absorb"])
    def test_bit_identical(self, case_study, loc, trunc):
        p, corr = case_study
        sub = SubordinatorParams()
        grid = TimeGrid(0.0, 1.0, 40)
        cfg = SimConfig(n_paths=700, seed=5, truncation=trunc, localization=loc, chunk_size=256)
        a = simulate(p, corr, sub, grid, cfg, advance=backend.fallback_advance)
        b = simulate(p, corr, sub, grid, cfg, advance=backend.compiled_advance)
        assert np.array_equal(a.states, b.states, equal_nan=True)
        assert np.array_equal(a.exit_step, b.exit_step)


class TestSimulate:
    def test_initial_state_and_shape(self, case_study):
        p, corr = case_study
        ps = simulate(p, corr, SubordinatorParams(), TimeGrid(0, 5, 50), SimConfig(n_paths=10, seed=1))
        assert ps.states.shape == (10, 51, 4)
        assert np.all(ps.states[:, 0] == np.array(p.initial_state))
        assert ps.provenance["seed"] == 1

    def test_figure_fan(self, case_study):
        p, corr = case_study
        ps = simulate(p, corr, SubordinatorParams(), TimeGrid(0, 5, 50),
                      SimConfig(n_paths=400, seed=2))
        spread = ps.S.std(axis=0)
        assert spread[50] > spread[10] > spread[1] > 0
        assert np.all(np.isfinite(ps.S))

    def test_zero_noise_paths_identical(self, case_study):
        p, corr = case_study
        ps = simulate(p, corr, SubordinatorParams(), TimeGrid(0, 1, 20),
                      SimConfig(n_paths=25, seed=3, clock="deterministic", gaussian_noise=False))
        assert np.all(ps.states == ps.states[0])

    @pytest.mark.parametrize("workers,chunk", [(4, 100), (8, 37), (1, 1000)])
    def test_worker_independent(self, case_study, workers, chunk):
        p, corr = case_study
        sub, grid = SubordinatorParams(), TimeGrid(0, 1, 30)
        ref = simulate(p, corr, sub, grid, SimConfig(n_paths=1000, seed=8))
        other = simulate(p, corr, sub, grid,
                         SimConfig(n_paths=1000, seed=8, workers=workers, chunk_size=chunk))
        assert ref.states.tobytes() == other.states.tobytes()

    def test_localization_plateau_identity(self, case_study):
        p, corr = case_study
        sub, grid = SubordinatorParams(), TimeGrid(0, 1, 50)
        raw = simulate(p, corr, sub, grid, SimConfig(n_paths=2000, seed=4))
        loc = simulate(p, corr, sub, grid,
                       SimConfig(n_paths=2000, seed=4, localization=LocalizationConfig(150)))
        inside = loc.exit_step == NEVER
        assert inside.sum() > 100 and (~inside).sum() > 0
        assert np.array_equal(raw.states[inside], loc.states[inside])

    def test_exit_step_is_first(self, case_study):
        p, corr = case_study
        n = 150
        ps = simulate(p, corr, SubordinatorParams(), TimeGrid(0, 1, 50),
                      SimConfig(n_paths=1000, seed=6, localization=LocalizationConfig(n, apply=False)))
        out = np.any((ps.states < 1.0 / n) | (ps.states > n), axis=2)
        first = np.where(out.any(axis=1), out.argmax(axis=1), NEVER)
        assert np.array_equal(first, ps.exit_step)

    def test_localization_rejects_bad_level(self, case_study):
        p, corr = case_study
        with pytest.raises(ConfigError):
            simulate(p, corr, SubordinatorParams(), TimeGrid(0, 1, 5),
                     SimConfig(n_paths=2, localization=LocalizationConfig(10)))

    @settings(max_examples=25, deadline=None)
    @given(kv=st.floats(0.1, 5), kd=st.floats(0.05, 2), kf=st.floats(0.05, 2),
           av=st.floats(0.005, 0.2), ad=st.floats(0.001, 0.1), af=st.floats(0.001, 0.1),
           sv=st.floats(0.0, 0.8), sd=st.floats(0.0, 0.2), sf=st.floats(0.0, 0.2),
           beta=st.floats(0.5, 4.0), rho=st.floats(-0.6, 0.6), seed=st.integers(0, 2 ** 32))
    def test_full_truncation_never_nan(self, kv, kd, kf, av, ad, af, sv, sd, sf, beta, rho, seed):
        p = ModelParams(kappa_v=kv, kappa_d=kd, kappa_f=kf, a_v=av, a_d=ad, a_f=af,
                        sigma_v=sv, sigma_d=sd, sigma_f=sf, v0=av, rd0=ad, rf0=af)
        corr = CorrelationStructure(rho_sv=rho, rho_sf=rho / 2)
        ps = simulate(p, corr, SubordinatorParams(1.0, beta), TimeGrid(0, 1, 25),
                      SimConfig(n_paths=50, seed=seed))
        assert not np.isnan(ps.states).any()

    def test_absorb_non_negative(self, case_study):
        p, corr = case_study
        ps = simulate(p, corr, SubordinatorParams(), TimeGrid(0, 2, 50),
                      SimConfig(n_paths=500, seed=9, truncation="absorb"))
        assert ps.states.min() >= 0.0

    def test_full_truncation_keeps_signed_state(self, case_study):
        p, corr = case_study
        ps = simulate(p, corr, SubordinatorParams(), TimeGrid(0, 2, 50),
                      SimConfig(n_paths=500, seed=9))
        assert ps.V.min() < 0.0

    def test_deterministic_clock_consumes_same_streams(self, case_study):
        p, corr = case_study
        sub, grid = SubordinatorParams(), TimeGrid(0, 1, 10)
        a = simulate(p, corr, sub, grid, SimConfig(n_paths=3, seed=1, clock="deterministic"))
        b = simulate(p, corr, sub, grid, SimConfig(n_paths=3, seed=1, clock="deterministic",
                                                   chunk_size=1))
        assert np.array_equal(a.states, b.states)


class TestConvergence:
    def test_aggregate_sums(self):
        rng = np.random.default_rng(0)
        dg = rng.gamma(0.1, 1.0, (3, 8))
        z = rng.standard_normal((3, 8, 4))
        dg2, z2 = aggregate(dg, z, 4)
        assert np.array_equal(dg2, dg.reshape(3, 2, 4).sum(2))
        gauss = np.sqrt(dg)[:, :, None] * z
        np.testing.assert_allclose(np.sqrt(dg2)[:, :, None] * z2,
                                   gauss.reshape(3, 2, 4, 4).sum(2), rtol=1e-14)

    def test_zero_noise_first_order(self, case_study):
        p, corr = case_study
        cfg = SimConfig(n_paths=4, seed=1, clock="deterministic", gaussian_noise=False)
        res = convergence_study(p, corr, SubordinatorParams(), 1.0, cfg, [2, 4, 8, 16, 64])
        assert res.errors[-1] == 0.0
        assert res.slope == pytest.approx(-2.0, abs=0.15)

    def test_rows_and_censoring(self, case_study):
        p, corr = case_study
        res = convergence_study(p, corr, SubordinatorParams(), 1.0,
                                SimConfig(n_paths=200, seed=2), [2, 4, 8])
        rows = list(res.rows())
        assert [r["m"] for r in rows] == [2, 4, 8] and [r["n_steps"] for r in rows] == [4, 16, 64]
        assert res.n_kept + res.n_censored == 200
        assert res.censor_level == 1000

    def test_monotone_error(self, case_study):
        p, corr = case_study
        inversions = 0
        for seed in range(10):
            res = convergence_study(p, corr, SubordinatorParams(), 1.0,
                                    SimConfig(n_paths=150, seed=seed), [2, 4, 8, 16])
            inversions += int(np.any(np.diff(res.errors) > 0))
        assert inversions <= 1

    @pytest.mark.parametrize("m", [[4, 2], [3]])
    def test_bad_levels(self, case_study, m):
        p, corr = case_study
        with pytest.raises(ConfigError):
            convergence_study(p, corr, SubordinatorParams(), 1.0, SimConfig(n_paths=2), m)

    def test_non_nesting_levels(self, case_study):
        p, corr = case_study
        with pytest.raises(ConfigError):
            convergence_study(p, corr, SubordinatorParams(), 1.0, SimConfig(n_paths=2), [2, 3])

    def test_fit_slope(self):
        m = np.array([2, 4, 8])
        assert fit_slope(m, 3.0 * m ** -0.5) == pytest.approx(-0.5)
        assert np.isnan(fit_slope([2, 4], [1.0, 0.0]))
