"""Static/dynamic/hybrid identification benchmark."""

import numpy as np
import pytest

from infomech.fusion import (
    FusionBenchmark,
    MapResult,
    SyntheticData,
    density_report,
    forward,
    gauss_newton_map,
    observation_block,
    posterior_band,
    synthesize_data,
)
from infomech.opcore import assemble_info


def small_bench(**kw):
    defaults = dict(n_elements=16, n_load_positions=9, n_frequencies=4, n_modes=24)
    defaults.update(kw)
    return FusionBenchmark(**defaults)


class TestSynthesizeData:
    def test_zero_noise_residual_vanishes_at_truth(self):
        bench = small_bench()
        data = synthesize_data(bench, seed=3, noise_scale=0.0)
        p_true = bench.true_log_stiffness()
        np.testing.assert_allclose(data.static, forward(bench, p_true, "static"), rtol=1e-13)
        np.testing.assert_allclose(data.dynamic, forward(bench, p_true, "dynamic"), rtol=1e-13)

    def test_static_vector_length(self):
        bench = small_bench()
        data = synthesize_data(bench, seed=0)
        assert data.static.shape == (len(bench.static_sensors) * bench.n_load_positions,)

    def test_deterministic_per_seed(self):
        bench = small_bench()
        a = synthesize_data(bench, seed=5)
        b = synthesize_data(bench, seed=5)
        assert np.array_equal(a.static, b.static) and np.array_equal(a.dynamic, b.dynamic)

    def test_noise_std_doubling(self):
        bench1 = small_bench(n_elements=8, n_load_positions=5, n_frequencies=2, n_modes=16)
        bench2 = small_bench(
            n_elements=8, n_load_positions=5, n_frequencies=2, n_modes=16,
            sigma_tilt=2 * bench1.sigma_tilt, sigma_log=2 * bench1.sigma_log,
        )
        truth1 = forward(bench1, bench1.true_log_stiffness(), "static")
        res1, res2 = [], []
        for seed in range(100):
            res1.append(synthesize_data(bench1, seed).static - truth1)
            res2.append(synthesize_data(bench2, seed).static - truth1)
        ratio = np.std(np.concatenate(res2)) / np.std(np.concatenate(res1))
        assert 1.8 <= ratio <= 2.2


class TestGaussNewton:
    def test_zero_noise_hybrid_recovers_truth(self):
        bench = small_bench()
        data = synthesize_data(bench, seed=0, noise_scale=0.0)
        result = gauss_newton_map(bench, data, "hybrid")
        assert result.converged
        assert np.abs(result.p_map - bench.true_log_stiffness()).max() <= 1e-3

    def test_misfit_monotone(self):
        bench = small_bench()
        data = synthesize_data(bench, seed=1)
        result = gauss_newton_map(bench, data, "hybrid")
        assert np.all(np.diff(result.misfit_history) <= 0)
        assert result.misfit_history[-1] <= result.misfit_history[0]

    def test_prior_domination_limit(self):
        bench = small_bench(gamma_pr=1e12, eps_pr=1e12)
        data = synthesize_data(bench, seed=2)
        result = gauss_newton_map(bench, data, "static")
        assert np.abs(result.p_map).max() <= 1e-6

    def test_first_step_is_ridge_solution(self):
        # near-linear data: one Gauss-Newton step from the prior mean equals
        # the closed-form regularized least-squares update
        bench = small_bench()
        p0 = np.zeros(bench.n_elements)
        delta = 1e-6 * np.sin(np.linspace(0, np.pi, bench.n_elements))
        block = observation_block(bench, p0, "static")
        jw = block.whitened_jacobian()
        y = forward(bench, p0, "static") + block.jacobian @ delta
        data = SyntheticData(static=y, dynamic=np.zeros(0))
        result = gauss_newton_map(bench, data, "static")
        q = bench.prior().precision
        rhs = jw.T @ ((y - forward(bench, p0, "static")) / np.sqrt(block.noise_cov))
        ridge = np.linalg.solve(jw.T @ jw + q, rhs)
        np.testing.assert_allclose(result.p_map, ridge, rtol=1e-4, atol=1e-13)


class TestPosteriorBand:
    def test_vanishing_information_gives_prior_band(self):
        bench = small_bench(sigma_tilt=1e9)
        band = posterior_band(bench, np.zeros(bench.n_elements), "static")
        np.testing.assert_allclose(band, bench.prior().marginal_std(), rtol=1e-8)

    def test_matches_direct_inverse(self):
        bench = small_bench()
        p = np.zeros(bench.n_elements)
        band = posterior_band(bench, p, "hybrid")
        jw = observation_block(bench, p, "hybrid").whitened_jacobian()
        cov = np.linalg.inv(jw.T @ jw + bench.prior().precision)
        np.testing.assert_allclose(band, np.sqrt(np.diag(cov)), rtol=1e-10)

    def test_hybrid_band_below_single_source(self):
        bench = small_bench()
        p = np.zeros(bench.n_elements)
        hybrid = posterior_band(bench, p, "hybrid")
        static = posterior_band(bench, p, "static")
        dynamic = posterior_band(bench, p, "dynamic")
        assert np.all(hybrid <= static * (1 + 1e-12))
        assert np.all(hybrid <= dynamic * (1 + 1e-12))


class TestDensityReport:
    def test_additivity_exact(self):
        bench = small_bench()
        dens = density_report(bench)
        np.testing.assert_allclose(
            dens["hybrid"], dens["static"] + dens["dynamic"], rtol=1e-12
        )

    def test_matches_stacked_block_diagonal(self):
        bench = small_bench()
        dens = density_report(bench)
        p0 = np.zeros(bench.n_elements)
        stacked = assemble_info(observation_block(bench, p0, "hybrid")).matrix
        np.testing.assert_allclose(np.diag(stacked), dens["hybrid"], rtol=1e-12)

    def test_zero_dynamic_block(self):
        bench = small_bench(n_frequencies=0)
        dens = density_report(bench)
        np.testing.assert_array_equal(dens["dynamic"], np.zeros(bench.n_elements))
        np.testing.assert_allclose(dens["hybrid"], dens["static"], rtol=1e-15)

    def test_densities_nonnegative(self):
        dens = density_report(small_bench())
        for key in ("static", "dynamic", "hybrid"):
            assert np.all(dens[key] >= 0)


class TestInformationOrdering:
    def test_hybrid_dominates_each_block(self):
        bench = small_bench()
        p0 = np.zeros(bench.n_elements)
        hybrid = assemble_info(observation_block(bench, p0, "hybrid")).matrix
        lam_max = np.linalg.eigvalsh(hybrid)[-1]
        for blocks in ("static", "dynamic"):
            single = assemble_info(observation_block(bench, p0, blocks)).matrix
            lam = np.linalg.eigvalsh(hybrid - single)
            assert lam[0] >= -1e-10 * lam_max

    def test_hybrid_reconstruction_better_than_static(self):
        bench = small_bench()
        data = synthesize_data(bench, seed=0)
        p_true = bench.true_log_stiffness()
        ei_true = np.exp(p_true)
        err = {}
        import warnings as _w
        for blocks in ("static", "hybrid"):
            with _w.catch_warnings():
                _w.simplefilter("ignore")
                res = gauss_newton_map(bench, data, blocks)
            ei_map = np.exp(res.p_map)
            err[blocks] = np.linalg.norm(ei_map - ei_true) / np.linalg.norm(ei_true)
        assert err["hybrid"] <= err["static"]
