"""Plane-stress damage reconstruction at test scale (9 x 41 grid)."""

import numpy as np
import pytest

from infomech.damage2d import (
    Damage2DConfig,
    PlaneStressModel,
    clamp_damage,
    fd_jacobian,
    forward_observations,
    info_operator,
    load_field_csv,
    mode_report,
    observe,
    save_field_csv,
    solve_plane_stress,
    subspace_map,
    synthesize_observations,
    true_damage_field,
)
from infomech.errors import FdStepWarning
from infomech.opcore import assemble_info, numerical_rank
from infomech.spectral import randomized_eig, sym_eig


@pytest.fixture(scope="module")
def config():
    return Damage2DConfig.test_scale()


@pytest.fixture(scope="module")
def model(config):
    return PlaneStressModel(config)


@pytest.fixture(scope="module")
def nominal_block(config, model):
    return fd_jacobian(config, np.zeros(config.n_nodes), model=model)


class TestSolver:
    def test_undamaged_midspan_deflection_near_beam_theory(self):
        # midspan load on a slender variant (shear deflection scales with
        # 3.1 (H/L)^2, so aspect 10 keeps it a few percent): Euler-Bernoulli
        # predicts P L^3 / (48 EI)
        cfg = Damage2DConfig.test_scale(length=10.0, n_load_cases=7)
        model = PlaneStressModel(cfg)
        u = model.solve_cases(np.zeros(cfg.n_nodes))
        mid_case = int(np.argmin(np.abs(cfg.load_centers() - 0.5 * cfg.length)))
        assert cfg.load_centers()[mid_case] == pytest.approx(0.5 * cfg.length)
        jx = round(0.5 * cfg.length / cfg.dx)
        uy_mid = u[2 * cfg.node_id(0, jx) + 1, mid_case]
        inertia = cfg.thickness * cfg.height**3 / 12.0
        w_beam = cfg.load_magnitude * cfg.length**3 / (48.0 * cfg.e0 * inertia)
        assert -uy_mid == pytest.approx(w_beam, rel=0.10)

    def test_uniform_damage_scales_deflection(self, config, model):
        cfg = config
        u0 = model.solve_cases(np.zeros(cfg.n_nodes))
        d = 0.5
        ud = model.solve_cases(np.full(cfg.n_nodes, d))
        factor = 1.0 / (cfg.kappa + (1 - cfg.kappa) * (1 - d))
        np.testing.assert_allclose(ud, factor * u0, rtol=1e-9, atol=1e-16)

    def test_linearity_in_load(self, config):
        cfg = Damage2DConfig.test_scale(load_magnitude=2.0 * config.load_magnitude)
        u1 = PlaneStressModel(config).solve_cases(np.zeros(config.n_nodes))
        u2 = PlaneStressModel(cfg).solve_cases(np.zeros(cfg.n_nodes))
        np.testing.assert_allclose(u2, 2.0 * u1, rtol=1e-12)

    def test_solve_single_case_wrapper(self, config, model):
        u = solve_plane_stress(config, np.zeros(config.n_nodes), 0, model)
        assert u.shape == (config.n_dofs,)


class TestObserve:
    def test_observation_count(self, config, model):
        y = forward_observations(config, np.zeros(config.n_nodes), model)
        assert y.shape == (config.n_observations,)
        assert config.n_observations == config.n_load_cases * (14 + 3 + 3)

    def test_paper_scale_count_is_160(self):
        cfg = Damage2DConfig()
        assert cfg.n_observations == 160

    def test_zero_load_zero_observations(self, config, model):
        u = np.zeros((config.n_dofs, 1))
        np.testing.assert_array_equal(observe(config, u, model), np.zeros(20))

    def test_strain_sign_flips_with_load_direction(self, config):
        # beam-theory sign oracle: sagging puts the lower band in tension,
        # an upward (hogging-type) load flips every bottom-band strain sign
        down = PlaneStressModel(config)
        up_cfg = Damage2DConfig.test_scale(load_magnitude=-config.load_magnitude)
        up = PlaneStressModel(up_cfg)
        y_down = forward_observations(config, np.zeros(config.n_nodes), down)
        y_up = forward_observations(up_cfg, np.zeros(config.n_nodes), up)
        strains_down = y_down[: config.n_strain]
        strains_up = y_up[: config.n_strain]
        assert np.all(strains_down > 0)
        assert np.all(strains_up < 0)

    def test_sagging_strain_positive_in_tension_band(self, config, model):
        y = forward_observations(config, np.zeros(config.n_nodes), model)
        for k in range(config.n_load_cases):
            strains = y[k * 20 : k * 20 + config.n_strain]
            assert np.all(strains > 0)


class TestFdJacobian:
    def test_shape_and_noise(self, config, nominal_block):
        assert nominal_block.jacobian.shape == (config.n_observations, config.n_nodes)
        assert nominal_block.noise_cov.shape == (config.n_observations,)

    def test_far_cell_nearly_insensitive(self, config, nominal_block):
        # top corner node far from sensors and load paths
        col = nominal_block.jacobian[:, config.node_id(config.ny_nodes - 1, 0)]
        scale = np.abs(nominal_block.jacobian).max()
        assert np.abs(col).max() <= 1e-3 * scale

    def test_richardson_step_halving(self, config, model):
        # truncation-dominated steps: halving shrinks the column change by
        # about four (second-order central differences)
        d0 = np.zeros(config.n_nodes)
        j1 = fd_jacobian(config, d0, step=2e-2, model=model).jacobian
        j2 = fd_jacobian(config, d0, step=1e-2, model=model).jacobian
        j3 = fd_jacobian(config, d0, step=5e-3, model=model).jacobian
        e1 = np.abs(j1 - j3).max()
        e2 = np.abs(j2 - j3).max()
        # j - j_half ~ (3/4) C h^2, so successive differences shrink ~4x
        d12 = np.abs(j1 - j2).max()
        d23 = np.abs(j2 - j3).max()
        assert 2.5 <= d12 / d23 <= 5.5

    def test_linear_scaling_with_reference_modulus(self, config):
        cfg2 = Damage2DConfig.test_scale(e0=2.0 * config.e0)
        j1 = fd_jacobian(config, np.zeros(config.n_nodes)).jacobian
        j2 = fd_jacobian(cfg2, np.zeros(cfg2.n_nodes)).jacobian
        # displacements and their damage sensitivities scale as 1/E0
        np.testing.assert_allclose(j2, 0.5 * j1, rtol=1e-9, atol=1e-18)

    def test_tiny_step_warns(self, config, model):
        with pytest.warns(FdStepWarning):
            fd_jacobian(config, np.zeros(config.n_nodes), step=1e-15, model=model)


class TestInformationOperator:
    def test_rank_bounded_by_observations(self, config, nominal_block):
        op = assemble_info(nominal_block)
        assert numerical_rank(op) <= config.n_observations

    def test_spectrum_descending_nonnegative(self, config, nominal_block):
        ms = sym_eig(assemble_info(nominal_block), config.k_modes)
        assert np.all(np.diff(ms.eigenvalues) <= 0)
        assert np.all(ms.eigenvalues >= 0)

    def test_randomized_matches_dense(self, config, nominal_block):
        op = assemble_info(nominal_block)
        dense = sym_eig(op, 6)
        rand = randomized_eig(op, 6, seed=11)
        np.testing.assert_allclose(rand.eigenvalues, dense.eigenvalues, rtol=1e-6)


class TestSubspaceMap:
    def test_nominal_data_zero_update(self, config, model, nominal_block):
        report = mode_report(config, block=nominal_block)
        y0 = forward_observations(config, np.zeros(config.n_nodes), model)
        d = subspace_map(config, y0, report.modes, model=model, block=nominal_block)
        assert np.abs(d).max() <= 1e-10

    def test_unrestricted_limit_recovers_linearized_update(self, config, model):
        # k = n, zero noise, tiny penalty, data generated by the linearized
        # model itself: the update is the plain least-squares solution
        rng = np.random.default_rng(0)
        block = fd_jacobian(config, np.zeros(config.n_nodes), model=model)
        op = assemble_info(block)
        k = config.n_observations  # full informed subspace
        modes = sym_eig(op, k)
        delta = 1e-4 * rng.standard_normal(config.n_nodes)
        # keep the perturbation inside the informed subspace
        delta = modes.modes @ (modes.modes.T @ delta)
        y = forward_observations(config, np.zeros(config.n_nodes), model) + block.jacobian @ delta
        d = subspace_map(config, y, modes, k=k, penalty=1e-14, model=model,
                         block=block, clip=False)
        assert np.abs(d - delta).max() <= 1e-6 * np.abs(delta).max() + 1e-12

    def test_benchmark_error_reduction_and_untouched_complement(self, config, model, nominal_block):
        report = mode_report(config, block=nominal_block)
        data = synthesize_observations(config, seed=1)
        d_lin = subspace_map(config, data, report.modes, model=model,
                             block=nominal_block, clip=False)
        d_true = true_damage_field(config).ravel()
        basis = report.modes.modes
        proj = basis @ basis.T
        err_map = np.linalg.norm(proj @ (d_lin - d_true))
        err_prior = np.linalg.norm(proj @ d_true)
        assert err_map <= 0.5 * err_prior
        # out-of-subspace component untouched: the raw update lies in the
        # span, and clamping only moves entries toward the bounds
        out_of_span = (np.eye(config.n_nodes) - proj) @ d_lin
        assert np.abs(out_of_span).max() <= 1e-10
        d_clamped = subspace_map(config, data, report.modes, model=model,
                                 block=nominal_block)
        assert d_clamped.min() >= config.clamp_lo and d_clamped.max() <= config.clamp_hi

    def test_stationarity_of_modal_coefficients(self, config, model, nominal_block):
        report = mode_report(config, block=nominal_block)
        data = synthesize_observations(config, seed=2)
        block = nominal_block
        jw = block.whitened_jacobian()
        sigma = np.sqrt(block.noise_cov)
        d_map = subspace_map(config, data, report.modes, model=model,
                             block=nominal_block, clip=False)
        basis = report.modes.modes[:, : config.k_modes]
        coeffs = basis.T @ d_map
        resid = (data - forward_observations(config, np.zeros(config.n_nodes), model)) / sigma
        resid = resid - jw @ d_map
        design = jw @ basis
        penalty = config.penalty_factor * report.modes.eigenvalues[0]
        kkt = design.T @ resid - penalty * coeffs
        assert np.linalg.norm(kkt) <= 1e-8 * np.linalg.norm(design.T @ resid + penalty * coeffs + 1e-300)

    def test_unpenalized_residual_orthogonal_to_range(self, config, model, nominal_block):
        report = mode_report(config, block=nominal_block)
        data = synthesize_observations(config, seed=3)
        block = nominal_block
        jw = block.whitened_jacobian()
        sigma = np.sqrt(block.noise_cov)
        d_map = subspace_map(config, data, report.modes, penalty=0.0, model=model,
                             block=nominal_block, clip=False)
        basis = report.modes.modes[:, : config.k_modes]
        resid = (data - forward_observations(config, np.zeros(config.n_nodes), model)) / sigma
        resid = resid - jw @ d_map
        design = jw @ basis
        rel = np.linalg.norm(design.T @ resid) / (
            np.linalg.norm(design, ord=2) * np.linalg.norm(resid)
        )
        assert rel <= 1e-8


class TestClampAndFields:
    def test_clamp_idempotent(self):
        rng = np.random.default_rng(4)
        d = rng.uniform(-0.5, 1.5, 50)
        once = clamp_damage(d)
        np.testing.assert_array_equal(clamp_damage(once), once)

    def test_clamp_moves_toward_interval(self):
        d = np.array([-0.2, 0.3, 1.2])
        np.testing.assert_array_equal(clamp_damage(d), [0.0, 0.3, 0.9])

    def test_true_field_within_bounds(self, config):
        d = true_damage_field(config)
        assert d.shape == (config.ny_nodes, config.nx_nodes)
        assert d.min() >= 0 and d.max() <= 0.9
        assert d.max() == pytest.approx(config.true_peak, rel=0.05)

    def test_field_csv_roundtrip(self, config, tmp_path):
        d = true_damage_field(config)
        path = tmp_path / "field.csv"
        save_field_csv(d, path)
        header = path.read_text().splitlines()[0]
        assert header == f"# field ny={config.ny_nodes} nx={config.nx_nodes}"
        np.testing.assert_allclose(load_field_csv(path), d)

    def test_mode_report_maps_shape(self, config, nominal_block):
        report = mode_report(config, k=4, block=nominal_block)
        assert report.maps.shape == (4, config.ny_nodes, config.nx_nodes)
        assert report.spectrum_ratio >= 1.0
