"""Eigenmode extraction and stochastic estimators."""

import numpy as np
import pytest

from infomech.opcore import InfoOperator, ObservationBlock, assemble_info, assemble_info_action
from infomech.spectral import (
    ModeSet,
    estimate_diag,
    load_modeset_csv,
    mass_weighted_eig,
    prior_preconditioned_eig,
    randomized_eig,
    save_modeset_csv,
    sym_eig,
)
from infomech.prior import PriorModel


def random_psd_operator(rng, n, rank=None):
    rank = rank or n
    a = rng.standard_normal((rank, n))
    return InfoOperator.from_dense(a.T @ a)


class TestSymEig:
    def test_diagonal(self):
        ms = sym_eig(InfoOperator.from_dense(np.diag([3.0, 2.0, 1.0])), 2)
        np.testing.assert_allclose(ms.eigenvalues, [3.0, 2.0])
        np.testing.assert_allclose(np.abs(ms.modes), np.eye(3)[:, :2], atol=1e-14)

    def test_rank_one(self):
        a = np.array([2.0, -1.0, 2.0])
        ms = sym_eig(InfoOperator.from_dense(np.outer(a, a)), 1)
        np.testing.assert_allclose(ms.eigenvalues[0], a @ a, rtol=1e-13)
        np.testing.assert_allclose(np.abs(ms.modes[:, 0]), np.abs(a) / np.linalg.norm(a), rtol=1e-12)

    def test_residuals_below_tolerance(self):
        rng = np.random.default_rng(0)
        op = random_psd_operator(rng, 12)
        ms = sym_eig(op, 6)
        assert np.all(ms.residual_norms <= 1e-8 * ms.eigenvalues[0])

    def test_sign_convention(self):
        rng = np.random.default_rng(1)
        op = random_psd_operator(rng, 8)
        ms = sym_eig(op, 8)
        for j in range(8):
            assert ms.modes[np.argmax(np.abs(ms.modes[:, j])), j] > 0

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            sym_eig(InfoOperator.from_dense(np.eye(3)), 4)


class TestMassWeighted:
    def test_identity_mass_equals_sym(self):
        rng = np.random.default_rng(2)
        op = random_psd_operator(rng, 6)
        a = sym_eig(op, 4)
        b = mass_weighted_eig(op, np.eye(6), 4)
        np.testing.assert_allclose(b.eigenvalues, a.eigenvalues, rtol=1e-12)

    def test_uniform_mass_scaling(self):
        rng = np.random.default_rng(3)
        op = random_psd_operator(rng, 6)
        base = sym_eig(op, 3)
        scaled = mass_weighted_eig(op, 4.0 * np.eye(6), 3)
        np.testing.assert_allclose(scaled.eigenvalues, base.eigenvalues / 4.0, rtol=1e-12)
        # same directions, different normalization
        for j in range(3):
            ratio = scaled.modes[:, j] / base.modes[:, j]
            np.testing.assert_allclose(ratio, ratio[0], rtol=1e-8)

    def test_matches_direct_generalized_solve(self):
        import scipy.linalg as sla

        rng = np.random.default_rng(4)
        n = 10
        op = random_psd_operator(rng, n)
        # tridiagonal lumped-mass style metric
        mass = np.diag(np.full(n, 2.0)) + np.diag(np.full(n - 1, 0.4), 1) + np.diag(np.full(n - 1, 0.4), -1)
        ms = mass_weighted_eig(op, mass, 5)
        direct = np.sort(sla.eigh(op.matrix, mass, eigvals_only=True))[::-1][:5]
        np.testing.assert_allclose(ms.eigenvalues, direct, rtol=1e-10)

    def test_metric_orthonormality(self):
        rng = np.random.default_rng(5)
        n = 8
        op = random_psd_operator(rng, n)
        mass = np.diag(rng.uniform(0.5, 2.0, n))
        ms = mass_weighted_eig(op, mass, n)
        gram = ms.modes.T @ mass @ ms.modes
        assert np.abs(gram - np.eye(n)).max() <= 1e-8

    def test_non_spd_mass_rejected(self):
        with pytest.raises(ValueError):
            mass_weighted_eig(InfoOperator.from_dense(np.eye(2)), -np.eye(2), 1)


class TestPriorPreconditioned:
    def test_identity_prior_equals_sym(self):
        rng = np.random.default_rng(6)
        op = random_psd_operator(rng, 6)
        prior = PriorModel.from_precision(np.eye(6))
        a = sym_eig(op, 4)
        b = prior_preconditioned_eig(op, prior, 4)
        np.testing.assert_allclose(b.eigenvalues, a.eigenvalues, rtol=1e-12)

    def test_scalar_rayleigh_quotient(self):
        op = InfoOperator.from_dense(np.array([[4.0]]))
        prior = PriorModel.from_precision(np.array([[2.0]]))
        ms = prior_preconditioned_eig(op, prior, 1)
        np.testing.assert_allclose(ms.eigenvalues[0], 2.0, rtol=1e-14)
        phi = ms.modes[:, 0]
        rayleigh = (phi @ op.matrix @ phi) / (phi @ prior.precision @ phi)
        np.testing.assert_allclose(rayleigh, 2.0, rtol=1e-13)

    def test_whitened_gramian_identity(self):
        # spectrum equals that of the whitened Gramian built directly from
        # the whitened Jacobian
        rng = np.random.default_rng(7)
        jac = rng.standard_normal((5, 6))
        block = ObservationBlock(jac, rng.uniform(0.5, 1.5, 5))
        op = assemble_info(block)
        q = np.diag(rng.uniform(0.5, 3.0, 6))
        prior = PriorModel.from_precision(q)
        ms = prior_preconditioned_eig(op, prior, 6)
        jw = block.whitened_jacobian() @ prior.cov_sqrt_matrix
        direct = np.sort(np.linalg.eigvalsh(jw.T @ jw))[::-1]
        np.testing.assert_allclose(ms.eigenvalues, direct, rtol=1e-10, atol=1e-12)

    def test_agrees_with_generalized_solve(self):
        import scipy.linalg as sla

        rng = np.random.default_rng(8)
        for _ in range(10):
            op = random_psd_operator(rng, 7)
            a = rng.standard_normal((7, 7))
            q = a @ a.T + 7 * np.eye(7)
            prior = PriorModel.from_precision(q)
            ms = prior_preconditioned_eig(op, prior, 4)
            direct = np.sort(sla.eigh(op.matrix, q, eigvals_only=True))[::-1][:4]
            np.testing.assert_allclose(ms.eigenvalues, direct, rtol=1e-8, atol=1e-12)

    def test_prior_orthonormal_modes(self):
        rng = np.random.default_rng(9)
        op = random_psd_operator(rng, 6)
        a = rng.standard_normal((6, 6))
        prior = PriorModel.from_precision(a @ a.T + 6 * np.eye(6))
        ms = prior_preconditioned_eig(op, prior, 6)
        gram = ms.modes.T @ prior.precision @ ms.modes
        assert np.abs(gram - np.eye(6)).max() <= 1e-8
        np.testing.assert_allclose(prior.cov_sqrt_matrix @ ms.whitened, ms.modes, atol=1e-12)


class TestInterlacing:
    def test_eigenvalues_grow_under_block_addition(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            a = random_psd_operator(rng, 8, rank=5).matrix
            b = random_psd_operator(rng, 8, rank=3).matrix
            la = np.linalg.eigvalsh(a)[::-1]
            lab = np.linalg.eigvalsh(a + b)[::-1]
            assert np.all(lab[:6] >= la[:6] - 1e-10 * max(lab[0], 1.0))


class TestRandomizedEig:
    def test_dominant_gap(self):
        diag = np.ones(40)
        diag[0] = 1e6
        op = InfoOperator.from_dense(np.diag(diag))
        ms = randomized_eig(op, 1, seed=42)
        np.testing.assert_allclose(ms.eigenvalues[0], 1e6, rtol=1e-6)

    def test_matches_dense_on_decaying_spectrum(self):
        rng = np.random.default_rng(11)
        n = 40
        u = np.linalg.qr(rng.standard_normal((n, n)))[0]
        lam = 10.0 ** -np.arange(n, dtype=float)
        op_dense = InfoOperator.from_dense((u * lam) @ u.T)
        op_action = InfoOperator.from_action(lambda v: op_dense.matrix @ v, dim=n)
        got = randomized_eig(op_action, 6, seed=7)
        want = sym_eig(op_dense, 6)
        np.testing.assert_allclose(got.eigenvalues, want.eigenvalues, rtol=1e-6)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(12)
        op = random_psd_operator(rng, 20)
        a = randomized_eig(op, 4, seed=3)
        b = randomized_eig(op, 4, seed=3)
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
        assert np.array_equal(a.modes, b.modes)

    def test_distinct_seeds_differ(self):
        rng = np.random.default_rng(13)
        op = random_psd_operator(rng, 30, rank=10)
        a = randomized_eig(op, 3, seed=1)
        b = randomized_eig(op, 3, seed=2)
        assert not np.array_equal(a.modes, b.modes)


class TestDiagEstimator:
    def test_exact_for_diagonal_operator(self):
        op = InfoOperator.from_dense(np.diag([3.0, 1.0, 0.5]))
        est, err = estimate_diag(op, n_probes=7, seed=0)
        np.testing.assert_allclose(est, [3.0, 1.0, 0.5], rtol=1e-14)
        np.testing.assert_allclose(err, 0.0, atol=1e-12)

    def test_zero_operator(self):
        op = InfoOperator.from_dense(np.zeros((4, 4)))
        est, err = estimate_diag(op, n_probes=5, seed=1)
        assert np.all(est == 0) and np.all(err == 0)

    def test_statistical_bound_dense_random(self):
        rng = np.random.default_rng(14)
        a = rng.standard_normal((10, 10))
        op = InfoOperator.from_dense(a @ a.T)
        truth = np.diag(op.matrix)
        hits = total = 0
        for seed in range(10):
            est, err = estimate_diag(op, n_probes=5000, seed=seed)
            hits += int(np.sum(np.abs(est - truth) <= 4.0 * err))
            total += 10
        assert hits / total >= 0.99


class TestModeSetSerialization:
    def test_csv_roundtrip(self, tmp_path):
        rng = np.random.default_rng(15)
        ms = sym_eig(random_psd_operator(rng, 6), 3)
        path = tmp_path / "modes.csv"
        save_modeset_csv(ms, path)
        back = load_modeset_csv(path)
        np.testing.assert_allclose(back.eigenvalues, ms.eigenvalues)
        np.testing.assert_allclose(back.modes, ms.modes)
