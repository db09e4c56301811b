import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qaffde.errors import InvalidArgumentError
from qaffde.kde_oracle import KdeModel, kde_batch
from qaffde.kernelspace import KernelSpec, embed, sample_rff
from qaffde.density_matrix import (
    DensityMatrixModel,
    born_density,
    estimate_rho,
    fit_density_matrix,
    normalizing_constant,
    predict_batch,
    predict_density,
    resolve_rank,
    spectral_truncate,
)


def _rho_loop(X, fmap):
    """Triple loop over points and feature pairs."""
    D = fmap.num_features
    rho = np.zeros((D, D))
    for x in X:
        phi = embed(fmap, x)
        for i in range(D):
            for j in range(D):
                rho[i, j] += phi[i] * phi[j]
    return rho / len(X)


def _random_rotation(D, seed):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(D, D)))
    return Q


class TestEstimateRho:
    def test_single_point_is_pure_state(self):
        fm = sample_rff(KernelSpec(0.5, 2), 16, seed=0)
        rho = estimate_rho(np.array([[0.4, -1.0]]), fm)
        evals = np.linalg.eigvalsh(rho)
        assert np.trace(rho) == pytest.approx(1.0, abs=1e-12)
        assert np.sum(evals > 1e-10) == 1

    def test_matches_loop(self, rng):
        fm = sample_rff(KernelSpec(0.5, 2), 6, seed=1)
        X = rng.normal(size=(50, 2))
        np.testing.assert_allclose(estimate_rho(X, fm), _rho_loop(X, fm), atol=1e-13)

    def test_symmetric_psd_trace_one(self, rng):
        fm = sample_rff(KernelSpec(1.0, 3), 40, seed=2)
        rho = estimate_rho(rng.normal(size=(300, 3)), fm)
        np.testing.assert_array_equal(rho, rho.T)
        assert np.trace(rho) == pytest.approx(1.0, abs=1e-12)
        assert np.min(np.linalg.eigvalsh(rho)) > -1e-12

    def test_chunking_does_not_matter(self, rng):
        fm = sample_rff(KernelSpec(1.0, 1), 8, seed=0)
        X = rng.normal(size=(9000, 1))
        np.testing.assert_allclose(estimate_rho(X, fm), _rho_loop(X, fm), atol=1e-12)


class TestSpectralTruncate:
    def test_maximally_mixed(self):
        D = 10
        fm = sample_rff(KernelSpec(1.0, 1), D, seed=0)
        model = spectral_truncate(np.eye(D) / D, 4, fm, 1.0)
        np.testing.assert_allclose(model.Lambda, 0.1, atol=1e-15)
        model.check_invariants(1e-12)

    def test_full_rank_reconstruction(self, rng):
        fm = sample_rff(KernelSpec(0.5, 2), 24, seed=3)
        rho = estimate_rho(rng.normal(size=(100, 2)), fm)
        m = spectral_truncate(rho, 24, fm, 1.0)
        np.testing.assert_allclose(m.V.T @ np.diag(m.Lambda) @ m.V, rho, atol=1e-12)

    def test_known_spectrum(self):
        D = 3
        fm = sample_rff(KernelSpec(1.0, 1), D, seed=0)
        Q = _random_rotation(D, 5)
        rho = Q @ np.diag([0.2, 0.5, 0.3]) @ Q.T
        m = spectral_truncate(rho, 2, fm, 1.0)
        np.testing.assert_allclose(m.Lambda, [0.5, 0.3], atol=1e-12)
        assert m.Lambda.sum() == pytest.approx(0.8, abs=1e-12)

    def test_rank_bounds(self):
        fm = sample_rff(KernelSpec(1.0, 1), 4, seed=0)
        for r in (0, 5, 1.5):
            with pytest.raises(InvalidArgumentError):
                spectral_truncate(np.eye(4) / 4, r, fm, 1.0)

    def test_rejects_asymmetric(self):
        fm = sample_rff(KernelSpec(1.0, 1), 3, seed=0)
        rho = np.eye(3) / 3
        rho[0, 1] = 0.1
        with pytest.raises(InvalidArgumentError):
            spectral_truncate(rho, 2, fm, 1.0)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 20))
    def test_invariants(self, seed, r):
        rng = np.random.default_rng(seed)
        fm = sample_rff(KernelSpec(rng.uniform(0.1, 3.0), 2), 20, seed=seed)
        rho = estimate_rho(rng.normal(size=(int(rng.integers(1, 60)), 2)), fm)
        m = spectral_truncate(rho, r, fm, 1.0)
        m.check_invariants(1e-10)
        assert np.all(m.Lambda >= 0)
        assert m.Lambda.sum() <= 1.0 + 1e-12
        if r > 1:
            smaller = spectral_truncate(rho, r - 1, fm, 1.0)
            assert smaller.Lambda.sum() <= m.Lambda.sum() + 1e-15


class TestPrediction:
    def test_full_rank_matches_born_rule(self, rng):
        spec = KernelSpec(1.0, 2)
        fm = sample_rff(KernelSpec(0.5, 2), 64, seed=0)
        X = rng.normal(size=(200, 2))
        rho = estimate_rho(X, fm)
        M = normalizing_constant(spec)
        model = spectral_truncate(rho, 64, fm, M)
        Q = rng.uniform(-3, 3, size=(100, 2))
        np.testing.assert_allclose(predict_batch(model, Q), born_density(rho, fm, M, Q), rtol=0, atol=1e-10)

    def test_few_samples_path_matches_eigendecomposition(self, rng):
        fm = sample_rff(KernelSpec(0.5, 2), 64, seed=4)
        X = rng.normal(size=(30, 2))
        Q = rng.normal(size=(50, 2))
        rho = estimate_rho(X, fm)
        for r in (5, 30, 64):
            fast = fit_density_matrix(X, fm, r, 1.0)
            slow = spectral_truncate(rho, r, fm, normalizing_constant(KernelSpec(1.0, 2)))
            assert fast.rank <= min(r, 30)
            fast.check_invariants(1e-12)
            assert slow.Lambda[fast.rank:].sum() < 1e-12
            np.testing.assert_allclose(fast.Lambda, slow.Lambda[: fast.rank], atol=1e-14)
            np.testing.assert_allclose(predict_batch(fast, Q), predict_batch(slow, Q), rtol=0, atol=1e-12)

    def test_zero_spectrum(self, rng):
        fm = sample_rff(KernelSpec(1.0, 1), 5, seed=0)
        model = DensityMatrixModel(np.eye(5)[:2], np.zeros(2), fm, 1.0)
        np.testing.assert_array_equal(predict_batch(model, rng.normal(size=(10, 1))), 0.0)

    def test_batch_matches_single(self, rng):
        fm = sample_rff(KernelSpec(0.5, 2), 32, seed=1)
        model = fit_density_matrix(rng.normal(size=(100, 2)), fm, 8, 1.0)
        Q = rng.normal(size=(20, 2))
        loop = [predict_density(model, q) for q in Q]
        np.testing.assert_allclose(predict_batch(model, Q), loop, rtol=0, atol=1e-12)

    def test_training_order_irrelevant(self, rng):
        fm = sample_rff(KernelSpec(0.5, 1), 32, seed=1)
        X = rng.normal(size=(500, 1))
        Q = np.linspace(-3, 3, 31)
        a = predict_batch(fit_density_matrix(X, fm, 32, 1.0), Q)
        b = predict_batch(fit_density_matrix(X[rng.permutation(500)], fm, 32, 1.0), Q)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-14)

    def test_dense_rff_approaches_kde(self):
        gamma = 4.0
        rng = np.random.default_rng(0)
        X = rng.normal(size=(2000, 1))
        Q = np.linspace(-2, 2, 50)
        kde = kde_batch(KdeModel(X, KernelSpec(gamma, 1)), Q)
        fm = sample_rff(KernelSpec(gamma / 2, 1), 2048, seed=0, normalize=False)
        est = predict_batch(fit_density_matrix(X, fm, 2048, gamma), Q)
        assert np.mean(np.abs(est - kde) / kde) < 0.1

    def test_normalized_model_integrates_to_one(self, rng):
        fm = sample_rff(KernelSpec(0.25, 1), 512, seed=0)
        model = fit_density_matrix(rng.normal(size=(2000, 1)), fm, 512, 0.5)
        g = np.linspace(-12, 12, 4001)
        assert np.trapezoid(predict_batch(model, g), g) == pytest.approx(1.0, abs=0.08)


class TestModel:
    def test_gamma_roundtrip(self):
        fm = sample_rff(KernelSpec(1.0, 3), 4, seed=0)
        m = DensityMatrixModel(np.eye(4)[:1], [1.0], fm, normalizing_constant(KernelSpec(2.5, 3)))
        assert m.gamma == pytest.approx(2.5)

    def test_shape_validation(self):
        fm = sample_rff(KernelSpec(1.0, 1), 4, seed=0)
        with pytest.raises(InvalidArgumentError):
            DensityMatrixModel(np.eye(3), np.ones(3) / 3, fm, 1.0)
        with pytest.raises(InvalidArgumentError):
            DensityMatrixModel(np.eye(4)[:2], [1.0, -0.5], fm, 1.0)

    def test_arrays_frozen(self):
        fm = sample_rff(KernelSpec(1.0, 1), 2, seed=0)
        m = DensityMatrixModel(np.eye(2), [0.5, 0.5], fm, 1.0)
        with pytest.raises(ValueError):
            m.Lambda[0] = 1.0


class TestNormalizingConstant:
    def test_closed_forms(self):
        assert normalizing_constant(KernelSpec(math.pi, 4)) == pytest.approx(1.0)
        assert normalizing_constant(KernelSpec(1.0, 2)) == pytest.approx(math.pi)

    def test_quadrature(self):
        g = np.linspace(-15, 15, 30001)
        val = np.trapezoid(np.exp(-0.7 * g**2), g)
        assert normalizing_constant(KernelSpec(0.7, 1)) == pytest.approx(val, rel=1e-10)
        assert normalizing_constant(KernelSpec(0.7, 2)) == pytest.approx(val**2, rel=1e-10)


class TestResolveRank:
    def test_cases(self):
        assert resolve_rank(100) == 100
        assert resolve_rank(100, rank=7) == 7
        assert resolve_rank(100, rank_frac=0.1) == 10
        assert resolve_rank(100, rank_frac=0.0) == 1
        assert resolve_rank(100, rank_frac=1.0) == 100

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            resolve_rank(10, rank=3, rank_frac=0.5)
        with pytest.raises(InvalidArgumentError):
            resolve_rank(10, rank=11)
        with pytest.raises(InvalidArgumentError):
            resolve_rank(10, rank_frac=1.5)
