import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from betavae.autodiff import DimensionError
from betavae.baselines import pca_fit
from betavae.fid import (
    ActivationFileError,
    AvgPoolDownsample,
    CovarianceError,
    ExternalActivations,
    Flatten,
    GaussianStats,
    PcaProjector,
    fid_from_activation_files,
    fid_score,
    fit_gaussian,
    frechet_distance,
    make_extractor,
    merge_stats,
    read_activations,
    stats_from_activation_file,
    write_activations,
)


def stats(mu, sigma, n=10):
    return GaussianStats(np.asarray(mu, float), np.asarray(sigma, float), n)


def random_spd(d, rng):
    a = rng.normal(size=(d, d))
    return a @ a.T / d + 0.1 * np.eye(d)


def dense_fd(a, b):
    """Independent oracle: scipy general matrix sqrt of the asymmetric product."""
    from scipy.linalg import sqrtm

    covmean = sqrtm(a.sigma @ b.sigma)
    d = a.mu - b.mu
    return float(d @ d + np.trace(a.sigma + b.sigma - 2 * np.real(covmean)))


class TestFitGaussian:
    def test_two_points(self):
        s = fit_gaussian([[0, 0], [2, 0]])
        np.testing.assert_array_equal(s.mu, [1, 0])
        np.testing.assert_array_equal(s.sigma, [[2, 0], [0, 0]])

    def test_constant_rows(self):
        s = fit_gaussian(np.ones((5, 3)) * 4)
        np.testing.assert_array_equal(s.sigma, np.zeros((3, 3)))

    def test_monte_carlo_recovery(self):
        rng = np.random.default_rng(0)
        mu = np.array([1.0, -2.0, 3.0])
        cov = np.array([[2.0, 0.5, 0.2], [0.5, 1.0, 0.3], [0.2, 0.3, 1.5]])
        s = fit_gaussian(rng.multivariate_normal(mu, cov, size=10_000))
        assert np.all(np.abs(s.mu - mu) <= 0.05 * np.abs(mu))
        assert np.all(np.abs(s.sigma - cov) <= 0.05 * np.abs(cov) + 0.02)

    def test_symmetric_and_unbiased(self):
        X = np.random.default_rng(1).normal(size=(7, 4))
        s = fit_gaussian(X)
        np.testing.assert_array_equal(s.sigma, s.sigma.T)
        np.testing.assert_allclose(s.sigma, np.cov(X, rowvar=False), atol=1e-12)

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            fit_gaussian(np.zeros((1, 3)))

    def test_merge_matches_single_pass(self):
        X = np.random.default_rng(2).normal(size=(30, 5)) * [1, 2, 3, 4, 5]
        m = merge_stats(fit_gaussian(X[:11]), fit_gaussian(X[11:]))
        s = fit_gaussian(X)
        assert m.n == 30
        np.testing.assert_allclose(m.mu, s.mu, atol=1e-12)
        np.testing.assert_allclose(m.sigma, s.sigma, atol=1e-12)

    def test_merge_keeps_low_rank_factor(self):
        X = np.random.default_rng(3).normal(size=(9, 40))
        m = merge_stats(fit_gaussian(X[:4]), fit_gaussian(X[4:]))
        assert m.factor is not None
        np.testing.assert_allclose(m.factor.T @ m.factor, fit_gaussian(X).sigma, atol=1e-12)


class TestFrechet:
    def test_identical(self):
        rng = np.random.default_rng(0)
        a = stats(rng.normal(size=5), random_spd(5, rng))
        assert abs(frechet_distance(a, a)) < 1e-8

    def test_unit_covariance_mean_shift(self):
        assert frechet_distance(stats([0, 0], np.eye(2)), stats([1, 1], np.eye(2))) == 2.0

    def test_one_dimensional(self):
        assert frechet_distance(stats([0], [[4]]), stats([0], [[1]])) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_diagonal_closed_form(self, seed):
        rng = np.random.default_rng(seed)
        d = 6
        va, vb = rng.uniform(0.1, 3, d), rng.uniform(0.1, 3, d)
        ma, mb = rng.normal(size=d), rng.normal(size=d)
        expected = np.sum((ma - mb) ** 2) + np.sum((np.sqrt(va) - np.sqrt(vb)) ** 2)
        assert abs(frechet_distance(stats(ma, np.diag(va)), stats(mb, np.diag(vb))) - expected) < 1e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_sqrtm_oracle(self, seed):
        rng = np.random.default_rng(seed)
        a = stats(rng.normal(size=8), random_spd(8, rng))
        b = stats(rng.normal(size=8), random_spd(8, rng))
        assert frechet_distance(a, b) == pytest.approx(dense_fd(a, b), rel=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 10_000))
    def test_symmetry_and_nonnegativity(self, d, seed):
        rng = np.random.default_rng(seed)
        a = stats(rng.normal(size=d), random_spd(d, rng))
        b = stats(rng.normal(size=d), random_spd(d, rng))
        ab, ba = frechet_distance(a, b), frechet_distance(b, a)
        assert abs(ab - ba) < 1e-8 and ab >= 0

    def test_monotone_under_translation(self):
        rng = np.random.default_rng(4)
        sa, sb = random_spd(4, rng), random_spd(4, rng)
        u = rng.normal(size=4)
        vals = [frechet_distance(stats(np.zeros(4), sa), stats(t * u, sb)) for t in np.linspace(0, 3, 7)]
        assert np.all(np.diff(vals) > 0)

    def test_low_rank_route_matches_sandwich(self):
        rng = np.random.default_rng(5)
        A, B = fit_gaussian(rng.normal(size=(6, 20))), fit_gaussian(rng.normal(size=(8, 20)) + 0.3)
        assert A.factor is not None and B.factor is not None
        dense = frechet_distance(GaussianStats(A.mu, A.sigma, A.n), GaussianStats(B.mu, B.sigma, B.n))
        # the dense route takes sqrt of ~1e-16 rounding eigenvalues (~1e-8 each)
        assert frechet_distance(A, B) == pytest.approx(dense, rel=1e-7)

    def test_large_dimension_uses_lapack(self):
        rng = np.random.default_rng(6)
        a = stats(np.zeros(70), random_spd(70, rng))
        b = stats(np.ones(70), random_spd(70, rng))
        assert frechet_distance(a, b) == pytest.approx(dense_fd(a, b), rel=1e-8)

    def test_invalid_covariance(self):
        bad = stats([0, 0], [[1, 0], [0, -1e-3]])
        with pytest.raises(CovarianceError):
            frechet_distance(bad, stats([0, 0], np.eye(2)))
        with pytest.raises(CovarianceError):
            frechet_distance(stats([0, 0], np.eye(2)), bad)

    def test_tiny_negative_eigenvalue_clamped(self):
        s = stats([0, 0], [[1, 0], [0, -1e-9]])
        assert frechet_distance(s, s) == pytest.approx(0.0, abs=1e-8)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            frechet_distance(stats([0], [[1]]), stats([0, 0], np.eye(2)))


class TestExtractors:
    def test_flatten_row_major(self):
        img = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        np.testing.assert_array_equal(Flatten()(img), [[1, 2, 3, 4]])

    def test_avgpool_constant(self):
        f = AvgPoolDownsample(2)(np.full((2, 1, 4, 4), 0.3))
        assert f.shape == (2, 4)
        np.testing.assert_allclose(f, 0.3)

    def test_avgpool_values_and_errors(self):
        img = np.arange(16.0).reshape(1, 1, 4, 4)
        np.testing.assert_array_equal(AvgPoolDownsample(2)(img), [[2.5, 4.5, 10.5, 12.5]])
        with pytest.raises(DimensionError):
            AvgPoolDownsample(3)(img)

    def test_pca_projector_matches_transform(self):
        imgs = np.random.default_rng(0).random((30, 1, 4, 4))
        m = pca_fit(imgs, 5)
        np.testing.assert_array_equal(PcaProjector(m)(imgs), m.transform(imgs))

    def test_make_extractor(self, tmp_path):
        assert isinstance(make_extractor("flatten"), Flatten)
        assert make_extractor("avgpool:4").factor == 4
        write_activations(tmp_path / "a.actv", np.zeros((3, 2)))
        assert make_extractor(f"external:{tmp_path / 'a.actv'}").output_dim == 2
        with pytest.raises(ValueError):
            make_extractor("inception")


class TestFidScore:
    def test_identical_sets(self):
        imgs = np.random.default_rng(0).random((20, 1, 4, 4))
        assert fid_score(Flatten(), imgs, imgs) < 1e-8

    def test_symmetric_in_sets(self):
        rng = np.random.default_rng(1)
        a, b = rng.random((40, 1, 4, 4)), rng.random((30, 1, 4, 4)) ** 2
        f = AvgPoolDownsample(2)
        assert abs(fid_score(f, a, b) - fid_score(f, b, a)) < 1e-8


class TestActivationFiles:
    def test_round_trip_and_stream_stats(self, tmp_path):
        X = np.random.default_rng(0).normal(size=(23, 4))
        p = write_activations(tmp_path / "x.actv", X)
        np.testing.assert_array_equal(read_activations(p), X)
        s = stats_from_activation_file(p, chunk_rows=5)  # last shard has 3 rows
        np.testing.assert_allclose(s.sigma, fit_gaussian(X).sigma, atol=1e-12)
        s1 = stats_from_activation_file(p, chunk_rows=11)  # last shard has 1 row
        np.testing.assert_allclose(s1.sigma, fit_gaussian(X).sigma, atol=1e-12)
        np.testing.assert_allclose(s1.mu, X.mean(0), atol=1e-12)

    def test_fid_between_files(self, tmp_path):
        rng = np.random.default_rng(1)
        X, Y = rng.normal(size=(50, 3)), rng.normal(size=(60, 3)) + 1
        pa = write_activations(tmp_path / "a.actv", X)
        pb = write_activations(tmp_path / "b.actv", Y)
        expected = frechet_distance(fit_gaussian(X), fit_gaussian(Y))
        assert fid_from_activation_files(pa, pb) == pytest.approx(expected, abs=1e-10)
        assert np.array_equal(ExternalActivations(pa)(None), X)

    def test_errors(self, tmp_path):
        p = write_activations(tmp_path / "x.actv", np.zeros((4, 2)))
        raw = p.read_bytes()
        (tmp_path / "magic.actv").write_bytes(b"XXXX" + raw[4:])
        (tmp_path / "short.actv").write_bytes(raw[:-8])
        (tmp_path / "head.actv").write_bytes(raw[:6])
        for name in ("magic", "short", "head"):
            with pytest.raises(ActivationFileError):
                read_activations(tmp_path / f"{name}.actv")
        with pytest.raises(DimensionError):
            write_activations(tmp_path / "bad.actv", np.zeros(3))
