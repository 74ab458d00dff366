import numpy as np
import pytest

from kgsa.data import DataSet
from kgsa.embedding import (
    beta_cme,
    fit_cme,
    isf_dist,
    isf_norm,
    isf_profile,
    mmd2_unbiased,
    normalization_stats,
)
from kgsa.errors import DataError, NumericalError
from kgsa.kernels import gram_matrix, linear_kernel, rbf_kernel


def make_dataset(x, y):
    return DataSet(inputs=np.asarray(x, dtype=float), outputs=np.asarray(y, dtype=float))


class TestNormalizationStats:
    def test_identical_outputs_rbf(self):
        k = gram_matrix(rbf_kernel(1.0), np.ones((3, 1)))
        stats = normalization_stats(k)
        assert stats.c_y == 1.0
        assert stats.c_yy == 1.0

    def test_linear_plus_minus_one(self):
        k = gram_matrix(linear_kernel(), [[1.0], [-1.0]])
        stats = normalization_stats(k)
        assert stats.c_y == 1.0
        assert stats.c_yy == -1.0

    def test_large_sample_limits_match_direct_summation(self):
        rng = np.random.default_rng(0)
        y = rng.normal(size=(400, 1))
        k = gram_matrix(linear_kernel(), y)
        stats = normalization_stats(k)
        n = len(y)
        # independent oracle: explicit double loop over the definition
        diag = sum(float(y[i] @ y[i]) for i in range(n)) / n
        off = sum(float(y[i] @ y[j]) for i in range(n) for j in range(n) if i != j) / (n * (n - 1))
        assert stats.c_y == pytest.approx(diag, rel=1e-12)
        assert stats.c_yy == pytest.approx(off, abs=1e-12)
        # law of large numbers: c_y -> 1, c_yy -> 0
        assert abs(stats.c_y - 1.0) < 0.2
        assert abs(stats.c_yy) < 0.05

    def test_rbf_c_y_is_exactly_one(self):
        rng = np.random.default_rng(1)
        k = gram_matrix(rbf_kernel(0.7), rng.normal(size=(50, 2)))
        assert normalization_stats(k).c_y == 1.0

    def test_needs_two_samples(self):
        with pytest.raises(DataError):
            normalization_stats(np.ones((1, 1)))


class TestMmd2Unbiased:
    def test_same_points_small(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(30, 1))
        v = mmd2_unbiased(x, x, rbf_kernel(1.0))
        assert v <= 1e-12  # identical samples: cross term dominates

    def test_linear_kernel_mean_shift(self):
        a = np.array([[0.0], [0.0]])
        b = np.array([[1.0], [1.0]])
        assert mmd2_unbiased(a, b, linear_kernel()) == pytest.approx(1.0, abs=1e-15)

    def test_disjoint_point_masses_rbf(self):
        c, sigma = 1.7, 0.9
        a = np.zeros((4, 1))
        b = np.full((5, 1), c)
        expected = 2.0 * (1.0 - np.exp(-(c**2) / (2 * sigma**2)))
        assert mmd2_unbiased(a, b, rbf_kernel(sigma)) == pytest.approx(expected, rel=1e-12)

    def test_null_calibration(self):
        # mean over seeded replicates of equal distributions is within
        # 3 standard errors of zero (unbiasedness)
        rng = np.random.default_rng(3)
        spec = rbf_kernel(1.0)
        values = []
        for _ in range(200):
            a = rng.normal(size=(50, 1))
            b = rng.normal(size=(50, 1))
            values.append(mmd2_unbiased(a, b, spec))
        values = np.asarray(values)
        se = values.std(ddof=1) / np.sqrt(len(values))
        assert abs(values.mean()) < 3 * se

    def test_needs_two_each(self):
        with pytest.raises(DataError):
            mmd2_unbiased(np.ones((1, 1)), np.ones((5, 1)), linear_kernel())


class TestFitCme:
    def test_diagonal_input_gram(self):
        # L = I (two orthogonal unit inputs under the linear kernel),
        # lam = 1 -> W = 0.5 I
        data = make_dataset([[1.0, 0.0], [0.0, 1.0]], [[1.0], [2.0]])
        model = fit_cme(data, [1, 2], linear_kernel(), linear_kernel(), 1.0)
        assert np.allclose(model.weight_matrix(), 0.5 * np.eye(2), atol=1e-14)

    def test_weight_matrix_inverts_regularized_gram(self):
        rng = np.random.default_rng(4)
        data = make_dataset(rng.normal(size=(40, 2)), rng.normal(size=(40, 1)))
        lam = 3e-2
        model = fit_cme(data, [1, 2], rbf_kernel(1.0), rbf_kernel(1.0), lam)
        w = model.weight_matrix()
        identity = (model.input_gram + lam * np.eye(40)) @ w
        assert np.abs(identity - np.eye(40)).max() < 1e-6
        assert np.abs(w - w.T).max() < 1e-10

    def test_two_by_two_inverse_by_hand(self):
        a, lam = 0.6, 0.5
        data = make_dataset([[0.0], [1.0]], [[0.5], [1.5]])
        bw = np.sqrt(1.0 / (-2.0 * np.log(a)))  # rbf gram off-diagonal equals a
        model = fit_cme(data, [1], rbf_kernel(bw), rbf_kernel(1.0), lam)
        expected = np.linalg.inv(np.array([[1.0 + lam, a], [a, 1.0 + lam]]))
        assert np.abs(model.weight_matrix() - expected).max() < 1e-10

    def test_lambda_must_be_positive(self):
        data = make_dataset([[0.0], [1.0]], [[0.0], [1.0]])
        with pytest.raises(DataError):
            fit_cme(data, [1], rbf_kernel(1.0), rbf_kernel(1.0), 0.0)

    def test_constant_outputs_degenerate_denominator(self):
        data = make_dataset([[0.0], [1.0], [2.0]], [[5.0], [5.0], [5.0]])
        with pytest.raises(NumericalError, match="degenerate"):
            fit_cme(data, [1], rbf_kernel(1.0), rbf_kernel(1.0), 1e-3)


class TestIsf:
    @staticmethod
    def hand_model():
        """N=2 model small enough to expand by scalar algebra."""
        x = np.array([[0.0], [1.0]])
        y = np.array([[0.0], [2.0]])
        lam = 0.3
        model = fit_cme(make_dataset(x, y), [1], rbf_kernel(0.8), rbf_kernel(1.5), lam)
        return model, x, y, lam

    def test_norm_isf_matches_hand_expansion(self):
        model, x, y, lam = self.hand_model()
        q = 0.25
        l01 = np.exp(-((0.0 - 1.0) ** 2) / (2 * 0.8**2))
        k01 = np.exp(-((0.0 - 2.0) ** 2) / (2 * 1.5**2))
        gam = np.array([np.exp(-((q - 0.0) ** 2) / (2 * 0.8**2)), np.exp(-((q - 1.0) ** 2) / (2 * 0.8**2))])
        w = np.linalg.inv(np.array([[1 + lam, l01], [l01, 1 + lam]]))
        k = np.array([[1.0, k01], [k01, 1.0]])
        c_y, c_yy = 1.0, k01
        g = w @ gam
        expected_norm = (g @ k @ g - c_yy) / (c_y - c_yy)
        assert isf_norm(model, [q]) == pytest.approx(expected_norm, rel=1e-12)

    def test_dist_isf_matches_hand_expansion(self):
        model, x, y, lam = self.hand_model()
        q = -0.4
        l01 = np.exp(-((0.0 - 1.0) ** 2) / (2 * 0.8**2))
        k01 = np.exp(-((0.0 - 2.0) ** 2) / (2 * 1.5**2))
        gam = np.array([np.exp(-((q - 0.0) ** 2) / (2 * 0.8**2)), np.exp(-((q - 1.0) ** 2) / (2 * 0.8**2))])
        w = np.linalg.inv(np.array([[1 + lam, l01], [l01, 1 + lam]]))
        k = np.array([[1.0, k01], [k01, 1.0]])
        c_y, c_yy = 1.0, k01
        alpha = w @ gam - 0.5
        expected = (alpha @ k @ alpha) / (c_y - c_yy)
        assert isf_dist(model, [q]) == pytest.approx(expected, rel=1e-12)

    def test_deterministic_map_norm_isf_near_one(self):
        # conditional output is a point mass -> gamma_norm approx 1
        rng = np.random.default_rng(5)
        x = rng.normal(size=(300, 1))
        data = make_dataset(x, x.copy())
        model = fit_cme(data, [1], rbf_kernel(0.5), rbf_kernel(1.0), 1e-6)
        values = [isf_norm(model, [q]) for q in (-0.5, 0.0, 0.7)]
        assert np.allclose(values, 1.0, atol=0.15)
        beta = beta_cme(model, "N").value
        assert beta == pytest.approx(1.0, abs=0.1)

    def test_dist_isf_nonnegative(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(120, 2))
        y = (x[:, 0] + 0.3 * rng.normal(size=120)).reshape(-1, 1)
        data = make_dataset(x, y)
        model = fit_cme(data, [1], rbf_kernel(0.8), rbf_kernel(1.0), 1e-3)
        grid = np.linspace(-4.0, 4.0, 50)
        profile = isf_profile(model, grid)
        assert profile.gamma_dist.min() >= -1e-10

    def test_pure_noise_input_beta_near_zero(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(400, 2))
        y = x[:, :1].copy()  # depends only on input 1
        data = make_dataset(x, y)
        model = fit_cme(data, [2], rbf_kernel(1.0), rbf_kernel(1.0), 1e-1)
        assert abs(beta_cme(model, "N").value) < 0.1
        assert abs(beta_cme(model, "D").value) < 0.1

    def test_query_dimension_mismatch(self):
        model, *_ = self.hand_model()
        with pytest.raises(DataError):
            isf_norm(model, [0.1, 0.2])


class TestBetaProfileConsistency:
    def test_beta_equals_mean_profile_at_training_points(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(60, 2))
        y = (x[:, 0] * x[:, 1]).reshape(-1, 1)
        data = make_dataset(x, y)
        model = fit_cme(data, [1, 2], rbf_kernel(1.1), rbf_kernel(0.9), 1e-2)
        beta = beta_cme(model, "N").value
        profile = isf_profile(model, x)
        assert abs(beta - profile.gamma_norm.mean()) < 1e-12
        beta_d = beta_cme(model, "D").value
        assert abs(beta_d - profile.gamma_dist.mean()) < 1e-12

    def test_profile_preserves_grid_order_and_flags(self):
        rng = np.random.default_rng(9)
        x = rng.uniform(-1.0, 1.0, size=(50, 1))
        data = make_dataset(x, np.sin(3 * x))
        model = fit_cme(data, [1], rbf_kernel(0.4), rbf_kernel(0.8), 1e-3)
        grid = np.array([-2.0, -0.5, 0.5, 2.0])
        profile = isf_profile(model, grid)
        assert np.array_equal(profile.points[:, 0], grid)
        assert list(profile.inside_hull) == [False, True, True, False]
        single = isf_profile(model, [[0.5]])
        assert single.gamma_norm[0] == pytest.approx(profile.gamma_norm[2], rel=1e-12)
        assert single.gamma_dist[0] == pytest.approx(profile.gamma_dist[2], rel=1e-12)

    def test_empty_grid_rejected(self):
        model, *_ = TestIsf.hand_model()
        with pytest.raises(DataError):
            isf_profile(model, np.empty((0, 1)))
