import numpy as np
import pytest

from pceval.errors import DegenerateFitError, InsufficientDataError, ValidationError
from pceval.gmm import EmConfig, GmmModel, fit_em, gmm_sample, log_likelihood


def two_cluster_data(rng, n_per=200, sep=8.0, dim=2, scale=0.3):
    a = rng.normal(size=(n_per, dim)) * scale - sep / 2
    b = rng.normal(size=(n_per, dim)) * scale + sep / 2
    return np.vstack([a, b])


def standard_normal_model(dim=1):
    return GmmModel(
        weights=np.array([1.0]),
        means=np.zeros((1, dim)),
        covariances=np.eye(dim)[None, :, :],
        covariance_type="full",
    )


class TestEmConfig:
    def test_defaults(self):
        config = EmConfig(n_components=2)
        assert config.covariance_type == "full"
        assert config.restarts == 3

    def test_validation(self):
        with pytest.raises(ValidationError):
            EmConfig(n_components=0)
        with pytest.raises(ValidationError):
            EmConfig(n_components=2, covariance_type="spherical")
        with pytest.raises(ValidationError):
            EmConfig(n_components=2, reg_covar=-1.0)
        with pytest.raises(ValidationError):
            EmConfig(n_components=2, restarts=0)


class TestSingleComponentClosedForm:
    def test_full_covariance_matches_moments(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(100, 3)) @ np.diag([1.0, 2.0, 0.5]) + [1, -2, 3]
        config = EmConfig(n_components=1, reg_covar=1e-6)
        model, _ = fit_em(x, config)
        mean = x.mean(axis=0)
        diff = x - mean
        cov = diff.T @ diff / x.shape[0] + 1e-6 * np.eye(3)
        np.testing.assert_allclose(model.means[0], mean, atol=1e-9)
        np.testing.assert_allclose(model.covariances[0], cov, atol=1e-9)
        assert model.weights[0] == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_covariance_matches_moments(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(80, 2)) * [0.5, 3.0] + [4, -1]
        config = EmConfig(n_components=1, covariance_type="diagonal", reg_covar=1e-5)
        model, _ = fit_em(x, config)
        var = x.var(axis=0) + 1e-5
        np.testing.assert_allclose(model.means[0], x.mean(axis=0), atol=1e-9)
        np.testing.assert_allclose(model.covariances[0], var, atol=1e-9)


class TestFitEm:
    def test_recovers_two_separated_clusters(self):
        rng = np.random.default_rng(2)
        x = two_cluster_data(rng)
        model, diag = fit_em(x, EmConfig(n_components=2, seed=0))
        order = np.argsort(model.means[:, 0])
        np.testing.assert_allclose(model.means[order, 0], [-4.0, 4.0], atol=0.1)
        np.testing.assert_allclose(model.weights, [0.5, 0.5], atol=0.05)
        assert diag.converged

    def test_log_likelihood_trace_non_decreasing(self):
        rng = np.random.default_rng(3)
        for seed in range(5):
            x = rng.normal(size=(60, 2)) * [1, 2] + rng.normal(size=2)
            _, diag = fit_em(x, EmConfig(n_components=3, seed=seed))
            trace = np.asarray(diag.log_likelihood_trace)
            assert np.all(np.diff(trace) >= -1e-8)

    def test_final_trace_matches_model_likelihood(self):
        rng = np.random.default_rng(4)
        x = two_cluster_data(rng, n_per=50)
        model, diag = fit_em(x, EmConfig(n_components=2, seed=1))
        assert diag.log_likelihood_trace[-1] == pytest.approx(
            log_likelihood(model, x), abs=1e-9
        )

    def test_budget_exhaustion_keeps_trace_consistent(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(40, 2))
        model, diag = fit_em(x, EmConfig(n_components=3, max_iters=2, tol=0.0, seed=0))
        assert not diag.converged
        assert diag.log_likelihood_trace[-1] == pytest.approx(
            log_likelihood(model, x), abs=1e-9
        )

    def test_row_order_invariance(self):
        rng = np.random.default_rng(6)
        x = two_cluster_data(rng, n_per=40)
        config = EmConfig(n_components=2, seed=3)
        model_a, _ = fit_em(x, config)
        model_b, _ = fit_em(x[rng.permutation(x.shape[0])], config)
        np.testing.assert_array_equal(model_a.means, model_b.means)
        np.testing.assert_array_equal(model_a.covariances, model_b.covariances)
        np.testing.assert_array_equal(model_a.weights, model_b.weights)

    def test_restart_log_records_every_attempt(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(50, 2))
        _, diag = fit_em(x, EmConfig(n_components=2, restarts=4, seed=0))
        assert len(diag.restart_log_likelihoods) == 4
        assert max(diag.restart_log_likelihoods) == pytest.approx(
            diag.log_likelihood_trace[-1], abs=1e-9
        )

    def test_insufficient_data_rejected(self):
        with pytest.raises(InsufficientDataError):
            fit_em(np.zeros((3, 2)), EmConfig(n_components=5))

    def test_degenerate_fit_names_component(self):
        x = np.zeros((8, 2))
        with pytest.raises(DegenerateFitError) as err:
            fit_em(x, EmConfig(n_components=2, reg_covar=0.0))
        assert err.value.component >= 0
        assert "component" in str(err.value)

    def test_diagonal_fit_recovers_axis_scales(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(500, 2)) * [0.5, 2.0]
        model, _ = fit_em(x, EmConfig(n_components=1, covariance_type="diagonal"))
        np.testing.assert_allclose(model.covariances[0], [0.25, 4.0], rtol=0.2)


class TestLogLikelihood:
    def test_standard_normal_at_origin(self):
        model = standard_normal_model(dim=1)
        value = log_likelihood(model, np.zeros((1, 1)))
        assert value == pytest.approx(-0.5 * np.log(2 * np.pi), abs=1e-12)

    def test_duplicate_rows_average_unchanged(self):
        rng = np.random.default_rng(9)
        model = standard_normal_model(dim=3)
        x = rng.normal(size=(10, 3))
        doubled = np.vstack([x, x])
        assert log_likelihood(model, doubled) == pytest.approx(
            log_likelihood(model, x), abs=1e-12
        )

    def test_wider_covariance_lowers_density_at_mean(self):
        narrow = standard_normal_model(dim=2)
        wide = GmmModel(
            weights=np.array([1.0]),
            means=np.zeros((1, 2)),
            covariances=(4.0 * np.eye(2))[None],
            covariance_type="full",
        )
        at_mean = np.zeros((1, 2))
        assert log_likelihood(wide, at_mean) < log_likelihood(narrow, at_mean)

    def test_dimension_mismatch_rejected(self):
        model = standard_normal_model(dim=2)
        with pytest.raises(ValidationError):
            log_likelihood(model, np.zeros((4, 3)))


class TestGmmModelValidation:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            GmmModel(
                weights=np.array([0.7, 0.7]),
                means=np.zeros((2, 2)),
                covariances=np.stack([np.eye(2)] * 2),
                covariance_type="full",
            )

    def test_diagonal_variances_must_be_positive(self):
        with pytest.raises(ValidationError):
            GmmModel(
                weights=np.array([1.0]),
                means=np.zeros((1, 2)),
                covariances=np.array([[1.0, -1.0]]),
                covariance_type="diagonal",
            )

    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        x = two_cluster_data(rng, n_per=30)
        model, _ = fit_em(x, EmConfig(n_components=2, seed=0))
        path = tmp_path / "model.npz"
        model.save(path)
        loaded = GmmModel.load(path)
        np.testing.assert_array_equal(loaded.weights, model.weights)
        np.testing.assert_array_equal(loaded.means, model.means)
        np.testing.assert_array_equal(loaded.covariances, model.covariances)
        assert loaded.covariance_type == model.covariance_type

    def test_save_honors_exact_path(self, tmp_path):
        # Paths without an .npz suffix must not be rewritten on disk.
        rng = np.random.default_rng(11)
        x = two_cluster_data(rng, n_per=30)
        model, _ = fit_em(x, EmConfig(n_components=2, seed=0))
        path = tmp_path / "model.gmm"
        model.save(path)
        assert path.exists()
        assert not (tmp_path / "model.gmm.npz").exists()
        loaded = GmmModel.load(path)
        np.testing.assert_array_equal(loaded.means, model.means)


class TestGmmSample:
    def test_degenerate_weights_select_single_component(self):
        model = GmmModel(
            weights=np.array([1.0, 0.0]),
            means=np.array([[0.0, 0.0], [100.0, 100.0]]),
            covariances=np.stack([np.eye(2) * 1e-6] * 2),
            covariance_type="full",
        )
        draws = gmm_sample(model, 50, np.random.default_rng(0))
        assert np.all(np.linalg.norm(draws, axis=1) < 1.0)

    def test_tiny_covariance_concentrates_at_mean(self):
        model = GmmModel(
            weights=np.array([1.0]),
            means=np.array([[2.0, -3.0, 1.0]]),
            covariances=np.array([[1e-10, 1e-10, 1e-10]]),
            covariance_type="diagonal",
        )
        draws = gmm_sample(model, 100, np.random.default_rng(1))
        np.testing.assert_allclose(draws, np.tile(model.means, (100, 1)), atol=1e-3)

    def test_sample_mean_matches_mixture_mean(self):
        model = GmmModel(
            weights=np.array([0.25, 0.75]),
            means=np.array([[0.0, 0.0], [4.0, 0.0]]),
            covariances=np.stack([np.eye(2)] * 2),
            covariance_type="full",
        )
        draws = gmm_sample(model, 100_000, np.random.default_rng(2))
        mixture_mean = model.weights @ model.means
        # per-coordinate std is bounded by sqrt(var + spread^2) ~= 2.2
        np.testing.assert_allclose(
            draws.mean(axis=0), mixture_mean, atol=3 * 2.2 / np.sqrt(100_000)
        )

    def test_same_rng_state_reproduces_draws(self):
        rng = np.random.default_rng(11)
        x = two_cluster_data(rng, n_per=30)
        model, _ = fit_em(x, EmConfig(n_components=2, seed=0))
        a = gmm_sample(model, 25, np.random.default_rng(42))
        b = gmm_sample(model, 25, np.random.default_rng(42))
        np.testing.assert_array_equal(a, b)

    def test_count_validation(self):
        model = standard_normal_model()
        with pytest.raises(ValidationError):
            gmm_sample(model, 0, np.random.default_rng(0))

    def test_round_trip_fit_on_samples_recovers_means(self):
        model = GmmModel(
            weights=np.array([0.5, 0.5]),
            means=np.array([[-5.0, 0.0], [5.0, 0.0]]),
            covariances=np.stack([np.eye(2) * 0.01] * 2),
            covariance_type="full",
        )
        draws = gmm_sample(model, 2000, np.random.default_rng(3))
        refit, _ = fit_em(draws, EmConfig(n_components=2, seed=0))
        order = np.argsort(refit.means[:, 0])
        np.testing.assert_allclose(refit.means[order], model.means, atol=0.05)
