"""Tests for the logistic, least-squares and lasso learners."""

import numpy as np
import pytest
import statsmodels.api as sm

from fairaudit.core.errors import (
    ConfigError,
    LearnerError,
    RankDeficiencyError,
    ShapeMismatchError,
)
from fairaudit.core.interfaces import BinaryLearner
from fairaudit.core.models import FitKind, TaskKind
from fairaudit.learners import (
    LassoConfig,
    LogisticConfig,
    LogisticLearner,
    MultiLabelModel,
    encode_protected,
    fit_lasso,
    fit_logistic,
    fit_multilabel,
    fit_multitask_lasso,
    fit_multitask_regression,
    fit_ols,
    lasso_lambda_max,
    logistic_gradient,
    logistic_objective,
    predict_proba,
)


def logistic_data(n=400, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    z = 0.3 + X @ np.array([1.5, -1.0, 0.0])
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-z))).astype(float)
    return X, y


def linear_data(n=200, seed=1, noise=0.1):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 4))
    y = 2.0 + X @ np.array([1.0, -2.0, 0.5, 0.0]) + noise * rng.standard_normal(n)
    return X, y


def lasso_objective(X, y, coef, intercept, lam):
    """1/(2n) ‖y - Xb - a‖² + λ‖b‖₁ evaluated as given, without standardizing."""
    residual = y - X @ coef - intercept
    return 0.5 * residual @ residual / len(residual) + lam * np.abs(coef).sum()


def scaled_lasso_data(seed=0):
    """30 rows, two columns on very different scales."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, 2)) * np.array([3.0, 0.2])
    y = 1.0 + X @ np.array([0.5, 2.0]) + 0.3 * rng.standard_normal(30)
    return X, y


class TestLogistic:
    """Tests for the IRLS logistic fit."""

    def test_gradient_vanishes_at_optimum(self):
        X, y = logistic_data()
        fit = fit_logistic(X, y)
        grad = logistic_gradient(fit.coefficients, fit.intercept, X, y)
        assert fit.converged
        assert np.linalg.norm(grad) < 1e-6

    @pytest.mark.parametrize("seed", range(20))
    def test_gradient_matches_central_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, p = rng.integers(20, 80), rng.integers(1, 5)
        X = rng.standard_normal((n, p))
        y = (rng.random(n) < 0.4).astype(float)
        weights = rng.uniform(0.5, 2.0, n)
        l2 = float(rng.choice([0.0, 0.1]))
        theta = rng.standard_normal(p + 1)

        def objective(t):
            return logistic_objective(t[1:], t[0], X, y, l2=l2, sample_weight=weights)

        h = 1e-6
        numeric = np.array([
            (objective(theta + h * e) - objective(theta - h * e)) / (2 * h)
            for e in np.eye(p + 1)
        ])
        analytic = logistic_gradient(theta[1:], theta[0], X, y, l2=l2, sample_weight=weights)
        assert np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic) < 1e-5

    def test_matches_statsmodels(self):
        X, y = logistic_data()
        fit = fit_logistic(X, y)
        reference = sm.Logit(y, sm.add_constant(X)).fit(disp=0).params
        np.testing.assert_allclose(fit.intercept, reference[0], atol=1e-5)
        np.testing.assert_allclose(fit.coefficients, reference[1:], atol=1e-5)

    def test_trace_is_non_increasing(self):
        X, y = logistic_data()
        trace = np.array(fit_logistic(X, y, LogisticConfig(l2=0.01)).trace)
        assert (np.diff(trace) <= 1e-12).all()

    def test_objective_matches_trace_end(self):
        X, y = logistic_data()
        cfg = LogisticConfig(l2=0.05)
        fit = fit_logistic(X, y, cfg)
        value = logistic_objective(fit.coefficients, fit.intercept, X, y, l2=cfg.l2)
        assert value == pytest.approx(fit.trace[-1], rel=1e-9)

    def test_integer_weights_equal_duplicated_rows(self):
        X, y = logistic_data(n=120)
        weights = np.where(np.arange(120) % 3 == 0, 2.0, 1.0)
        weighted = fit_logistic(X, y, sample_weight=weights)
        repeat = weights.astype(int)
        duplicated = fit_logistic(np.repeat(X, repeat, axis=0), np.repeat(y, repeat))
        np.testing.assert_allclose(weighted.coefficients, duplicated.coefficients, atol=1e-6)

    def test_single_class_falls_back_to_intercept(self):
        X = np.random.default_rng(0).standard_normal((20, 2))
        fit = fit_logistic(X, np.zeros(20))
        assert not fit.converged
        np.testing.assert_array_equal(fit.coefficients, [0.0, 0.0])
        assert predict_proba(fit, X)[0] == pytest.approx(0.5 / 21)

    def test_probabilities_are_clipped(self):
        X, y = logistic_data()
        fit = fit_logistic(X, y)
        probs = predict_proba(fit, 1e6 * X)
        assert probs.min() >= 1e-15 and probs.max() <= 1 - 1e-15

    def test_non_binary_target(self):
        X, _ = logistic_data(n=10)
        with pytest.raises(LearnerError):
            fit_logistic(X, np.arange(10.0))

    def test_row_mismatch(self):
        X, y = logistic_data(n=10)
        with pytest.raises(ShapeMismatchError):
            fit_logistic(X, y[:5])

    def test_predict_proba_rejects_other_fits(self):
        X, y = linear_data()
        with pytest.raises(LearnerError):
            predict_proba(fit_ols(X, y), X)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            LogisticConfig(l2=-1.0)
        with pytest.raises(ConfigError) as exc:
            LogisticConfig.from_dict({"C": 1.0})
        assert exc.value.field == "C"

    def test_learner_protocol_wrapper(self):
        X, y = logistic_data()
        learner = LogisticLearner(LogisticConfig(l2=0.1))
        assert isinstance(learner, BinaryLearner)
        assert learner.name == "logistic(l2=0.1)"
        fit = learner.fit(X, y)
        assert fit.kind is FitKind.LOGISTIC
        assert learner.predict_proba(fit, X).shape == (400,)


class TestOls:
    """Tests for least squares with covariance."""

    def test_recovers_coefficients(self):
        X, y = linear_data(noise=0.0)
        fit = fit_ols(X, y)
        assert fit.intercept == pytest.approx(2.0)
        np.testing.assert_allclose(fit.coefficients, [1.0, -2.0, 0.5, 0.0], atol=1e-10)

    def test_covariance_matches_statsmodels(self):
        X, y = linear_data()
        fit = fit_ols(X, y, column_names=("a", "b", "c", "d"))
        reference = sm.OLS(y, sm.add_constant(X)).fit()
        np.testing.assert_allclose(fit.vcov, reference.cov_params(), rtol=1e-8)
        assert fit.residual_variance == pytest.approx(reference.scale)

    def test_rank_deficiency_names_columns(self):
        X, y = linear_data()
        X = np.column_stack([X, X[:, 0] + X[:, 1]])
        with pytest.raises(RankDeficiencyError) as exc:
            fit_ols(X, y, column_names=("a", "b", "c", "d", "e"))
        assert len(exc.value.columns) == 1

    def test_too_few_rows(self):
        with pytest.raises(LearnerError):
            fit_ols(np.zeros((3, 2)), np.zeros(3))


class TestLasso:
    """Tests for single and multi-task lasso."""

    def test_zero_solution_above_lambda_max(self):
        X, y = linear_data()
        fit = fit_lasso(X, y, lasso_lambda_max(X, y) * 1.01)
        np.testing.assert_array_equal(fit.coefficients, np.zeros(4))
        assert fit.intercept == pytest.approx(y.mean())

    def test_zero_lambda_matches_ols(self):
        X, y = linear_data()
        lasso = fit_lasso(X, y, 0.0)
        ols = fit_ols(X, y)
        np.testing.assert_allclose(lasso.coefficients, ols.coefficients, atol=1e-5)

    def test_trace_is_non_increasing(self):
        X, y = linear_data()
        trace = np.array(fit_lasso(X, y, 0.05).trace)
        assert (np.diff(trace) <= 1e-12).all()

    def test_shrinks_irrelevant_feature(self):
        X, y = linear_data()
        fit = fit_lasso(X, y, 0.1)
        assert fit.coefficients[3] == 0.0
        assert fit.converged

    def test_lambda_max_on_original_scale(self):
        X, y = scaled_lasso_data()
        lam_max = lasso_lambda_max(X, y)
        assert lam_max == pytest.approx(np.max(np.abs(X.T @ (y - y.mean()))) / len(y))
        assert np.all(fit_lasso(X, y, lam_max * 1.001).coefficients == 0.0)
        assert np.any(fit_lasso(X, y, lam_max * 0.99).coefficients != 0.0)

    def test_objective_not_above_grid_minimum(self):
        X, y = scaled_lasso_data()
        lam = 0.1
        fit = fit_lasso(X, y, lam)
        solution = lasso_objective(X, y, fit.coefficients, fit.intercept, lam)
        assert fit.trace[-1] == pytest.approx(solution, rel=1e-9)

        ols = fit_ols(X, y).coefficients
        axes = [
            np.linspace(min(0.0, b) - 1.0, max(0.0, b) + 1.0, 100) for b in ols
        ]
        grid = np.stack(np.meshgrid(*axes), axis=-1).reshape(-1, 2)
        Xc, yc = X - X.mean(axis=0), y - y.mean()
        residuals = yc[None, :] - grid @ Xc.T
        values = 0.5 * np.mean(residuals ** 2, axis=1) + lam * np.abs(grid).sum(axis=1)
        assert solution <= values.min() + 1e-6

    def test_multitask_single_task_matches_lasso(self):
        X, y = scaled_lasso_data()
        single = fit_lasso(X, y, 0.1)
        (multi,) = fit_multitask_lasso(X, y[:, None], 0.1)
        np.testing.assert_allclose(multi.coefficients, single.coefficients, atol=1e-6)
        assert multi.intercept == pytest.approx(single.intercept, abs=1e-6)

    def test_multitask_duplicated_targets(self):
        X, y = linear_data()
        first, second = fit_multitask_lasso(X, np.column_stack([y, y]), 0.05)
        np.testing.assert_allclose(first.coefficients, second.coefficients, atol=1e-8)

    def test_multitask_zero_rows(self):
        X, y = linear_data()
        rng = np.random.default_rng(5)
        Y = np.column_stack([y, X[:, 0] + 0.1 * rng.standard_normal(len(y))])
        fits = fit_multitask_lasso(X, Y, 0.3)
        coef = np.column_stack([fit.coefficients for fit in fits])
        # Feature 3 drives neither task.
        np.testing.assert_array_equal(coef[3], [0.0, 0.0])
        assert np.all(coef[1] != 0.0)
        everything = fit_multitask_lasso(X, Y, lasso_lambda_max(X, Y) * 1.001)
        assert all(np.all(fit.coefficients == 0.0) for fit in everything)

    def test_multitask_shared_support(self):
        X, y = linear_data()
        rng = np.random.default_rng(3)
        Y = np.column_stack([y, 0.5 * y + 0.1 * rng.standard_normal(len(y))])
        fits = fit_multitask_lasso(X, Y, 0.2)
        support = [fit.coefficients != 0 for fit in fits]
        np.testing.assert_array_equal(support[0], support[1])
        assert all(fit.kind is FitKind.MULTITASK_ROW for fit in fits)

    def test_negative_lambda(self):
        X, y = linear_data()
        with pytest.raises(ConfigError) as exc:
            fit_lasso(X, y, -0.1)
        assert exc.value.field == "lambda"

    def test_config_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            LassoConfig.from_dict({"alpha": 1.0})


class TestMultiLabel:
    """Tests for per-label models and the protected encoding."""

    def test_unaware_model(self, planted):
        model = fit_multilabel(planted)
        assert model.column_names == ("x1", "x2", "x3")
        assert model.predict_proba(planted).shape == (planted.n_rows, 2)
        assert set(np.unique(model.predict(planted))) <= {0.0, 1.0}

    def test_aware_model_appends_indicators(self, planted):
        model = fit_multilabel(planted, include_protected=True)
        assert model.column_names[3:] == ("group=b", "region=south")

    def test_encoding_drops_reference_level(self, tiny_dataset):
        D, encoding = encode_protected(tiny_dataset, ["age"])
        assert encoding.reference == ("old",)
        assert encoding.columns == ("age=young", "age=unspecified")
        np.testing.assert_array_equal(D[:, 1], [0, 0, 0, 0, 0, 0, 0, 1])

    def test_parallel_fits_match_serial(self, planted):
        serial = fit_multilabel(planted, n_jobs=1)
        parallel = fit_multilabel(planted, n_jobs=2)
        np.testing.assert_array_equal(
            serial.predict_proba(planted), parallel.predict_proba(planted)
        )

    def test_save_and_load(self, planted, tmp_path):
        model = fit_multilabel(planted, include_protected=True)
        path = tmp_path / "model.json"
        model.save(path)
        loaded = MultiLabelModel.load(path)
        np.testing.assert_allclose(loaded.predict_proba(planted), model.predict_proba(planted))

    def test_bad_model_version(self, planted):
        doc = fit_multilabel(planted).to_dict()
        doc["model_version"] = "0.1"
        with pytest.raises(ConfigError):
            MultiLabelModel.from_dict(doc)

    def test_rejects_regression_data(self, make_dataset):
        ds = make_dataset(np.arange(6.0), np.arange(6.0), {"g": list("ababab")},
                          task_kind=TaskKind.SPENDING)
        with pytest.raises(LearnerError):
            fit_multilabel(ds)

    def test_multitask_regression(self, make_dataset):
        X, y = linear_data()
        ds = make_dataset(X, np.column_stack([y, -y]), {"g": ["a", "b"] * 100},
                          task_kind=TaskKind.SPENDING)
        model = fit_multitask_regression(ds, 0.01)
        values = model.predict_values(ds)
        assert values.shape == (200, 2)
        assert np.corrcoef(values[:, 0], y)[0, 1] > 0.99

    def test_multitask_rejects_classification(self, planted):
        with pytest.raises(LearnerError):
            fit_multitask_regression(planted, 0.1)
