"""Tests for confusion counts, group metrics, gaps, disparities and calibration."""

import numpy as np
import pytest

from fairaudit.core.errors import (
    ConfigError,
    DataValidationError,
    InsufficientGroupsError,
    ShapeMismatchError,
    UndefinedCellError,
)
from fairaudit.core.models import CellStatus, MetricId, TaskKind
from fairaudit.dataset.intersections import derive_intersections
from fairaudit.metrics import (
    GapMode,
    calibration_by_group,
    classification_metric,
    confusion,
    disparate_impact,
    disparity,
    equalized_odds_difference,
    fairness_gap,
    metric_tables,
    regression_group_metrics,
)


@pytest.fixture
def gender_counts(tiny_dataset, tiny_predictions):
    idx = derive_intersections(tiny_dataset, ["gender"], min_support=2)
    return confusion(tiny_dataset.targets, tiny_predictions, idx, tiny_dataset.label_names)


class TestConfusion:
    """Tests for per-group confusion counts."""

    def test_hand_counts(self, gender_counts):
        np.testing.assert_array_equal(gender_counts.tp, [[1, 2], [1, 3]])
        np.testing.assert_array_equal(gender_counts.fp, [[1, 1], [0, 0]])
        np.testing.assert_array_equal(gender_counts.tn, [[1, 1], [2, 1]])
        np.testing.assert_array_equal(gender_counts.fn, [[1, 0], [1, 0]])

    def test_counts_add_up_over_groups(self, tiny_dataset, tiny_predictions):
        idx = derive_intersections(tiny_dataset, ["gender", "age"])
        counts = confusion(tiny_dataset.targets, tiny_predictions, idx)
        pooled = counts.pooled()
        assert pooled.sizes.tolist() == [[8], [8]]
        assert pooled.tp[0, 0] == 3
        assert counts.label_names == ("y1", "y2")

    def test_rejects_non_binary_predictions(self, tiny_dataset):
        idx = derive_intersections(tiny_dataset, ["gender"])
        with pytest.raises(DataValidationError) as exc:
            confusion(tiny_dataset.targets, np.full((8, 2), 0.7), idx)
        assert exc.value.field == "preds"

    def test_rejects_misaligned_rows(self, tiny_dataset, tiny_predictions):
        idx = derive_intersections(tiny_dataset, ["gender"])
        with pytest.raises(ShapeMismatchError):
            confusion(tiny_dataset.targets, tiny_predictions[:5], idx)


class TestClassificationMetrics:
    """Tests for ratio metrics and their undefined cells."""

    @pytest.mark.parametrize(
        ("metric", "expected"),
        [
            ("selection_rate", [[0.5, 0.75], [0.25, 0.75]]),
            ("accuracy", [[0.5, 0.75], [0.75, 1.0]]),
            ("precision", [[0.5, 2 / 3], [1.0, 1.0]]),
            ("recall", [[0.5, 1.0], [0.5, 1.0]]),
            ("fpr", [[0.5, 0.5], [0.0, 0.0]]),
            ("fnr", [[0.5, 0.0], [0.5, 0.0]]),
            ("f1", [[0.5, 0.8], [2 / 3, 1.0]]),
            ("overall_error", [[0.5, 0.25], [0.25, 0.0]]),
        ],
    )
    def test_hand_values(self, gender_counts, metric, expected):
        table = classification_metric(gender_counts, metric)
        np.testing.assert_allclose(table.values, expected)

    def test_zero_denominator_is_undefined(self, tiny_dataset, tiny_predictions):
        idx = derive_intersections(tiny_dataset, ["gender", "age"], min_support=2)
        counts = confusion(tiny_dataset.targets, tiny_predictions, idx, tiny_dataset.label_names)
        table = classification_metric(counts, MetricId.FPR)
        m_old = idx.index_of("m|old")
        assert np.isnan(table.values[0, m_old])
        assert table.status[0, m_old] is CellStatus.ZERO_DENOMINATOR
        assert table.value("a", m_old) is None

    def test_small_groups_keep_values_but_are_flagged(self, tiny_dataset, tiny_predictions):
        idx = derive_intersections(tiny_dataset, ["gender", "age"], min_support=2)
        counts = confusion(tiny_dataset.targets, tiny_predictions, idx)
        table = classification_metric(counts, MetricId.SELECTION_RATE)
        m_old = idx.index_of("m|old")
        assert table.values[0, m_old] == 1.0
        assert table.status[0, m_old] is CellStatus.BELOW_MIN_SUPPORT

    def test_f1_undefined_without_true_positives(self, make_dataset):
        ds = make_dataset(np.arange(4.0), [1, 0, 1, 0], {"g": list("aabb")})
        idx = derive_intersections(ds, ["g"], min_support=0)
        counts = confusion(ds.targets, np.array([0.0, 1.0, 1.0, 0.0]), idx)
        table = classification_metric(counts, MetricId.F1)
        assert np.isnan(table.values[0, 0])
        assert table.values[0, 1] == 1.0

    def test_regression_metric_rejected_for_adoption(self, tiny_dataset, tiny_predictions):
        idx = derive_intersections(tiny_dataset, ["gender"])
        with pytest.raises(DataValidationError):
            metric_tables(
                tiny_dataset.targets, tiny_predictions, idx, [MetricId.MSE], TaskKind.ADOPTION
            )

    def test_metric_tables_keep_requested_order(self, tiny_dataset, tiny_predictions):
        idx = derive_intersections(tiny_dataset, ["gender"])
        metrics = [MetricId.F1, MetricId.SELECTION_RATE]
        tables = metric_tables(
            tiny_dataset.targets, tiny_predictions, idx, metrics, TaskKind.ADOPTION
        )
        assert list(tables) == metrics

    def test_long_frame(self, gender_counts):
        frame = classification_metric(gender_counts, MetricId.SELECTION_RATE).to_frame()
        assert len(frame) == 4
        assert set(frame.status) == {"ok"}


class TestRegressionMetrics:
    """Tests for per-group regression metrics."""

    def test_values_and_undefined_r2(self, make_dataset):
        ds = make_dataset(np.arange(5.0), [1.0, 3.0, 2.0, 2.0, 2.0], {"g": list("aabbb")},
                          task_kind=TaskKind.SPENDING)
        idx = derive_intersections(ds, ["g"], min_support=0)
        tables = regression_group_metrics(ds.targets, np.full(5, 2.0), idx)
        np.testing.assert_allclose(tables[MetricId.MSE].values, [[1.0, 0.0]])
        np.testing.assert_allclose(tables[MetricId.MAE].values, [[1.0, 0.0]])
        assert tables[MetricId.R2].values[0, 0] == pytest.approx(0.0)
        assert np.isnan(tables[MetricId.R2].values[0, 1])
        assert tables[MetricId.R2].status[0, 1] is CellStatus.ZERO_DENOMINATOR

    def test_negative_r2_allowed(self, make_dataset):
        ds = make_dataset(np.arange(4.0), [0.0, 1.0, 0.0, 1.0], {"g": list("aaaa")},
                          task_kind=TaskKind.SPENDING)
        idx = derive_intersections(ds, ["g"], min_support=0)
        tables = regression_group_metrics(ds.targets, np.array([1.0, 0.0, 1.0, 0.0]), idx)
        assert tables[MetricId.R2].values[0, 0] == pytest.approx(-3.0)


class TestGaps:
    """Tests for reference gaps and disparities."""

    def test_difference_against_max(self, gender_counts):
        table = classification_metric(gender_counts, MetricId.SELECTION_RATE)
        gap = fairness_gap(table, "a")
        assert gap.reference == "max"
        np.testing.assert_allclose(gap.values, [-0.25, 0.0])

    def test_ratio_against_named_group(self, gender_counts):
        table = classification_metric(gender_counts, MetricId.SELECTION_RATE)
        gap = fairness_gap(table, "a", GapMode.RATIO, reference="f")
        np.testing.assert_allclose(gap.values, [1.0, 1.5])

    def test_ratio_with_zero_reference(self, gender_counts):
        table = classification_metric(gender_counts, MetricId.FPR)
        gap = fairness_gap(table, "b", "ratio", reference=("f",))
        assert np.isnan(gap.values).all()
        assert all(s is CellStatus.ZERO_DENOMINATOR for s in gap.status)

    def test_undefined_reference(self, tiny_dataset, tiny_predictions):
        idx = derive_intersections(tiny_dataset, ["gender", "age"], min_support=0)
        counts = confusion(tiny_dataset.targets, tiny_predictions, idx, tiny_dataset.label_names)
        table = classification_metric(counts, MetricId.FPR)
        with pytest.raises(UndefinedCellError):
            fairness_gap(table, "a", reference="m|old")

    def test_unknown_reference(self, gender_counts):
        table = classification_metric(gender_counts, MetricId.FPR)
        with pytest.raises(DataValidationError):
            fairness_gap(table, "a", reference="x")

    def test_disparity_range(self, gender_counts):
        table = classification_metric(gender_counts, MetricId.SELECTION_RATE)
        result = disparity(table, "a")
        assert result.value == pytest.approx(0.25)
        assert result.argmax == ("m",)
        assert result.argmin == ("f",)
        assert result.n_groups == 2

    def test_disparity_ties_go_to_first_group(self, gender_counts):
        result = disparity(classification_metric(gender_counts, MetricId.FPR), "a")
        assert result.value == 0.0
        assert result.argmax == result.argmin == ("f",)

    def test_disparity_skips_flagged_groups(self, tiny_dataset, tiny_predictions):
        idx = derive_intersections(tiny_dataset, ["gender"], min_support=5)
        counts = confusion(tiny_dataset.targets, tiny_predictions, idx)
        table = classification_metric(counts, MetricId.SELECTION_RATE)
        with pytest.raises(InsufficientGroupsError):
            disparity(table, 0)
        assert disparity(table, 0, include_flagged=True).value == pytest.approx(0.25)

    def test_disparity_lists_excluded_groups(self, tiny_dataset, tiny_predictions):
        idx = derive_intersections(tiny_dataset, ["gender", "age"], min_support=2)
        counts = confusion(tiny_dataset.targets, tiny_predictions, idx)
        result = disparity(classification_metric(counts, MetricId.SELECTION_RATE), 0)
        assert result.excluded == (("m", "old"), ("m", "unspecified"))
        assert result.n_groups == 3

    def test_equalized_odds_difference(self, gender_counts):
        assert equalized_odds_difference(gender_counts, "a") == pytest.approx(0.5)

    def test_disparate_impact(self, gender_counts):
        assert disparate_impact(gender_counts, "a") == pytest.approx(2 / 3)
        assert disparate_impact(gender_counts, "b") == pytest.approx(1 / 3)


class TestCalibration:
    """Tests for per-group calibration bins."""

    def test_bins_and_rates(self, make_dataset):
        ds = make_dataset(np.arange(4.0), [0, 1, 1, 1], {"g": list("aaaa")})
        idx = derive_intersections(ds, ["g"], min_support=0)
        table = calibration_by_group(ds.targets, np.array([0.05, 0.15, 1.0, 0.95]), idx)
        assert table.n_bins == 10
        assert table.counts[0, 0].tolist() == [1, 1, 0, 0, 0, 0, 0, 0, 0, 2]
        assert table.mean_predicted[0, 0, 9] == pytest.approx(0.975)
        assert table.observed_rate[0, 0, 0] == 0.0
        assert np.isnan(table.observed_rate[0, 0, 4])

    def test_rejects_out_of_range_probabilities(self, tiny_dataset):
        idx = derive_intersections(tiny_dataset, ["gender"])
        with pytest.raises(DataValidationError):
            calibration_by_group(tiny_dataset.targets, np.full((8, 2), 1.2), idx)

    def test_rejects_zero_bins(self, tiny_dataset):
        idx = derive_intersections(tiny_dataset, ["gender"])
        with pytest.raises(ConfigError):
            calibration_by_group(tiny_dataset.targets, np.full((8, 2), 0.5), idx, n_bins=0)


def recount(y, y_hat, keys, group, k):
    """Confusion counts of label k over the rows whose key equals ``group``."""
    tp = fp = tn = fn = 0
    for i, key in enumerate(keys):
        if key != group:
            continue
        truth, decision = y[i, k], y_hat[i, k]
        if truth == 1 and decision == 1:
            tp += 1
        elif truth == 0 and decision == 1:
            fp += 1
        elif truth == 0:
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn


def ratio(num, den):
    return num / den if den > 0 else np.nan


def naive_metric(metric, tp, fp, tn, fn):
    n = tp + fp + tn + fn
    return {
        MetricId.SELECTION_RATE: ratio(tp + fp, n),
        MetricId.ACCURACY: ratio(tp + tn, n),
        MetricId.PRECISION: ratio(tp, tp + fp),
        MetricId.PPV: ratio(tp, tp + fp),
        MetricId.RECALL_TPR: ratio(tp, tp + fn),
        MetricId.FPR: ratio(fp, fp + tn),
        MetricId.FNR: ratio(fn, tp + fn),
        MetricId.TNR: ratio(tn, fp + tn),
        MetricId.OVERALL_ERROR: ratio(fp + fn, n),
        MetricId.NPV: ratio(tn, tn + fn),
        MetricId.F1: ratio(2 * tp, 2 * tp + fp + fn) if tp > 0 else np.nan,
    }[metric]


def random_protected(rng, n):
    return {
        "p": [f"p{v}" for v in rng.integers(0, 3, n)],
        "q": [f"q{v}" for v in rng.integers(0, 2, n)],
    }


class TestRandomInstances:
    """Metrics on seeded random datasets against a per-row recount."""

    def test_classification_metrics_match_recount(self, make_dataset):
        rng = np.random.default_rng(7)
        classification = [m for m in MetricId if not m.is_regression]
        for _ in range(100):
            n, K = int(rng.integers(5, 201)), int(rng.integers(1, 4))
            y = rng.integers(0, 2, (n, K)).astype(float)
            y_hat = rng.integers(0, 2, (n, K)).astype(float)
            protected = random_protected(rng, n)
            ds = make_dataset(rng.normal(size=(n, 2)), y, protected)
            idx = derive_intersections(ds, ["p", "q"], min_support=0)
            assert idx.n_groups <= 6
            counts = confusion(ds.targets, y_hat, idx)
            keys = list(zip(protected["p"], protected["q"]))

            for metric in classification:
                table = classification_metric(counts, metric)
                for g, group in enumerate(idx.groups):
                    for k in range(K):
                        expected = naive_metric(metric, *recount(y, y_hat, keys, group, k))
                        got = table.values[k, g]
                        if np.isnan(expected):
                            assert np.isnan(got)
                            assert table.status[k, g] is CellStatus.ZERO_DENOMINATOR
                        else:
                            assert got == expected

    def test_regression_metrics_match_loops(self, make_dataset):
        rng = np.random.default_rng(11)
        for _ in range(100):
            n, K = int(rng.integers(5, 201)), int(rng.integers(1, 4))
            # integer targets make constant groups, and so undefined r2, common
            y = rng.integers(0, 3, (n, K)).astype(float)
            y_hat = y + rng.normal(size=(n, K))
            protected = random_protected(rng, n)
            ds = make_dataset(rng.normal(size=(n, 2)), y, protected, task_kind=TaskKind.SPENDING)
            idx = derive_intersections(ds, ["p", "q"], min_support=0)
            tables = regression_group_metrics(ds.targets, y_hat, idx)
            keys = list(zip(protected["p"], protected["q"]))

            expected = {m: np.full((K, idx.n_groups), np.nan) for m in tables}
            for g, group in enumerate(idx.groups):
                rows = [i for i, key in enumerate(keys) if key == group]
                for k in range(K):
                    truth = [y[i, k] for i in rows]
                    residual = [y[i, k] - y_hat[i, k] for i in rows]
                    m = len(rows)
                    mean_y = sum(truth) / m
                    mean_r = sum(residual) / m
                    rss = sum(r * r for r in residual)
                    tss = sum((t - mean_y) ** 2 for t in truth)
                    var_r = sum((r - mean_r) ** 2 for r in residual) / m
                    expected[MetricId.MSE][k, g] = rss / m
                    expected[MetricId.MAE][k, g] = sum(abs(r) for r in residual) / m
                    expected[MetricId.RMSE][k, g] = (rss / m) ** 0.5
                    if tss > 0:
                        expected[MetricId.R2][k, g] = 1.0 - rss / tss
                        expected[MetricId.EXPLAINED_VARIANCE][k, g] = 1.0 - var_r / (tss / m)

            for metric, table in tables.items():
                np.testing.assert_allclose(
                    table.values, expected[metric], rtol=1e-12, atol=1e-12, equal_nan=True
                )
