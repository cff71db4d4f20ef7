"""
Proxy, decomposition and mitigation runs.

Each run uses the same seeded train/held-out split as the audit pipeline, so
results line up with the audit report built from the same options.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import AuditError, ConfigError, DataValidationError, LearnerError
from fairaudit.core.models import UNSPECIFIED, Dataset, MetricId
from fairaudit.core.serialization import dump_json
from fairaudit.dataset.intersections import derive_intersections
from fairaudit.dataset.splitting import split
from fairaudit.learners.multilabel import (
    MultiLabelModel,
    encode_protected,
    fit_multilabel,
    fit_multitask_regression,
)
from fairaudit.metrics.gaps import disparity
from fairaudit.metrics.tables import metric_tables
from fairaudit.mitigation.moments import ConstraintKind
from fairaudit.mitigation.reduction import (
    EGConfig,
    MixtureKind,
    RandomizedClassifier,
    exponentiated_gradient,
)
from fairaudit.mitigation.thresholds import (
    Criterion,
    ThresholdPolicy,
    apply_thresholds,
    fit_thresholds,
)
from fairaudit.mitigation.tradeoff import (
    TradeoffPoint,
    feasible_envelope,
    pareto_sweep,
    threshold_sweep,
    write_sweep_csv,
)
from fairaudit.orchestrator.manager import AuditManager
from fairaudit.orchestrator.options import AuditOptions
from fairaudit.orchestrator.report import AuditReport
from fairaudit.statistics.decomposition import (
    BiasKind,
    DecompositionFit,
    bias_decomposition,
    cell_decomposition,
    dataset_residual_regression,
    instance_bias,
)
from fairaudit.statistics.two_sample import (
    MulticlassTestResult,
    TwoSampleConfig,
    TwoSampleResult,
    multiclass_attr_test,
    two_sample_test,
)
from fairaudit.statistics.vcov import VcovReport, coef_vcov_report


logger = logging.getLogger(__name__)


def _attrs(ds: Dataset, options: AuditOptions) -> tuple[str, ...]:
    return options.attrs or ds.protected_names


def _label(ds: Dataset, options: AuditOptions) -> str:
    return ds.label_names[ds.label_index(options.label if options.label is not None else 0)]


def _baseline(train: Dataset, options: AuditOptions) -> tuple[MultiLabelModel, str]:
    if train.task_kind.is_classification:
        model = fit_multilabel(train, options.learner, options.include_protected, options.n_jobs)
        return model, f"logistic(aware={options.include_protected})"
    model = fit_multitask_regression(
        train, options.lasso_lambda, options.lasso, options.include_protected
    )
    aware = options.include_protected
    return model, f"multitask_lasso(lambda={options.lasso_lambda}, aware={aware})"


# Proxy detection


@dataclass(frozen=True, eq=False)
class ProxyRun:
    """Two-sample test of one protected attribute against the features."""
    attribute: str
    levels: tuple[str, ...]
    n_rows: int                          # rows with a specified level
    result: TwoSampleResult | MulticlassTestResult

    @property
    def p_values(self) -> dict[str, float]:
        if isinstance(self.result, TwoSampleResult):
            return {self.levels[1]: self.result.p_value}
        return dict(zip(self.levels, self.result.adjusted_p_values.tolist(), strict=True))

    def to_dict(self) -> dict[str, Any]:
        return {
            "attribute": self.attribute,
            "levels": list(self.levels),
            "n_rows": self.n_rows,
            "kind": "binary" if isinstance(self.result, TwoSampleResult) else "level_vs_rest",
            "result": self.result,
        }


def run_proxy(ds: Dataset, attribute: str, options: AuditOptions) -> ProxyRun:
    """
    Test whether the features predict ``attribute``.

    Rows with an unspecified level are left out. Two observed levels give
    one binary test (second level = 1); more give level-vs-rest tests with
    Holm-adjusted p-values.
    """
    levels = tuple(v for v in ds.observed_levels(attribute) if v != UNSPECIFIED)
    if len(levels) < 2:
        raise DataValidationError(
            f"Attribute '{attribute}' needs at least 2 specified levels, got {list(levels)}",
            field=attribute,
        )
    values = ds.protected_values(attribute)
    rows = np.flatnonzero(values != UNSPECIFIED)
    X, values = ds.features[rows], values[rows]
    cfg = TwoSampleConfig(
        n_permutations=options.permutations,
        holdout_fraction=options.holdout_fraction,
        statistic=options.statistic,
        n_jobs=options.n_jobs,
    )
    result: TwoSampleResult | MulticlassTestResult
    if len(levels) == 2:
        indicator = (values == levels[1]).astype(float)
        result = two_sample_test(X, indicator, cfg, options.seed, ds.feature_names)
    else:
        result = multiclass_attr_test(
            X, values, cfg, options.seed, ds.feature_names, levels, attribute
        )
    return ProxyRun(attribute=attribute, levels=levels, n_rows=len(rows), result=result)


# Bias decomposition


class DecompositionMode(Enum):
    INSTANCE = "instance"    # per-row bias on [features | predictions | demographics]
    RESIDUAL = "residual"    # per-row residual on demographics
    CELL = "cell"            # metric cells on label and demographic indicators


@dataclass(frozen=True, eq=False)
class DecompositionRun:
    mode: DecompositionMode
    bias_kind: BiasKind | None
    label: str | None
    metric_id: MetricId | None
    model_id: str
    seed: int
    dropped_columns: tuple[str, ...]
    fit: DecompositionFit
    vcov: VcovReport

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "bias": self.bias_kind.value if self.bias_kind is not None else None,
            "label": self.label,
            "metric": self.metric_id.value if self.metric_id is not None else None,
            "model_id": self.model_id,
            "seed": self.seed,
            "dropped_columns": list(self.dropped_columns),
            "fit": self.fit,
            "covariance": self.vcov,
        }


def _decision_columns(
    model: MultiLabelModel,
    test: Dataset,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """(predictions entering the design, real-valued outputs for residuals)."""
    if test.task_kind.is_classification:
        probas = model.predict_proba(test)
        return (probas >= 0.5).astype(float), probas
    values = model.predict_values(test)
    return values, values


def run_decomposition(
    ds: Dataset,
    options: AuditOptions,
    mode: DecompositionMode | str = DecompositionMode.INSTANCE,
    bias_kind: BiasKind | str | None = None,
) -> DecompositionRun:
    """
    Fit the baseline on the train split and decompose its held-out bias.

    Instance mode needs an explicit bias kind. Prediction columns that are
    constant on the held-out rows are collinear with the intercept and are
    dropped with a warning.
    """
    try:
        mode = DecompositionMode(mode)
        kind = BiasKind(bias_kind) if bias_kind is not None else None
    except ValueError as e:
        raise ConfigError(str(e), field="mode") from None
    if mode is DecompositionMode.INSTANCE and kind is None:
        raise ConfigError("Instance decomposition needs a bias kind", field="bias")

    train, test = split(ds, options.holdout_fraction, options.seed)
    model, model_id = _baseline(train, options)
    decisions, outputs = _decision_columns(model, test)
    attrs = _attrs(ds, options)
    label = _label(ds, options)
    k = ds.label_index(label)
    dropped: tuple[str, ...] = ()
    metric_id = None

    match mode:
        case DecompositionMode.INSTANCE:
            assert kind is not None
            constant = np.ptp(decisions, axis=0) == 0
            dropped = tuple(f"pred:{name}" for name, c in zip(ds.label_names, constant,
                                                               strict=True) if c)
            if dropped:
                logger.warning(f"Dropping constant prediction columns {list(dropped)}")
            D, encoding = encode_protected(test, attrs)
            fit = bias_decomposition(
                instance_bias(test.targets[:, k], decisions[:, k], kind),
                test.features,
                decisions[:, ~constant],
                D,
                ds.feature_names,
                [name for name, c in zip(ds.label_names, constant, strict=True) if not c],
                encoding.columns,
            )
        case DecompositionMode.RESIDUAL:
            fit = dataset_residual_regression(test, outputs, k, attrs)
        case DecompositionMode.CELL:
            metric_id = options.tensor_metric_id(ds.task_kind)
            idx = derive_intersections(test, attrs, options.min_support)
            table = metric_tables(
                test.targets, decisions, idx, [metric_id], ds.task_kind, ds.label_names
            )[metric_id]
            fit = cell_decomposition(table, attrs, options.include_flagged)

    return DecompositionRun(
        mode=mode,
        bias_kind=kind,
        label=None if mode is DecompositionMode.CELL else label,
        metric_id=metric_id,
        model_id=model_id,
        seed=options.seed,
        dropped_columns=dropped,
        fit=fit,
        vcov=coef_vcov_report(fit),
    )


# Mitigation


class Strategy(Enum):
    THRESHOLDS = "thresholds"    # per-group decision thresholds on the baseline's scores
    EGR = "egr"                  # exponentiated-gradient reduction, one mixture per label


def constrained_metric(criterion: Criterion) -> MetricId:
    if criterion is Criterion.EQUAL_TPR:
        return MetricId.RECALL_TPR
    return MetricId.SELECTION_RATE


def constraint_kind(criterion: Criterion) -> ConstraintKind:
    if criterion is Criterion.EQUAL_TPR:
        return ConstraintKind.EQUALIZED_ODDS
    return ConstraintKind.DEMOGRAPHIC_PARITY


@dataclass(frozen=True, eq=False)
class MitigationRun:
    strategy: Strategy
    metric_id: MetricId                               # the constrained metric
    before: AuditReport
    after: AuditReport
    disparities: dict[str, dict[str, float | None]]   # label -> {train,test}_{before,after}
    agreement: float                                  # held-out decisions left unchanged
    points: Sequence[TradeoffPoint]
    policy: ThresholdPolicy | None = None
    classifiers: tuple[RandomizedClassifier, ...] = field(default_factory=tuple)

    @property
    def exit_code(self) -> int:
        return self.after.exit_code

    def to_dict(self) -> dict[str, Any]:
        return {
            "strategy": self.strategy.value,
            "metric": self.metric_id.value,
            "disparities": self.disparities,
            "decision_agreement": self.agreement,
            "tradeoff": {
                "points": list(self.points),
                "envelope": [
                    {"knob": knob, "violation": violation}
                    for knob, violation in feasible_envelope(self.points)
                ] if self.points else [],
            },
            "policy": self.policy,
            "classifiers": list(self.classifiers),
        }

    def write(self, out_dir: str | Path) -> None:
        """before/ and after/ report bundles, mitigation.json and sweep.csv."""
        out = Path(out_dir)
        self.before.write(out / "before")
        self.after.write(out / "after")
        dump_json(self, out / "mitigation.json")
        if self.points:
            write_sweep_csv(self.points, out / "sweep.csv")


def _constrained_disparity(
    part: Dataset,
    decisions: NDArray[np.float64],
    attrs: Sequence[str],
    metric_id: MetricId,
    options: AuditOptions,
) -> dict[str, float | None]:
    idx = derive_intersections(part, attrs, options.min_support)
    table = metric_tables(
        part.targets, decisions, idx, [metric_id], part.task_kind, part.label_names
    )[metric_id]
    values: dict[str, float | None] = {}
    for label in part.label_names:
        try:
            values[label] = disparity(table, label, options.include_flagged).value
        except AuditError as e:
            logger.debug(f"Disparity of {metric_id.value} for {label} undefined: {e.message}")
            values[label] = None
    return values


def run_mitigation(
    ds: Dataset,
    options: AuditOptions,
    strategy: Strategy | str = Strategy.THRESHOLDS,
) -> MitigationRun:
    """
    Mitigate the baseline and audit it before and after on the held-out rows.

    Both reports come from the same split, attribute set and options. The
    trade-off sweep covers ``options.epsilons`` for the configured label:
    as constraint tolerances for the reduction, as threshold tolerances for
    post-processing.
    """
    try:
        strategy = Strategy(strategy)
    except ValueError:
        raise ConfigError(f"Unknown strategy '{strategy}'", field="strategy") from None
    if not ds.task_kind.is_classification:
        raise LearnerError("Mitigation needs a classification dataset")

    attrs = _attrs(ds, options)
    train, test = split(ds, options.holdout_fraction, options.seed)
    model, model_id = _baseline(train, options)
    train_probas, test_probas = model.predict_proba(train), model.predict_proba(test)
    before = {
        "train": (train_probas >= 0.5).astype(float),
        "test": (test_probas >= 0.5).astype(float),
    }

    policy, classifiers = None, ()
    if strategy is Strategy.THRESHOLDS:
        train_idx = derive_intersections(train, attrs, options.min_support)
        test_idx = derive_intersections(test, attrs, options.min_support)
        policy = fit_thresholds(
            train_probas, train.targets, train_idx, options.criterion, options.tolerance,
            ds.label_names,
        )
        after = {
            "train": apply_thresholds(train_probas, train_idx, policy),
            "test": apply_thresholds(test_probas, test_idx, policy),
        }
        after_id = f"{model_id}+thresholds({options.criterion.value}, tol={options.tolerance})"
    else:
        cfg = EGConfig(
            constraint=constraint_kind(options.criterion),
            epsilon=options.epsilon,
            mixture=MixtureKind.LINPROG,
            learner=options.learner,
        )
        classifiers = tuple(
            exponentiated_gradient(train, k, attrs, cfg) for k in range(ds.n_labels)
        )
        after = {
            name: np.column_stack([clf.predict(part.features) for clf in classifiers])
            for name, part in (("train", train), ("test", test))
        }
        after_id = f"egr({cfg.constraint.value}, epsilon={options.epsilon})"

    metric_id = constrained_metric(options.criterion)
    parts = {"train": train, "test": test}
    disparities: dict[str, dict[str, float | None]] = {label: {} for label in ds.label_names}
    for stage, decisions in (("before", before), ("after", after)):
        for part_name, part in parts.items():
            values = _constrained_disparity(
                part, decisions[part_name], attrs, metric_id, options
            )
            for label, value in values.items():
                disparities[label][f"{part_name}_{stage}"] = value

    reports = []
    for decisions, probas, report_id in (
        (before["test"], test_probas, model_id),
        (after["test"], None, after_id),
    ):
        manager = AuditManager(options)
        reports.append(manager.run_predictions(
            ds, decisions, probas, model_id=report_id, evaluation=test
        ))

    label = _label(ds, options)
    if strategy is Strategy.EGR:
        points = pareto_sweep(
            ds, label, attrs, options.epsilons,
            EGConfig(constraint=constraint_kind(options.criterion), learner=options.learner),
            options.seed, options.holdout_fraction, options.n_jobs,
        )
    else:
        points = threshold_sweep(
            ds, label, attrs, options.epsilons, options.criterion, options.learner,
            options.seed, options.holdout_fraction, options.n_jobs,
        )

    agreement = float(np.mean(before["test"] == after["test"]))
    logger.info(
        f"Mitigation {strategy.value}: {agreement:.1%} of held-out decisions unchanged"
    )
    return MitigationRun(
        strategy=strategy,
        metric_id=metric_id,
        before=reports[0],
        after=reports[1],
        disparities=disparities,
        agreement=agreement,
        points=points,
        policy=policy,
        classifiers=classifiers,
    )
