"""
Audit orchestration and stage management.

This module runs one audit as a sequence of stages: load the dataset, train
the baseline learner, measure per-group metrics and disparities, build the
fairness tensor, and assemble the report. Stage changes are logged and pushed
to registered observers.
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from fairaudit.core.errors import AuditError, LearnerError
from fairaudit.core.interfaces import AuditObserver
from fairaudit.core.models import (
    AuditStage,
    Dataset,
    FairnessTensor,
    IntersectionIndex,
    MetricId,
    MetricTable,
    WeightMatrix,
    group_name,
)
from fairaudit.dataset.intersections import derive_intersections
from fairaudit.dataset.quality import QualityReport, data_quality_report
from fairaudit.dataset.splitting import split
from fairaudit.learners.multilabel import (
    MultiLabelModel,
    fit_multilabel,
    fit_multitask_regression,
)
from fairaudit.metrics.calibration import CalibrationTable, calibration_by_group
from fairaudit.metrics.confusion import confusion
from fairaudit.metrics.gaps import (
    Disparity,
    disparate_impact,
    disparity,
    equalized_odds_difference,
)
from fairaudit.metrics.tables import metric_tables
from fairaudit.orchestrator.options import AuditOptions
from fairaudit.orchestrator.report import AuditReport
from fairaudit.tensor.aggregate import AggregateResult, aggregate
from fairaudit.tensor.build import MetricGrid, apply_weights, build_tensor
from fairaudit.tensor.weights import load_weight_matrix


UTC = timezone.utc

logger = logging.getLogger(__name__)


def _now() -> str:
    return datetime.now(UTC).isoformat()


@dataclass
class AuditContext:
    """Current audit data."""
    # Data
    dataset: Dataset | None = None
    train: Dataset | None = None
    evaluation: Dataset | None = None        # rows the metrics are measured on

    # Model
    model: MultiLabelModel | None = None
    model_id: str = "none"
    predictions: NDArray[np.float64] | None = None
    probabilities: NDArray[np.float64] | None = None

    # Measurement
    idx: IntersectionIndex | None = None
    quality: QualityReport | None = None
    tables: dict[MetricId, MetricTable] = field(default_factory=dict)
    disparities: list[Disparity] = field(default_factory=list)
    skipped: list[dict[str, str]] = field(default_factory=list)
    label_summaries: dict[str, dict[str, float | None]] = field(default_factory=dict)
    calibration: CalibrationTable | None = None

    # Tensor
    tensor: FairnessTensor | None = None
    aggregates: list[AggregateResult] = field(default_factory=list)
    weighted_aggregates: list[AggregateResult] | None = None

    timestamps: dict[str, str] = field(default_factory=dict)


class AuditManager:
    """
    Orchestrates the load -> train -> measure -> tensorize -> report pipeline.

    Each stage requires the previous one; ``run`` performs all of them and
    moves to ERROR, notifying observers, when any stage raises AuditError.
    """

    def __init__(self, options: AuditOptions | None = None) -> None:
        self._options = options or AuditOptions()
        self._state = AuditStage.CREATED
        self._context = AuditContext()
        self._observers: list[AuditObserver] = []

    @property
    def state(self) -> AuditStage:
        return self._state

    @property
    def context(self) -> AuditContext:
        return self._context

    @property
    def options(self) -> AuditOptions:
        return self._options

    # Observer pattern

    def add_observer(self, observer: AuditObserver) -> None:
        """Add an observer for stage events."""
        if observer not in self._observers:
            self._observers.append(observer)

    def remove_observer(self, observer: AuditObserver) -> None:
        if observer in self._observers:
            self._observers.remove(observer)

    def _notify_stage(self, stage: AuditStage) -> None:
        for observer in self._observers:
            try:
                observer.on_stage_changed(stage)
            except Exception as e:
                logger.error(f"Observer error: {e}")

    def _notify_error(self, error: AuditError) -> None:
        for observer in self._observers:
            try:
                observer.on_error(error)
            except Exception as e:
                logger.error(f"Observer error: {e}")

    # State transitions

    def _set_state(self, new_state: AuditStage) -> None:
        if new_state != self._state:
            logger.info(f"Audit stage: {self._state.name} -> {new_state.name}")
            self._state = new_state
            self._context.timestamps[new_state.name.lower()] = _now()
            self._notify_stage(new_state)

    def _require(self, *stages: AuditStage) -> None:
        if self._state not in stages:
            raise AuditError(
                f"Stage {self._state.name} cannot run this step; "
                f"expected one of {[s.name for s in stages]}",
                field="stage",
            )

    @property
    def _attrs(self) -> tuple[str, ...]:
        ds = self._context.dataset
        assert ds is not None
        return self._options.attrs or ds.protected_names

    # Stages

    def load(self, ds: Dataset) -> None:
        """Start a new audit of ``ds``."""
        self._context = AuditContext(dataset=ds, timestamps={"started": _now()})
        self._state = AuditStage.CREATED
        for attr in self._options.attrs:
            ds.levels(attr)
        self._set_state(AuditStage.LOADED)

    def train(self) -> None:
        """Split by seed, fit the baseline learner on train and predict the held-out rows."""
        self._require(AuditStage.LOADED)
        ctx, opts = self._context, self._options
        assert ctx.dataset is not None
        train, test = split(ctx.dataset, opts.holdout_fraction, opts.seed)

        if ctx.dataset.task_kind.is_classification:
            model = fit_multilabel(train, opts.learner, opts.include_protected, opts.n_jobs)
            ctx.probabilities = model.predict_proba(test)
            ctx.predictions = (ctx.probabilities >= 0.5).astype(float)
            ctx.model_id = f"logistic(aware={opts.include_protected})"
        else:
            model = fit_multitask_regression(
                train, opts.lasso_lambda, opts.lasso, opts.include_protected
            )
            ctx.predictions = model.predict_values(test)
            ctx.model_id = (
                f"multitask_lasso(lambda={opts.lasso_lambda}, aware={opts.include_protected})"
            )

        ctx.train, ctx.evaluation, ctx.model = train, test, model
        self._set_state(AuditStage.TRAINED)

    def use_predictions(
        self,
        predictions: NDArray[np.float64],
        probabilities: NDArray[np.float64] | None = None,
        model_id: str = "external",
        evaluation: Dataset | None = None,
    ) -> None:
        """Skip training and audit supplied predictions on ``evaluation`` (default: all rows)."""
        self._require(AuditStage.LOADED)
        ctx = self._context
        evaluation = evaluation or ctx.dataset
        assert evaluation is not None
        preds = np.asarray(predictions, dtype=float)
        if preds.shape != evaluation.targets.shape:
            raise LearnerError(
                f"Predictions have shape {preds.shape}, expected {evaluation.targets.shape}"
            )
        ctx.evaluation = evaluation
        ctx.predictions = preds
        ctx.probabilities = None if probabilities is None else np.asarray(probabilities, float)
        ctx.model_id = model_id
        self._set_state(AuditStage.TRAINED)

    def measure(self) -> None:
        """Metric tables, disparities, label summaries, calibration and data quality."""
        self._require(AuditStage.TRAINED)
        ctx, opts = self._context, self._options
        ds, evaluation = ctx.dataset, ctx.evaluation
        assert ds is not None and evaluation is not None and ctx.predictions is not None

        ctx.quality = data_quality_report(ds, self._attrs, opts.min_support)
        ctx.idx = derive_intersections(evaluation, self._attrs, opts.min_support)
        metric_ids = opts.metric_ids(ds.task_kind)
        ctx.tables = metric_tables(
            evaluation.targets,
            ctx.predictions,
            ctx.idx,
            metric_ids,
            ds.task_kind,
            ds.label_names,
        )

        ctx.disparities, ctx.skipped = [], []
        for metric_id, table in ctx.tables.items():
            for label in ds.label_names:
                try:
                    ctx.disparities.append(disparity(table, label, opts.include_flagged))
                except AuditError as e:
                    ctx.skipped.append(
                        {"metric": metric_id.value, "label": label, "reason": e.message}
                    )

        if ds.task_kind.is_classification:
            counts = confusion(evaluation.targets, ctx.predictions, ctx.idx, ds.label_names)
            ctx.label_summaries = {
                label: {
                    "equalized_odds_difference": _or_none(
                        equalized_odds_difference, counts, label, opts.include_flagged
                    ),
                    "disparate_impact": _or_none(
                        disparate_impact, counts, label, opts.include_flagged
                    ),
                }
                for label in ds.label_names
            }
            if ctx.probabilities is not None:
                ctx.calibration = calibration_by_group(
                    evaluation.targets,
                    ctx.probabilities,
                    ctx.idx,
                    opts.calibration_bins,
                    ds.label_names,
                )

        logger.info(
            f"Measured {len(ctx.tables)} metrics over {ctx.idx.n_groups} groups: "
            f"{len(ctx.disparities)} disparities, {len(ctx.skipped)} skipped"
        )
        self._set_state(AuditStage.MEASURED)

    def tensorize(self, weights: WeightMatrix | str | Path | None = None) -> None:
        """Build the tensor of the configured metric and aggregate it under every scheme."""
        self._require(AuditStage.MEASURED)
        ctx, opts = self._context, self._options
        ds, evaluation = ctx.dataset, ctx.evaluation
        assert ds is not None and evaluation is not None and ctx.idx is not None

        metric_id = opts.tensor_metric_id(ds.task_kind)
        if metric_id in ctx.tables:
            table = ctx.tables[metric_id]
        else:
            table = metric_tables(
                evaluation.targets,
                ctx.predictions,
                ctx.idx,
                [metric_id],
                ds.task_kind,
                ds.label_names,
            )[metric_id]
        grid = MetricGrid.from_table(
            table, {"dataset": evaluation.fingerprint(), "model": ctx.model_id}
        )
        ctx.tensor = build_tensor(grid, opts.build_mode)
        ctx.aggregates = self._aggregates(ctx.tensor)

        if weights is not None:
            if not isinstance(weights, WeightMatrix):
                weights = load_weight_matrix(weights, ctx.idx.groups, ds.label_names)
            ctx.weighted_aggregates = self._aggregates(apply_weights(ctx.tensor, weights))
        self._set_state(AuditStage.TENSORIZED)

    def _aggregates(self, t: FairnessTensor) -> list[AggregateResult]:
        results = []
        for scheme in self._options.schemes:
            try:
                results.append(aggregate(t, scheme))
            except AuditError as e:
                logger.warning(f"Aggregate {scheme.value} skipped: {e.message}")
        return results

    def breaches(self) -> list[dict[str, Any]]:
        """Disparities above the fail threshold, with their extreme groups."""
        threshold = self._options.fail_threshold
        if threshold is None:
            return []
        return [
            {
                "metric": d.metric_id.value,
                "label": d.label,
                "value": d.value,
                "threshold": threshold,
                "argmax": group_name(d.argmax),
                "argmin": group_name(d.argmin),
            }
            for d in self._context.disparities
            if d.value > threshold
        ]

    def report(self) -> AuditReport:
        self._require(AuditStage.TENSORIZED)
        ctx = self._context
        assert ctx.dataset is not None and ctx.evaluation is not None
        assert ctx.idx is not None and ctx.quality is not None and ctx.tensor is not None
        breaches = self.breaches()
        if breaches:
            logger.warning(f"{len(breaches)} disparities exceed the fail threshold")
        self._set_state(AuditStage.REPORTED)

        return AuditReport(
            options=self._options,
            model_id=ctx.model_id,
            dataset=self._dataset_section(),
            quality=ctx.quality,
            groups=[
                {"group": name, "size": int(size), "flagged": bool(flagged)}
                for name, size, flagged in zip(
                    ctx.idx.group_names, ctx.idx.sizes, ctx.idx.flagged, strict=True
                )
            ],
            tables=dict(ctx.tables),
            disparities=tuple(ctx.disparities),
            skipped=tuple(ctx.skipped),
            label_summaries=dict(ctx.label_summaries),
            calibration=ctx.calibration,
            tensor=ctx.tensor,
            aggregates=tuple(ctx.aggregates),
            weighted_aggregates=(
                tuple(ctx.weighted_aggregates) if ctx.weighted_aggregates is not None else None
            ),
            breaches=tuple(breaches),
            timestamps=dict(ctx.timestamps),
        )

    def _dataset_section(self) -> dict[str, Any]:
        ctx = self._context
        ds, evaluation = ctx.dataset, ctx.evaluation
        assert ds is not None and evaluation is not None
        return {
            "fingerprint": ds.fingerprint(),
            "task_kind": ds.task_kind.value,
            "n_rows": ds.n_rows,
            "n_train": ctx.train.n_rows if ctx.train is not None else 0,
            "n_evaluated": evaluation.n_rows,
            "evaluated_on": "held_out" if ctx.train is not None else "all_rows",
            "features": list(ds.feature_names),
            "labels": list(ds.label_names),
            "protected": {name: list(ds.levels(name)) for name in ds.protected_names},
            "attributes": list(self._attrs),
        }

    def run(
        self,
        ds: Dataset,
        weights: WeightMatrix | str | Path | None = None,
    ) -> AuditReport:
        """Load, train, measure, tensorize and report in one call."""
        try:
            self.load(ds)
            self.train()
            self.measure()
            self.tensorize(weights)
            return self.report()
        except AuditError as e:
            logger.error(f"Audit failed in stage {self._state.name}: {e.message}")
            self._set_state(AuditStage.ERROR)
            self._notify_error(e)
            raise

    def run_predictions(
        self,
        ds: Dataset,
        predictions: NDArray[np.float64],
        probabilities: NDArray[np.float64] | None = None,
        model_id: str = "external",
        evaluation: Dataset | None = None,
        weights: WeightMatrix | str | Path | None = None,
    ) -> AuditReport:
        """Audit supplied predictions without training."""
        try:
            self.load(ds)
            self.use_predictions(predictions, probabilities, model_id, evaluation)
            self.measure()
            self.tensorize(weights)
            return self.report()
        except AuditError as e:
            logger.error(f"Audit failed in stage {self._state.name}: {e.message}")
            self._set_state(AuditStage.ERROR)
            self._notify_error(e)
            raise


def _or_none(fn: Any, *args: Any) -> float | None:
    try:
        return float(fn(*args))
    except AuditError as e:
        logger.debug(f"{fn.__name__} undefined: {e.message}")
        return None

