"""
Audit report document and its file bundle.

The JSON document embeds the options it was produced with. Wall-clock
values live only under ``timestamps`` so two runs with the same inputs
differ nowhere else.
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd

from fairaudit.core.models import FairnessTensor, MetricId, MetricTable
from fairaudit.core.serialization import dump_json
from fairaudit.dataset.quality import QualityReport
from fairaudit.metrics.calibration import CalibrationTable
from fairaudit.metrics.gaps import Disparity
from fairaudit.orchestrator.options import AuditOptions
from fairaudit.tensor.aggregate import AggregateResult


REPORT_VERSION = "1.0"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_THRESHOLD_BREACH = 2


@dataclass(frozen=True, eq=False)
class AuditReport:
    options: AuditOptions
    model_id: str
    dataset: Mapping[str, Any]
    quality: QualityReport
    groups: Sequence[Mapping[str, Any]]
    tables: Mapping[MetricId, MetricTable]
    disparities: Sequence[Disparity]
    skipped: Sequence[Mapping[str, str]]              # (metric, label) pairs without a disparity
    label_summaries: Mapping[str, Mapping[str, float | None]]
    calibration: CalibrationTable | None
    tensor: FairnessTensor
    aggregates: Sequence[AggregateResult]
    weighted_aggregates: Sequence[AggregateResult] | None
    breaches: Sequence[Mapping[str, Any]]
    timestamps: Mapping[str, str] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return EXIT_THRESHOLD_BREACH if self.breaches else EXIT_OK

    def disparity(self, metric: MetricId, label: str) -> Disparity | None:
        for d in self.disparities:
            if d.metric_id is metric and d.label == label:
                return d
        return None

    def aggregate(self, scheme: str) -> AggregateResult | None:
        for result in self.aggregates:
            if result.scheme.value == scheme:
                return result
        return None

    def metrics_frame(self) -> pd.DataFrame:
        """Every metric cell with its (metric, label, group) coordinates."""
        frames = [table.to_frame() for table in self.tables.values()]
        return pd.concat(frames, ignore_index=True)

    def disparities_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "metric": d.metric_id.value,
                    "label": d.label,
                    "value": d.value,
                    "argmax": "|".join(d.argmax),
                    "argmin": "|".join(d.argmin),
                    "n_groups": d.n_groups,
                }
                for d in self.disparities
            ],
            columns=["metric", "label", "value", "argmax", "argmin", "n_groups"],
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "report_version": REPORT_VERSION,
            "run": {
                "seed": self.options.seed,
                "config_hash": self.options.config_hash(),
                "model_id": self.model_id,
            },
            "config": self.options,
            "dataset": dict(self.dataset),
            "data_quality": self.quality,
            "groups": list(self.groups),
            "metric_tables": {m.value: t for m, t in self.tables.items()},
            "disparities": list(self.disparities),
            "skipped_disparities": list(self.skipped),
            "label_summaries": dict(self.label_summaries),
            "calibration": self.calibration,
            "tensor": {
                "tensor": self.tensor,
                "aggregates": list(self.aggregates),
                "weighted_aggregates": (
                    list(self.weighted_aggregates)
                    if self.weighted_aggregates is not None else None
                ),
            },
            "breaches": list(self.breaches),
            "exit_code": self.exit_code,
            "timestamps": dict(self.timestamps),
        }

    def write(self, out_dir: str | Path) -> None:
        """report.json plus metrics.csv, disparities.csv and tensor.csv."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        dump_json(self, out / "report.json")
        self.metrics_frame().to_csv(out / "metrics.csv", index=False, lineterminator="\n")
        self.disparities_frame().to_csv(out / "disparities.csv", index=False, lineterminator="\n")
        self.tensor.to_frame().to_csv(out / "tensor.csv", index=False, lineterminator="\n")
