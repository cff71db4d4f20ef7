"""
Seeded synthetic dataset generator.

Generates transaction-style data: bimodal features clustered at two extremes,
correlated feature pairs, imbalanced multi-label adoption targets (optionally
turned into spend amounts) and three protected attributes with explicit
unspecified rates. Planted structure (proxy features, attribute-conditional
label shifts, label-noise correlation) makes the audits testable.

Random streams under the config seed:
    0  protected attributes
    1  features
    2  label noise
    3  spend amounts
"""

import logging
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from fairaudit.core.errors import ConfigError
from fairaudit.core.models import UNSPECIFIED, Dataset, TaskKind
from fairaudit.core.rng import check_seed, make_rng
from fairaudit.core.serialization import load_json
from fairaudit.dataset.schema import SPEC_VERSION


logger = logging.getLogger(__name__)

PROTECTED_STREAM = 0
FEATURE_STREAM = 1
LABEL_STREAM = 2
SPEND_STREAM = 3


@dataclass(frozen=True)
class AttributeSpec:
    """A protected attribute: level set, level frequencies, unspecified rate."""
    name: str
    levels: tuple[str, ...]
    frequencies: tuple[float, ...] | None = None    # uniform when None
    unspecified_rate: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "levels", tuple(str(v) for v in self.levels))
        if not self.levels or len(set(self.levels)) != len(self.levels):
            raise ConfigError(f"Attribute '{self.name}' needs distinct levels", field=self.name)
        if UNSPECIFIED in self.levels:
            raise ConfigError(
                f"'{UNSPECIFIED}' is implicit and cannot be a declared level", field=self.name
            )
        if not 0.0 <= self.unspecified_rate <= 1.0:
            raise ConfigError(
                f"unspecified_rate of '{self.name}' must be in [0, 1]", field=self.name
            )
        if self.frequencies is not None:
            freqs = tuple(float(f) for f in self.frequencies)
            if len(freqs) != len(self.levels):
                raise ConfigError(
                    f"Attribute '{self.name}' has {len(self.levels)} levels "
                    f"but {len(freqs)} frequencies",
                    field=self.name,
                )
            if any(f < 0 for f in freqs) or not np.isclose(sum(freqs), 1.0, atol=1e-9):
                raise ConfigError(
                    f"Frequencies of '{self.name}' must be >= 0 and sum to 1", field=self.name
                )
            object.__setattr__(self, "frequencies", freqs)

    @property
    def probabilities(self) -> np.ndarray:
        if self.frequencies is None:
            return np.full(len(self.levels), 1.0 / len(self.levels))
        return np.asarray(self.frequencies, dtype=float)


@dataclass(frozen=True)
class LabelEffect:
    """Shift of a label's latent score for rows at one attribute level."""
    label: int
    attribute: str
    level: str
    strength: float


def default_attributes() -> tuple[AttributeSpec, ...]:
    return (
        AttributeSpec("gender", ("female", "male"), (0.48, 0.52), unspecified_rate=0.03),
        AttributeSpec(
            "ethnicity",
            ("White", "Hispanic", "Black", "Asian", "Middle Eastern", "Native Indian"),
            (0.70, 0.10, 0.08, 0.06, 0.03, 0.03),
            unspecified_rate=0.30,
        ),
        AttributeSpec("age", ("<=40", ">40"), (0.5, 0.5), unspecified_rate=0.0002),
    )


# Labels 2 and 8 dominate adoption.
DEFAULT_LABEL_RATES = (0.04, 0.16, 0.03, 0.05, 0.02, 0.06, 0.04, 0.24, 0.03)


@dataclass(frozen=True)
class SynthConfig:
    """Generator configuration; the seed fully determines the output."""
    n: int = 10_000
    p: int = 20
    n_labels: int = 9
    task_kind: TaskKind = TaskKind.ADOPTION
    attributes: tuple[AttributeSpec, ...] = field(default_factory=default_attributes)
    label_rates: tuple[float, ...] = DEFAULT_LABEL_RATES

    # Weight of label k's driving feature (feature k mod p) in its latent score
    label_signal: float = 1.0
    label_effects: tuple[LabelEffect, ...] = ()
    # (i, j, r): correlation r between the latent noise of labels i and j
    label_correlations: tuple[tuple[int, int, float], ...] = ((1, 7, -0.3),)

    # Planted dependence of one feature on one attribute level
    proxy_strength: float = 0.0
    proxy_feature: int = 0
    proxy_attribute: str = "gender"
    proxy_level: str = "female"

    # Bimodal features
    mode_centers: tuple[float, float] = (0.0, 1.0)
    mode_spread: float = 0.1
    mixing_weight: float = 0.5
    # (i, j, r): feature j remixed to correlation r with feature i
    correlated_pairs: tuple[tuple[int, int, float], ...] = ((2, 3, 0.9), (10, 11, 0.85))

    # Spending flavour: log-normal amounts for adopters
    spend_log_mean: float = 4.0
    spend_log_sigma: float = 0.75

    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1 or self.p < 1 or self.n_labels < 1:
            raise ConfigError(
                f"n, p and n_labels must be >= 1, got n={self.n}, p={self.p}, K={self.n_labels}"
            )
        object.__setattr__(self, "seed", check_seed(self.seed))
        object.__setattr__(self, "label_rates", tuple(float(r) for r in self.label_rates))
        if len(self.label_rates) != self.n_labels:
            raise ConfigError(
                f"Expected {self.n_labels} label rates, got {len(self.label_rates)}",
                field="label_rates",
            )
        if any(not 0.0 <= r <= 1.0 for r in self.label_rates):
            raise ConfigError("Label rates must be in [0, 1]", field="label_rates")
        if not self.attributes:
            raise ConfigError("At least one protected attribute is required", field="attributes")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ConfigError(f"Duplicate attribute names: {names}", field="attributes")

        if self.proxy_strength < 0:
            raise ConfigError("proxy_strength must be >= 0", field="proxy_strength")
        if self.proxy_strength > 0:
            if not 0 <= self.proxy_feature < self.p:
                raise ConfigError("proxy_feature out of range", field="proxy_feature")
            self._check_level(self.proxy_attribute, self.proxy_level, "proxy_level")

        if not 0.0 <= self.mixing_weight <= 1.0:
            raise ConfigError("mixing_weight must be in [0, 1]", field="mixing_weight")
        if self.mode_spread < 0 or self.spend_log_sigma < 0:
            raise ConfigError("Spreads must be >= 0", field="mode_spread")
        if len(self.mode_centers) != 2:
            raise ConfigError("mode_centers needs exactly two values", field="mode_centers")

        for i, j, r in self.correlated_pairs:
            if min(i, j) < 0 or i == j or not -1.0 <= r <= 1.0:
                raise ConfigError(f"Invalid correlated pair {(i, j, r)}", field="correlated_pairs")
        for i, j, r in self.label_correlations:
            if min(i, j) < 0 or i == j or not -1.0 <= r <= 1.0:
                raise ConfigError(
                    f"Invalid label correlation {(i, j, r)}", field="label_correlations"
                )
        for effect in self.label_effects:
            if not 0 <= effect.label < self.n_labels:
                raise ConfigError(
                    f"Label effect on unknown label {effect.label}", field="label_effects"
                )
            self._check_level(effect.attribute, effect.level, "label_effects")

    def _check_level(self, attribute: str, level: str, field_name: str) -> None:
        for spec in self.attributes:
            if spec.name == attribute:
                if level not in spec.levels:
                    raise ConfigError(
                        f"'{level}' is not a level of '{attribute}'", field=field_name
                    )
                return
        raise ConfigError(f"Unknown attribute '{attribute}'", field=field_name)

    def active_pairs(
        self,
        pairs: tuple[tuple[int, int, float], ...],
        size: int,
    ) -> tuple[tuple[int, int, float], ...]:
        """Pairs whose indices exist at this shape; the rest are ignored."""
        return tuple((i, j, r) for i, j, r in pairs if i < size and j < size)

    def attribute(self, name: str) -> AttributeSpec:
        for spec in self.attributes:
            if spec.name == name:
                return spec
        raise ConfigError(f"Unknown attribute '{name}'", field="attributes")

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["task_kind"] = self.task_kind.value
        data["spec_version"] = SPEC_VERSION
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SynthConfig":
        data = dict(data)
        version = data.pop("spec_version", SPEC_VERSION)
        if version != SPEC_VERSION:
            raise ConfigError(f"Unsupported spec_version '{version}'", field="spec_version")
        if "K" in data:
            data["n_labels"] = data.pop("K")

        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown SynthConfig keys: {unknown}", field=unknown[0])

        try:
            if "task_kind" in data:
                data["task_kind"] = TaskKind(data["task_kind"])
            if "attributes" in data:
                data["attributes"] = tuple(
                    AttributeSpec(
                        name=a["name"],
                        levels=tuple(a["levels"]),
                        frequencies=_optional_tuple(a.get("frequencies")),
                        unspecified_rate=float(a.get("unspecified_rate", 0.0)),
                    )
                    for a in data["attributes"]
                )
            if "label_effects" in data:
                data["label_effects"] = tuple(LabelEffect(**e) for e in data["label_effects"])
            for key in ("label_rates", "mode_centers"):
                if key in data:
                    data[key] = tuple(float(v) for v in data[key])
            for key in ("correlated_pairs", "label_correlations"):
                if key in data:
                    data[key] = tuple((int(i), int(j), float(r)) for i, j, r in data[key])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Invalid SynthConfig document: {e}") from e
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "SynthConfig":
        try:
            data = load_json(path)
        except FileNotFoundError as e:
            raise ConfigError(str(e), field=str(path)) from e
        except ValueError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}", field=str(path)) from e
        if not isinstance(data, Mapping):
            raise ConfigError("SynthConfig document must be a JSON object", field=str(path))
        return cls.from_dict(data)


def _optional_tuple(values: Any) -> tuple[float, ...] | None:
    return None if values is None else tuple(float(v) for v in values)


def generate_synthetic(cfg: SynthConfig) -> Dataset:
    """Draw a dataset from ``cfg``; identical configs give identical datasets."""
    protected = _draw_protected(cfg)
    features = _draw_features(cfg, protected)
    adoption = _draw_labels(cfg, features, protected)

    if cfg.task_kind is TaskKind.SPENDING:
        targets = _draw_spend(cfg, features, adoption)
    else:
        targets = adoption

    ds = Dataset(
        features=features,
        targets=targets,
        protected=protected,
        task_kind=cfg.task_kind,
        feature_names=tuple(f"f{j + 1}" for j in range(cfg.p)),
        label_names=tuple(f"label_{k + 1}" for k in range(cfg.n_labels)),
    )
    logger.info(
        f"Generated {cfg.task_kind.value} dataset: n={cfg.n}, p={cfg.p}, K={cfg.n_labels}, "
        f"seed={cfg.seed}, proxy_strength={cfg.proxy_strength}"
    )
    return ds


def _draw_protected(cfg: SynthConfig) -> pd.DataFrame:
    rng = make_rng(cfg.seed, PROTECTED_STREAM)
    columns = {}
    for spec in cfg.attributes:
        missing = rng.random(cfg.n) < spec.unspecified_rate
        drawn = rng.choice(len(spec.levels), size=cfg.n, p=spec.probabilities)
        categories = [*spec.levels, UNSPECIFIED]
        codes = np.where(missing, len(spec.levels), drawn)
        columns[spec.name] = pd.Categorical.from_codes(codes, categories=categories)
    return pd.DataFrame(columns)


def _level_indicator(protected: pd.DataFrame, attribute: str, level: str) -> np.ndarray:
    return (protected[attribute].astype(str) == level).to_numpy(dtype=float)


def _draw_features(cfg: SynthConfig, protected: pd.DataFrame) -> np.ndarray:
    rng = make_rng(cfg.seed, FEATURE_STREAM)
    low, high = cfg.mode_centers
    upper = rng.random((cfg.n, cfg.p)) < cfg.mixing_weight
    X = np.where(upper, high, low) + cfg.mode_spread * rng.standard_normal((cfg.n, cfg.p))

    for i, j, r in cfg.active_pairs(cfg.correlated_pairs, cfg.p):
        zi = _standardize(X[:, i])
        zj = _standardize(X[:, j])
        mean_j, std_j = X[:, j].mean(), X[:, j].std()
        X[:, j] = mean_j + std_j * (r * zi + np.sqrt(1.0 - r * r) * zj)

    if cfg.proxy_strength > 0:
        shift = _level_indicator(protected, cfg.proxy_attribute, cfg.proxy_level)
        X[:, cfg.proxy_feature] += cfg.proxy_strength * shift
    return X


def _standardize(values: np.ndarray) -> np.ndarray:
    std = values.std()
    return (values - values.mean()) / std if std > 0 else np.zeros_like(values)


def _draw_labels(cfg: SynthConfig, features: np.ndarray, protected: pd.DataFrame) -> np.ndarray:
    """
    Rank-threshold latent scores so label k has exactly round(n * rate_k) positives.

    The latent score is signal * z(driving feature) + planted effects + Gaussian
    noise, with the configured noise correlations between label pairs.
    """
    rng = make_rng(cfg.seed, LABEL_STREAM)
    noise = rng.standard_normal((cfg.n, cfg.n_labels))
    for i, j, r in cfg.active_pairs(cfg.label_correlations, cfg.n_labels):
        noise[:, j] = r * noise[:, i] + np.sqrt(1.0 - r * r) * noise[:, j]

    latent = noise.copy()
    for k in range(cfg.n_labels):
        latent[:, k] += cfg.label_signal * _standardize(features[:, k % cfg.p])
    for effect in cfg.label_effects:
        indicator = _level_indicator(protected, effect.attribute, effect.level)
        latent[:, effect.label] += effect.strength * indicator

    Y = np.zeros((cfg.n, cfg.n_labels))
    for k, rate in enumerate(cfg.label_rates):
        count = int(np.floor(cfg.n * rate + 0.5))
        order = np.argsort(-latent[:, k], kind="stable")
        Y[order[:count], k] = 1.0
    return Y


def _draw_spend(cfg: SynthConfig, features: np.ndarray, adoption: np.ndarray) -> np.ndarray:
    rng = make_rng(cfg.seed, SPEND_STREAM)
    eps = rng.standard_normal(adoption.shape)
    drivers = np.column_stack(
        [_standardize(features[:, k % cfg.p]) for k in range(cfg.n_labels)]
    )
    log_spend = cfg.spend_log_mean + 0.25 * cfg.label_signal * drivers + cfg.spend_log_sigma * eps
    return adoption * np.exp(log_spend)
