"""Tests for CSV ingestion, schemas, splits, intersections and the generator."""

import json
from dataclasses import replace

import numpy as np
import pytest

from fairaudit.core.errors import ConfigError, DataValidationError, SchemaError
from fairaudit.core.models import UNSPECIFIED, TaskKind
from fairaudit.core.rng import make_rng
from fairaudit.dataset.intersections import derive_intersections
from fairaudit.dataset.loader import load_csv, schema_for, write_csv
from fairaudit.dataset.quality import data_quality_report
from fairaudit.dataset.schema import ColumnRole, ColumnSchema
from fairaudit.dataset.splitting import holdout_size, split, split_rows
from fairaudit.dataset.synthetic import (
    AttributeSpec,
    LabelEffect,
    SynthConfig,
    generate_synthetic,
)


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return path


SIMPLE_SCHEMA = ColumnSchema(
    roles={
        "x": ColumnRole.FEATURE,
        "y": ColumnRole.LABEL,
        "g": ColumnRole.PROTECTED,
    }
)


class TestIntersections:
    """Tests for intersectional group derivation."""

    def test_single_attribute(self, tiny_dataset):
        index = derive_intersections(tiny_dataset, ["gender"], min_support=2)
        assert index.groups == (("f",), ("m",))
        np.testing.assert_array_equal(index.sizes, [4, 4])
        assert not index.flagged.any()

    def test_joint_groups_follow_level_order(self, tiny_dataset):
        index = derive_intersections(tiny_dataset, ["gender", "age"], min_support=2)
        assert index.group_names == (
            "f|old", "f|young", "m|old", "m|young", f"m|{UNSPECIFIED}",
        )
        np.testing.assert_array_equal(index.members[0], [1, 3])
        np.testing.assert_array_equal(index.members[3], [4, 6])
        np.testing.assert_array_equal(index.flagged, [False, False, True, False, True])

    def test_groups_partition_rows(self, tiny_dataset):
        index = derive_intersections(tiny_dataset, ["gender", "age"])
        assert index.sizes.sum() == tiny_dataset.n_rows
        assert (index.row_groups >= 0).all()
        assert index.row_groups[7] == index.index_of(f"m|{UNSPECIFIED}")

    def test_index_of_tuple_and_name(self, tiny_dataset):
        index = derive_intersections(tiny_dataset, ["gender"])
        assert index.index_of(("m",)) == index.index_of("m") == 1
        with pytest.raises(DataValidationError):
            index.index_of("x")

    def test_empty_and_duplicate_attributes(self, tiny_dataset):
        with pytest.raises(DataValidationError):
            derive_intersections(tiny_dataset, [])
        with pytest.raises(DataValidationError):
            derive_intersections(tiny_dataset, ["gender", "gender"])

    def test_negative_min_support(self, tiny_dataset):
        with pytest.raises(DataValidationError):
            derive_intersections(tiny_dataset, ["gender"], min_support=-1)


class TestSplitting:
    """Tests for seeded holdout splits."""

    def test_holdout_size_rounds_half_up(self):
        assert holdout_size(10, 0.25) == 3
        assert holdout_size(8, 0.3) == 2

    def test_split_sizes_and_disjointness(self, planted):
        train, holdout = split(planted, 0.25, seed=3)
        assert holdout.n_rows == 300
        assert train.n_rows == 900

    def test_same_seed_same_partition(self):
        a = split_rows(50, 0.2, make_rng(5))
        b = split_rows(50, 0.2, make_rng(5))
        np.testing.assert_array_equal(a[1], b[1])
        assert sorted(np.concatenate(a).tolist()) == list(range(50))

    def test_stratified_keeps_proportions(self, tiny_dataset):
        train, holdout = split(tiny_dataset, 0.5, seed=1, stratify_label="a")
        assert holdout.targets[:, 0].sum() == 2
        assert train.targets[:, 0].sum() == 2

    def test_stratum_too_small(self, make_dataset):
        ds = make_dataset(np.arange(5.0), [1, 0, 0, 0, 0], {"g": list("aabbb")})
        with pytest.raises(DataValidationError) as exc:
            split(ds, 0.4, seed=0, stratify_label=0)
        assert exc.value.field == "stratify_label"

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.2])
    def test_fraction_out_of_range(self, fraction):
        with pytest.raises(ConfigError):
            split_rows(10, fraction, make_rng(0))

    def test_empty_part(self):
        with pytest.raises(DataValidationError):
            split_rows(2, 0.1, make_rng(0))

    def test_stratified_regression_rejected(self, make_dataset):
        ds = make_dataset(np.arange(4.0), [0.0, 1.5, 2.0, 3.0], {"g": list("abab")},
                          task_kind=TaskKind.SPENDING)
        with pytest.raises(ConfigError):
            split(ds, 0.5, seed=0, stratify_label=0)


class TestCsv:
    """Tests for CSV loading and writing."""

    def test_write_then_load(self, tiny_dataset, tmp_path):
        path = tmp_path / "tiny.csv"
        write_csv(tiny_dataset, path)
        loaded = load_csv(path, schema_for(tiny_dataset))
        assert loaded.fingerprint() == tiny_dataset.fingerprint()
        assert path.read_text().splitlines()[0] == "x1,x2,a,b,gender,age"

    def test_missing_protected_value_is_unspecified(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "x,y,g\n1.5,1,a\n2.0,0,\n")
        ds = load_csv(path, SIMPLE_SCHEMA)
        assert ds.protected_values("g").tolist() == ["a", UNSPECIFIED]

    def test_declared_levels_set_order(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "x,y,g\n1,1,low\n2,0,high\n")
        schema = replace(SIMPLE_SCHEMA, levels={"g": ("low", "high")})
        assert load_csv(path, schema).levels("g") == ("low", "high", UNSPECIFIED)

    def test_undeclared_level(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "x,y,g\n1,1,low\n2,0,mid\n")
        schema = replace(SIMPLE_SCHEMA, levels={"g": ("low", "high")})
        with pytest.raises(SchemaError) as exc:
            load_csv(path, schema)
        assert exc.value.field == "g"

    def test_missing_feature_value(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "x,y,g\n,1,a\n")
        with pytest.raises(SchemaError) as exc:
            load_csv(path, SIMPLE_SCHEMA)
        assert exc.value.field == "x"

    def test_non_numeric_feature(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "x,y,g\nabc,1,a\n")
        with pytest.raises(SchemaError, match="Non-numeric"):
            load_csv(path, SIMPLE_SCHEMA)

    def test_non_binary_label(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "x,y,g\n1,2,a\n")
        with pytest.raises(SchemaError) as exc:
            load_csv(path, SIMPLE_SCHEMA)
        assert exc.value.field == "y"

    def test_spending_labels_may_be_amounts(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "x,y,g\n1,0,a\n2,35.5,b\n")
        schema = replace(SIMPLE_SCHEMA, task_kind=TaskKind.SPENDING)
        assert load_csv(path, schema).targets[1, 0] == 35.5

    def test_column_without_role(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "x,y,g,extra\n1,1,a,z\n")
        with pytest.raises(SchemaError) as exc:
            load_csv(path, SIMPLE_SCHEMA)
        assert exc.value.field == "extra"

    def test_schema_column_missing_from_file(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "x,y\n1,1\n")
        with pytest.raises(SchemaError) as exc:
            load_csv(path, SIMPLE_SCHEMA)
        assert exc.value.field == "g"

    def test_ignored_column(self, tmp_path):
        path = write_text(tmp_path / "d.csv", "x,y,g,note\n1,1,a,hello\n2,0,b,\n")
        roles = {**SIMPLE_SCHEMA.roles, "note": ColumnRole.IGNORE}
        ds = load_csv(path, ColumnSchema(roles=roles))
        assert ds.feature_names == ("x",)

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            load_csv(tmp_path / "nope.csv", SIMPLE_SCHEMA)


class TestSchema:
    """Tests for column-role schema documents."""

    def test_document_round_trip(self, tmp_path):
        schema = replace(SIMPLE_SCHEMA, levels={"g": ("b", "a")})
        path = write_text(tmp_path / "s.json", json.dumps(schema.to_dict()))
        loaded = ColumnSchema.load(path)
        assert loaded.roles == schema.roles
        assert loaded.levels == {"g": ("b", "a")}

    def test_requires_every_role(self):
        with pytest.raises(SchemaError):
            ColumnSchema(roles={"x": ColumnRole.FEATURE, "y": ColumnRole.LABEL})

    def test_levels_only_on_protected(self):
        with pytest.raises(SchemaError) as exc:
            replace(SIMPLE_SCHEMA, levels={"x": ("a",)})
        assert exc.value.field == "x"

    def test_bad_version(self):
        with pytest.raises(SchemaError):
            ColumnSchema.from_dict({"spec_version": "9", "columns": {"x": "feature"}})

    def test_unknown_role(self):
        with pytest.raises(SchemaError):
            ColumnSchema.from_dict({"columns": {"x": "target"}})

    def test_invalid_json(self, tmp_path):
        path = write_text(tmp_path / "s.json", "{not json")
        with pytest.raises(SchemaError):
            ColumnSchema.load(path)


class TestSyntheticGenerator:
    """Tests for the seeded generator."""

    def test_shape_and_names(self, synth_config):
        ds = generate_synthetic(synth_config)
        assert (ds.n_rows, ds.n_features, ds.n_labels) == (600, 6, 3)
        assert ds.feature_names[0] == "f1"
        assert ds.label_names == ("label_1", "label_2", "label_3")
        assert ds.protected_names == ("gender", "age")

    def test_exact_positive_counts(self, synth_config):
        ds = generate_synthetic(synth_config)
        np.testing.assert_array_equal(ds.targets.sum(axis=0), [120, 180, 150])

    def test_deterministic(self, synth_config):
        assert (
            generate_synthetic(synth_config).fingerprint()
            == generate_synthetic(synth_config).fingerprint()
        )
        other = generate_synthetic(replace(synth_config, seed=8))
        assert other.fingerprint() != generate_synthetic(synth_config).fingerprint()

    def test_correlated_pair(self, synth_config):
        ds = generate_synthetic(synth_config)
        r = np.corrcoef(ds.features[:, 2], ds.features[:, 3])[0, 1]
        assert r == pytest.approx(0.9, abs=0.05)

    def test_proxy_feature_shift(self, synth_config):
        cfg = replace(synth_config, proxy_strength=2.0, proxy_feature=0)
        ds = generate_synthetic(cfg)
        gender = ds.protected_values("gender")
        shift = ds.features[gender == "female", 0].mean() - ds.features[gender == "male", 0].mean()
        assert shift == pytest.approx(2.0, abs=0.2)

    def test_label_effect_raises_group_rate(self, synth_config):
        effect = LabelEffect(label=0, attribute="gender", level="female", strength=3.0)
        ds = generate_synthetic(replace(synth_config, label_effects=(effect,)))
        gender = ds.protected_values("gender")
        female = ds.targets[gender == "female", 0].mean()
        male = ds.targets[gender == "male", 0].mean()
        assert female > male + 0.2

    def test_spending_is_zero_for_non_adopters(self, synth_config):
        cfg = replace(synth_config, task_kind=TaskKind.SPENDING)
        spend = generate_synthetic(cfg).targets
        adoption = generate_synthetic(synth_config).targets
        assert ((spend > 0) == (adoption == 1)).all()

    def test_unspecified_rate(self, synth_config):
        ds = generate_synthetic(replace(synth_config, n=4000))
        rate = np.mean(ds.protected_values("gender") == UNSPECIFIED)
        assert rate == pytest.approx(0.05, abs=0.015)

    def test_label_rate_length_mismatch(self):
        with pytest.raises(ConfigError) as exc:
            SynthConfig(n_labels=2, label_rates=(0.1,))
        assert exc.value.field == "label_rates"

    def test_unknown_proxy_level(self, synth_config):
        with pytest.raises(ConfigError):
            replace(synth_config, proxy_strength=1.0, proxy_level="other")

    def test_attribute_spec_validation(self):
        with pytest.raises(ConfigError):
            AttributeSpec("g", ("a", "a"))
        with pytest.raises(ConfigError):
            AttributeSpec("g", ("a", UNSPECIFIED))
        with pytest.raises(ConfigError):
            AttributeSpec("g", ("a", "b"), (0.3, 0.3))

    def test_from_dict_accepts_k_alias(self):
        cfg = SynthConfig.from_dict({"n": 50, "p": 3, "K": 2, "label_rates": [0.2, 0.4]})
        assert cfg.n_labels == 2

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ConfigError) as exc:
            SynthConfig.from_dict({"n": 50, "rows": 3})
        assert exc.value.field == "rows"

    def test_load_from_file(self, synth_config, tmp_path):
        path = write_text(tmp_path / "synth.json", json.dumps(synth_config.to_dict()))
        assert SynthConfig.load(path) == synth_config


class TestQualityReport:
    """Tests for the data-quality report."""

    def test_tiny_rates_and_deviation(self, tiny_dataset):
        report = data_quality_report(tiny_dataset, ["gender"], min_support=2)
        assert report.unspecified_rates == {"gender": 0.0, "age": 0.125}
        assert report.label_positive_rates == {"a": 0.5, "b": 0.625}
        assert report.group_mean_deviation["gender"]["f"]["b"] == pytest.approx(-0.125)
        assert report.spend_summary is None
        assert report.group_sizes == (("f", 4, False), ("m", 4, False))

    def test_flags_correlated_features(self, synth_config):
        report = data_quality_report(generate_synthetic(synth_config))
        pairs = {(a, b) for a, b, _ in report.high_correlation_pairs}
        assert ("f3", "f4") in pairs

    def test_spend_summary(self, synth_config):
        ds = generate_synthetic(replace(synth_config, task_kind=TaskKind.SPENDING))
        report = data_quality_report(ds)
        assert report.label_positive_rates is None
        assert report.spend_summary["label_1"]["zero_fraction"] == pytest.approx(0.8)

    def test_serializes(self, tiny_dataset):
        doc = data_quality_report(tiny_dataset).to_dict()
        assert doc["groups"]["attributes"] == ["gender", "age"]
