import json

import numpy as np
import pytest

from featuredp.errors import DomainError, NormViolationError, ParseError, SchemaError
from featuredp.harness.data import (
    Column,
    DatasetManifest,
    dataset_to_csv,
    design_matrix,
    load_dataset,
    parse_dataset,
    write_dataset,
)
from featuredp.harness.synth import KINDS, synth_generate


def small_manifest(**kw):
    cols = (Column("age", "numeric", "public"), Column("city", "categorical", "private"),
            Column("y", "label", "public"))
    return DatasetManifest(cols, **kw)


TEXT = "age,city,y\n0.5,paris,1\n0.25,rome,0\n-0.5,paris,1\n"


def test_parse_encodes_categories():
    ds = parse_dataset(TEXT, small_manifest())
    assert ds.features.tolist() == [[0.5, 0.0], [0.25, 1.0], [-0.5, 0.0]]
    assert ds.labels.tolist() == [1, 0, 1]
    assert ds.categories == {"city": ["paris", "rome"]}
    batch, schema = design_matrix(ds)
    assert batch.features.shape == (3, 3)
    assert schema.public_columns.tolist() == [True, False, False] and schema.label_public


def test_csv_round_trip_is_exact(tmp_path):
    ds = synth_generate("criteo-like", 50, seed=3)
    write_dataset(ds, tmp_path / "d.csv", tmp_path / "d.manifest.json")
    back = load_dataset(tmp_path / "d.csv", tmp_path / "d.manifest.json")
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)
    assert back.categories == ds.categories
    assert dataset_to_csv(back) == dataset_to_csv(ds)
    assert json.loads((tmp_path / "d.manifest.json").read_text())["schema_version"]


def test_declared_levels_fix_the_codes(tmp_path):
    ds = parse_dataset(TEXT, small_manifest(), levels={"city": ["rome", "oslo", "paris"]})
    assert ds.features[:, 1].tolist() == [2.0, 0.0, 2.0]
    assert design_matrix(ds)[0].features.shape == (3, 4)


def test_string_labels_are_encoded():
    cols = (Column("a", "numeric", "public"), Column("y", "label", "private"))
    ds = parse_dataset("a,y\n1,cat\n2,dog\n3,cat\n", DatasetManifest(cols))
    assert ds.labels.tolist() == [0, 1, 0] and ds.num_classes == 2


@pytest.mark.parametrize("header,name", [("age,y", "city"), ("age,city,y,zip", "zip")])
def test_schema_error_names_the_column(header, name):
    with pytest.raises(SchemaError, match=name):
        parse_dataset(header + "\n", small_manifest())


def test_reordered_columns_rejected():
    with pytest.raises(SchemaError, match="order"):
        parse_dataset("city,age,y\n", small_manifest())


def test_parse_error_names_row_and_column():
    with pytest.raises(ParseError, match=r"row 2, column 'age'"):
        parse_dataset("age,city,y\n0.5,paris,1\nold,rome,0\n", small_manifest())
    with pytest.raises(ParseError, match="row 1"):
        parse_dataset("age,city,y\n0.5,paris\n", small_manifest())
    with pytest.raises(ParseError, match="non-finite"):
        parse_dataset("age,city,y\nnan,paris,1\n", small_manifest())


def test_norm_violation_names_the_row():
    with pytest.raises(NormViolationError, match="row 3"):
        parse_dataset("age,city,y\n0.5,a,1\n0.1,b,0\n2.0,a,1\n", small_manifest(norm_bound=1.0))


def test_record_count_mismatch():
    with pytest.raises(SchemaError, match="declares 5"):
        parse_dataset(TEXT, small_manifest(num_records=5))


def test_manifest_validation():
    with pytest.raises(SchemaError):
        Column("a", "text", "public")
    with pytest.raises(SchemaError):
        Column("a", "numeric", "secret")
    with pytest.raises(SchemaError, match="label"):
        DatasetManifest((Column("a", "numeric", "public"),))
    with pytest.raises(SchemaError, match="unique"):
        DatasetManifest((Column("a", "numeric", "public"), Column("a", "label", "public")))
    with pytest.raises(SchemaError, match="malformed"):
        DatasetManifest.from_json({"columns": [{"name": "a"}]})


def test_manifest_json_round_trip():
    m = small_manifest(num_records=3, norm_bound=2.0)
    assert DatasetManifest.from_json(json.loads(json.dumps(m.to_json()))) == m


# --- synthetic data ------------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_synth_is_deterministic(kind):
    a = synth_generate(kind, 40, seed=5)
    b = synth_generate(kind, 40, seed=5)
    c = synth_generate(kind, 40, seed=6)
    assert dataset_to_csv(a) == dataset_to_csv(b)
    assert dataset_to_csv(a) != dataset_to_csv(c)
    assert a.ground_truth["kind"] == kind


def test_label_dp_data_is_separable_in_the_unit_ball():
    ds = synth_generate("label-dp-gaussian", 500, dims=6, seed=1)
    assert ds.max_norm() <= 1.0 + 1e-12
    w = np.array(ds.ground_truth["separator"])
    margins = (2 * ds.labels - 1) * (ds.features @ w)
    assert np.all(margins >= ds.ground_truth["margin"] - 1e-12)
    assert ds.manifest.label.role == "private"


def test_quadratic_data_records_its_minimizer():
    ds = synth_generate("strongly-convex-quadratic", 100, dims=4, seed=2, radius=2.0)
    assert ds.max_norm() <= 2.0
    assert np.allclose(ds.ground_truth["minimizer"], ds.features.mean(axis=0))
    assert ds.ground_truth["private_columns"] == [2, 3]


def test_synth_validation():
    with pytest.raises(DomainError):
        synth_generate("imagenet", 10)
    with pytest.raises(DomainError):
        synth_generate("purchase-like", 0)
