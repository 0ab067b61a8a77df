import csv
import io
import json
import math

import numpy as np
import pytest

from featuredp.errors import ConsistencyError, DomainError
from featuredp.harness.report import CSV_COLUMNS, emit_report, verify_row
from featuredp.harness.sweep import SweepResults, SweepSpec, build_split, holdout, run_seed, run_sweep
from featuredp.harness.synth import synth_generate
from featuredp.sgd import Batch


@pytest.fixture(scope="module")
def dataset():
    return synth_generate("purchase-like", 400, dims=12, seed=0, public_dims=4, num_classes=3)


def small_spec(**kw):
    base = dict(epsilon_grid=(1.0, 4.0), methods=("fdp-sgd", "dpsgd", "public-only"),
                base_config={"priv_batch_expected": 40, "pub_batch": 40, "steps": 20, "lr": 0.2},
                repeats=2, grids={"fdp-sgd": {"clip": [1.0]}, "dpsgd": {"clip": [1.0]}}, seed=3)
    return SweepSpec(**{**base, **kw})


@pytest.fixture(scope="module")
def results(dataset):
    return run_sweep(dataset, small_spec())


def test_run_seed_depends_only_on_identity():
    assert run_seed(0, "fdp-sgd", 1.0, "repeat", 0) == run_seed(0, "fdp-sgd", 1.0, "repeat", 0)
    assert run_seed(0, "fdp-sgd", 1.0, "repeat", 0) != run_seed(0, "fdp-sgd", 1.0, "repeat", 1)
    assert 0 <= run_seed(7, "x") < 2**63


def test_holdout_partitions_records():
    batch = Batch(np.arange(100.0).reshape(-1, 1), np.zeros(100, int))
    train, valid, test = holdout(batch, 0.2, 1)
    assert (len(train), len(valid), len(test)) == (80, 10, 10)
    seen = np.concatenate([p.features[:, 0] for p in (train, valid, test)])
    assert sorted(seen.tolist()) == list(range(100))


def test_sweep_rows_meet_their_targets(results):
    assert len(results.rows) == 6
    for row in results.rows:
        assert row["status"] == "ok" and row["schema_version"]
        if row["method"] == "public-only":
            assert row["accounted_epsilon"] == 0.0
        else:
            assert row["accounted_epsilon"] <= row["epsilon_target"] + 1e-9
            assert row["accounted_epsilon"] >= 0.99 * row["epsilon_target"]
        assert len(row["utility_runs"]) == 2


def test_default_delta_uses_training_size(results):
    assert results.rows[0]["delta"] == pytest.approx(1.0 / (2 * results.rows[0]["n_train"]))


def test_sweep_is_reproducible_and_worker_independent(dataset, results):
    spec = small_spec(epsilon_grid=(1.0,))
    one = run_sweep(dataset, spec)
    two = run_sweep(dataset, spec, workers=2)
    assert one.to_json() == two.to_json()
    assert one.rows == results.rows[:3]


def test_adding_a_method_keeps_other_seeds(dataset, results):
    fewer = run_sweep(dataset, small_spec(epsilon_grid=(4.0,), methods=("dpsgd",)))
    assert fewer.rows[0] == results.rows[4]


def test_spec_validation():
    for bad in (dict(epsilon_grid=()), dict(epsilon_grid=(0.0,)), dict(methods=("sgd",)), dict(repeats=0),
                dict(grids={"dpsgd": {"clip": []}}), dict(split="pca"), dict(held_out=1.0), dict(delta=2.0)):
        with pytest.raises(DomainError):
            small_spec(**bad)
    with pytest.raises(DomainError, match="unknown"):
        SweepSpec.from_json({**small_spec().to_json(), "budget": 3})
    assert SweepSpec.from_json(json.loads(json.dumps(small_spec().to_json()))) == small_spec()


def test_split_selection():
    label = synth_generate("label-dp-gaussian", 30, dims=3)
    split = build_split(label)[0]
    assert split.priv_lipschitz == 1.0 and split.full_lipschitz == pytest.approx(math.sqrt(2.0))
    with pytest.raises(DomainError, match="public"):
        build_split(label, "masking")
    with pytest.raises(DomainError):
        build_split(synth_generate("purchase-like", 30, dims=6, public_dims=2), "logistic")


# --- reports ------------------------------------------------------------------------


@pytest.mark.parametrize("fmt", ["csv", "json", "svg"])
def test_report_formats(results, tmp_path, fmt):
    path = emit_report(results, fmt, tmp_path / f"report.{fmt}")
    text = path.read_text()
    if fmt == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 7
    elif fmt == "json":
        doc = json.loads(text)
        assert doc["schema_version"] and len(doc["rows"]) == 6
    else:
        assert text.startswith("<svg") and text.count("<polyline") == 3


def test_results_file_round_trip(results, tmp_path):
    results.save(tmp_path / "results.json")
    back = SweepResults.load(tmp_path / "results.json")
    assert [verify_row(r)["accounted_epsilon"] for r in back.rows] == [r["accounted_epsilon"] for r in results.rows]


def test_tampered_epsilon_detected(results, tmp_path):
    row = dict(next(r for r in results.rows if r["method"] == "fdp-sgd"))
    row["accounted_epsilon"] *= 0.5
    with pytest.raises(ConsistencyError, match="stored epsilon"):
        emit_report(SweepResults((row,)), "csv", tmp_path / "r.csv")


def test_tampered_config_detected(results):
    row = dict(next(r for r in results.rows if r["method"] == "dpsgd"))
    row["config"] = {**row["config"], "sigma": row["config"]["sigma"] * 2}
    with pytest.raises(ConsistencyError, match="sigma"):
        verify_row(row)


def test_public_only_must_claim_zero(results):
    row = dict(next(r for r in results.rows if r["method"] == "public-only"))
    row["accounted_epsilon"] = 0.5
    with pytest.raises(ConsistencyError):
        verify_row(row)


def test_empty_results_rejected(tmp_path):
    with pytest.raises(DomainError, match="empty"):
        emit_report(SweepResults(()), "json", tmp_path / "r.json")
    with pytest.raises(DomainError):
        emit_report(SweepResults(({"status": "ok"},)), "pdf", tmp_path / "r.pdf")
