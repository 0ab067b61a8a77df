import json
import math

import pytest

from featuredp.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_account_reports_epsilon(capsys, tmp_path):
    code, out, _ = run(capsys, "--out-dir", str(tmp_path), "account", "--sigma", "1.0", "--p", "0.01",
                       "--steps", "1000", "--delta", "1e-5", "--curve-out", str(tmp_path / "curve.json"))
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] and 1.7 < doc["epsilon"] < 1.9
    assert json.loads((tmp_path / "account.json").read_text()) == doc
    assert json.loads((tmp_path / "curve.json").read_text())["schema_version"]


def test_account_needs_positive_noise(capsys):
    code, _, err = run(capsys, "account", "--mechanism", "gaussian", "--sigma", "0", "--delta", "1e-5")
    assert code == 2 and "sigma" in err


def test_calibrate_meets_target(capsys):
    code, out, _ = run(capsys, "calibrate", "--epsilon", "1.0", "--delta", "1e-5", "--p", "0.01", "--steps", "100")
    doc = json.loads(out)
    assert code == 0 and doc["achieved_epsilon"] <= 1.0
    code, out, _ = run(capsys, "account", "--sigma", repr(doc["sigma"]), "--p", "0.01", "--steps", "100",
                       "--delta", "1e-5")
    assert json.loads(out)["epsilon"] <= 1.0


@pytest.mark.parametrize("argv", [
    ["account", "--sigma", "-1", "--delta", "1e-5"],
    ["account", "--delta", "1e-5"],
    ["calibrate", "--epsilon", "0", "--delta", "1e-5"],
    ["--workers", "0", "account", "--sigma", "1", "--delta", "1e-5"],
    ["audit", "--game", "noamp", "--samples", "10"],
    ["synth", "--kind", "mnist", "--size", "10"],
])
def test_invalid_input_exits_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_synth_train_sweep_report(capsys, tmp_path):
    out_dir = str(tmp_path)
    assert run(capsys, "--seed", "4", "--out-dir", out_dir, "synth", "--kind", "label-dp-gaussian",
               "--size", "300", "--dims", "5", "--name", "toy")[0] == 0
    data = str(tmp_path / "toy.csv")

    config = tmp_path / "config.json"
    config.write_text(json.dumps({"priv_batch_expected": 30, "pub_batch": 30, "steps": 50, "lr": 0.5,
                                  "target_epsilon": 2.0}))
    code, out, _ = run(capsys, "--out-dir", out_dir, "train", "--config", str(config), "--data", data)
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] and doc["epsilon"] <= 2.0
    assert (tmp_path / "weights.bin").exists()

    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"epsilon_grid": [2.0], "methods": ["fdp-sgd", "public-only"],
                                "base_config": {"priv_batch_expected": 30, "pub_batch": 30, "steps": 30},
                                "grids": {"fdp-sgd": {"lr": [0.5]}}}))
    code, out, _ = run(capsys, "--out-dir", out_dir, "--workers", "2", "sweep", "--spec", str(spec), "--data", data)
    assert code == 0 and len(json.loads(out)["rows"]) == 2

    for fmt in ("csv", "json", "svg"):
        assert run(capsys, "--out-dir", out_dir, "report", "--results", str(tmp_path / "results.json"),
                   "--format", fmt)[0] == 0
        assert (tmp_path / f"report.{fmt}").exists()

    results = json.loads((tmp_path / "results.json").read_text())
    results["rows"][0]["accounted_epsilon"] = 0.1
    (tmp_path / "results.json").write_text(json.dumps(results))
    code, _, err = run(capsys, "--out-dir", out_dir, "report", "--results", str(tmp_path / "results.json"),
                       "--format", "csv")
    assert code == 2 and "stored epsilon" in err


def test_train_rejects_bad_data(capsys, tmp_path):
    (tmp_path / "d.csv").write_text("a,y\n1,0\n")
    (tmp_path / "d.manifest.json").write_text(json.dumps(
        {"columns": [{"name": "a", "kind": "numeric", "role": "public"}, {"name": "z", "kind": "label", "role": "private"}]}))
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"priv_batch_expected": 1, "pub_batch": 1, "steps": 1}))
    code, _, err = run(capsys, "train", "--config", str(config), "--data", str(tmp_path / "d.csv"))
    assert code == 2 and "'z'" in err


def test_audit_noamp_writes_table(capsys, tmp_path):
    code, out, _ = run(capsys, "--out-dir", str(tmp_path), "audit", "--game", "noamp", "--dims", "3")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema_version"] and doc["passed"] is True
    assert all(math.isclose(r["tight_epsilon"], math.log(2.0)) for r in doc["rows"])
    assert (tmp_path / "noamp.csv").read_text().startswith("p,tight_epsilon")


def test_audit_attr_passes_and_understated_curve_fails(capsys, tmp_path):
    assert run(capsys, "--out-dir", str(tmp_path), "audit", "--game", "attr")[0] == 0
    code, out, err = run(capsys, "--out-dir", str(tmp_path), "audit", "--game", "attr", "--understate", "2")
    assert code == 3 and "audit failed" in err
    assert json.loads(out)["passed"] is False


def test_audit_distinguish(capsys, tmp_path):
    code, out, _ = run(capsys, "--out-dir", str(tmp_path), "audit", "--game", "distinguish", "--samples", "20000")
    assert code == 0 and json.loads(out)["passed"] is True
