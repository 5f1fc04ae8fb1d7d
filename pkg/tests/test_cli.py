import json

import pytest

from gradual_st.cli import EXIT_DATA, EXIT_FAIL, EXIT_OK, EXIT_USAGE, main


def _json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_gen_and_wdist_on_a_counterexample(tmp_path, capsys):
    spec = _json(tmp_path / "spec.json", {"kind": "counterexample", "construction": "baselines_fail"})
    assert main(["gen", "--spec", spec, "--out-dir", str(tmp_path / "ce")]) == EXIT_OK
    assert (tmp_path / "ce" / "meta.json").exists()
    capsys.readouterr()
    p, q = tmp_path / "ce" / "dist_00.csv", tmp_path / "ce" / "dist_01.csv"
    assert main(["wdist", "--p", str(p), "--q", str(q), "--conditional"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["rho"] == pytest.approx(2 / 3, abs=1e-9)
    assert main(["wdist", "--p", str(p), "--q", str(q)]) == EXIT_OK
    assert "winf" in json.loads(capsys.readouterr().out)


def test_wdist_errors(tmp_path):
    unlabeled = tmp_path / "u.csv"
    unlabeled.write_text("x0\n0.0\n1.0\n")
    assert main(["wdist", "--p", str(unlabeled), "--q", str(unlabeled), "--conditional"]) == EXIT_USAGE
    bad = tmp_path / "bad.csv"
    bad.write_text("x0,y\n0.0,1\n1.0,abc\n")
    assert main(["wdist", "--p", str(bad), "--q", str(bad)]) == EXIT_DATA
    heavy = tmp_path / "heavy.csv"
    heavy.write_text("x0,mass\n0.0,0.7\n1.0,0.7\n")
    assert main(["wdist", "--p", str(heavy), "--q", str(heavy)]) == EXIT_DATA


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["verify", "--suite", "nonsense"])
    assert e.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as e:
        main([])
    assert e.value.code == EXIT_USAGE
    cfg = _json(tmp_path / "c.json", {})
    assert main(["ablate", "--config", cfg, "--ablation", "dropout", "--out", str(tmp_path / "o.json")]) == EXIT_USAGE


def test_config_errors_are_data_errors(tmp_path):
    cfg = _json(tmp_path / "c.json", {"unknown": 1})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o.json")]) == EXIT_DATA
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["run", "--config", str(broken), "--out", str(tmp_path / "o.json")]) == EXIT_DATA


def test_run_writes_report_and_summary(tmp_path):
    cfg = _json(tmp_path / "c.json", {
        "dataset": {"kind": "rotation", "n_points": 20, "n_domains": 2, "total_angle_deg": 20.0, "n_target_eval": 50},
        "model": {"loss": "hinge", "regularization": {"kind": "constraint", "R": 1.0}},
        "selftrain": {"window": 20, "confidence_filter_frac": 0.0, "solver": "local"},
        "methods": ["source_only", "gradual_st"],
        "seeds": [0],
    })
    out, summary = tmp_path / "r.json", tmp_path / "s.csv"
    assert main(["run", "--config", cfg, "--out", str(out), "--csv", str(summary)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert set(report["methods"]) == {"source_only", "gradual_st"}
    rows = summary.read_text().splitlines()
    assert rows[0] == "method,seed,accuracy" and len(rows) == 3


def test_gen_dataset(tmp_path):
    spec = _json(tmp_path / "s.json", {"kind": "rotation", "n_points": 10, "n_domains": 3})
    assert main(["gen", "--spec", spec, "--out-dir", str(tmp_path / "rot")]) == EXIT_OK
    assert len(list((tmp_path / "rot").glob("inter_*.csv"))) == 3


def test_verify_exit_codes_with_sabotage(tmp_path, monkeypatch):
    from gradual_st import theory

    monkeypatch.setitem(theory.SUITES, "margin", ["baselines_fail", "hinge_failure"])
    out = tmp_path / "v.json"
    assert main(["verify", "--suite", "margin", "--workers", "1", "--out", str(out)]) == EXIT_OK
    assert [r["status"] for r in json.loads(out.read_text())] == ["pass", "pass"]
    assert main(["verify", "--suite", "margin", "--workers", "1", "--sabotage", "hinge_failure"]) == EXIT_FAIL
