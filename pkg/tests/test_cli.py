import json
import subprocess
import sys

import pytest

from evmkt.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip().startswith("{") else out), err


def test_run_single_slot_tp_vcg(capsys):
    code, report, _ = run_cli(capsys, "run", "--builtin", "ex1-bb", "--mechanism", "tp-vcg")
    assert code == 0
    assert report["total_payment"] == pytest.approx(-1.0, abs=1e-9)
    assert [e["real_time_payment"] for e in report["evs"]] == pytest.approx([-10.0, 7.0], abs=1e-9)
    assert report["config"]["mechanism"] == "tp-vcg"
    assert report["config"]["tolerance"] == 1e-9


def test_run_winner_determination(capsys):
    code, report, _ = run_cli(capsys, "run", "--builtin", "exB-welfare", "--mechanism", "vcg")
    assert code == 0
    assert report["welfare"] == 17
    assert [e["bundle"] for e in report["evs"]] == [[1], [2]]


def test_run_posted_price_reverse_order(capsys):
    code, report, _ = run_cli(capsys, "run", "--builtin", "ex4-order", "--mechanism", "posted-price",
                              "--order", "2,1")
    assert code == 0
    assert [q["ev"] for q in report["queries"]] == ["2", "1"]
    assert [q["response"] for q in report["queries"]] == ["keep", "keep"]
    assert report["welfare"] == 4


def test_check_budget_violation_exits_one(capsys):
    code, report, _ = run_cli(capsys, "check", "--builtin", "ex1-bb", "--mechanism", "tp-vcg", "--properties", "bb")
    assert code == 1
    (r,) = report["reports"]
    assert r["verdict"] == "violated"
    assert r["witness"]["payment_total"] == pytest.approx(-1.0, abs=1e-9)


def test_check_posted_price_holds(capsys):
    code, report, _ = run_cli(capsys, "check", "--builtin", "ex4-order", "--mechanism", "posted-price",
                              "--properties", "ic,ra,ir,bb,ns")
    assert code == 0
    assert [r["verdict"] for r in report["reports"]] == ["holds"] * 5


def test_check_empty_property_list(capsys):
    code, report, _ = run_cli(capsys, "check", "--builtin", "ex4-order", "--mechanism", "posted-price",
                              "--properties", "")
    assert code == 0
    assert report["reports"] == []


def test_check_constrained_efficiency_manipulable(capsys):
    code, report, _ = run_cli(capsys, "check", "--builtin", "ex3-ce", "--mechanism", "constrained-eff",
                              "--properties", "ic,ce")
    assert code == 1
    verdicts = {r["property"]: r["verdict"] for r in report["reports"]}
    assert verdicts == {"IC": "violated", "CE": "holds"}


def test_scan_single_trial(capsys):
    code, report, _ = run_cli(capsys, "scan", "--trials", "1")
    assert code == 0
    assert report["trials"] == 1
    assert all(c["pass"] + c["fail"] == 1 for c in report["properties"].values())
    assert report["efficiency_bound"]["pass"] == 1


def test_scan_tp_vcg_budget_violations_under_adversarial_entry(capsys):
    code, report, _ = run_cli(capsys, "scan", "--mechanism", "tp-vcg", "--trials", "100", "--seed", "7",
                              "--properties", "bb", "--day-ahead", "adversarial")
    assert code == 1
    assert report["properties"]["BB"]["fail"] > 0
    assert all(f["verdict"] == "violated" for f in report["failures"])


def test_paper_examples_gate(capsys):
    code, report, err = run_cli(capsys, "paper-examples")
    assert code == 0
    assert report["results"] and all(r["ok"] for r in report["results"])
    assert "FAIL" not in err


def test_output_files_are_byte_identical(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        subprocess.run([sys.executable, "-m", "evmkt", "scan", "--mechanism", "vcg", "--trials", "5",
                        "--seed", "3", "--out", str(p)], check=True)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_tolerance_env_var(capsys, monkeypatch):
    monkeypatch.setenv("EVMKT_TOLERANCE", "0.5")
    code, report, _ = run_cli(capsys, "check", "--builtin", "ex1-bb", "--mechanism", "tp-vcg", "--properties", "bb")
    assert report["config"]["tolerance"] == 0.5
    assert code == 1  # a deficit of 1 is beyond a tolerance of 0.5
    monkeypatch.setenv("EVMKT_TOLERANCE", "2")
    code, _, _ = run_cli(capsys, "check", "--builtin", "ex1-bb", "--mechanism", "tp-vcg", "--properties", "bb")
    assert code == 0
    monkeypatch.setenv("EVMKT_TOLERANCE", "abc")
    code, _, _ = run_cli(capsys, "check", "--builtin", "ex1-bb", "--mechanism", "tp-vcg", "--properties", "bb")
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["run", "--builtin", "no-such-scenario", "--mechanism", "vcg"],
    ["run", "--builtin", "ex1-bb", "--mechanism", "tp-vcg", "--order", "2,1"],
    ["run", "--builtin", "ex1-bb", "--mechanism", "vcg", "--price-rule", "simple"],
    ["run", "--builtin", "ex4-order", "--mechanism", "posted-price", "--order", "1,3"],
    ["check", "--builtin", "ex4-order", "--mechanism", "posted-price", "--properties", "speed"],
    ["scan", "--trials", "0"],
])
def test_usage_errors(capsys, argv):
    code = main(argv)
    capsys.readouterr()
    assert code == 2


def test_argparse_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["run"])
    assert info.value.code == 2


def test_invalid_scenario_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"format_version": 1, "T": 2, "evs": []}))
    assert main(["run", "--scenario", str(bad), "--mechanism", "vcg"]) == 3
    assert "missing required field 'N'" in capsys.readouterr().err
    assert main(["run", "--scenario", str(tmp_path / "missing.json"), "--mechanism", "vcg"]) == 3


def test_generate_then_run(tmp_path, capsys):
    path = tmp_path / "g.json"
    assert main(["generate", "--kind", "additive", "-T", "2", "-N", "1", "--evs", "3", "--seed", "4",
                 "--out", str(path)]) == 0
    code, report, _ = run_cli(capsys, "run", "--scenario", str(path), "--mechanism", "posted-price")
    assert code == 0
    assert len(report["evs"]) == 3


def test_list(capsys):
    assert main(["list"]) == 0
    assert "ex1-bb" in capsys.readouterr().out
