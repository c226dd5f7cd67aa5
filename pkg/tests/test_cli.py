import csv
import io
import json
import os

import pytest

from lacelab import cli


def run_main(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_catalog(capsys):
    code, out, _ = run_main(["catalog", "--json"], capsys)
    assert code == 0
    entries = json.loads(out)
    assert len(entries) == 8
    by = {e["name"]: e for e in entries}
    assert by["triangle"]["bonds"] == 3 and by["triangle"]["single_states"] == 27
    assert by["K4"]["bonds"] == 6 and by["K4"]["pair_states"] == 531441
    code, out, _ = run_main(["catalog"], capsys)
    assert "box-2x3" in out and len(out.strip().splitlines()) == 9


def test_verify_lace_single_graph(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, _, _ = run_main(["verify-lace", "--graph", "triangle", "--p", "0.5", "--orders", "0", "1",
                           "--out", str(out)], capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["pass"] and len(rep["report"]["checks"]) == 2


def test_unknown_graph_exit_2(capsys):
    code, _, err = run_main(["verify-lace", "--graph", "nonesuch"], capsys)
    assert code == 2 and "nonesuch" in err


def test_bad_arguments_exit_2(capsys):
    assert cli.main(["verify-lace", "--p", "abc"]) == 2
    assert cli.main(["no-such-command"]) == 2
    assert cli.main(["check-conv", "--d", "2"]) == 2
    capsys.readouterr()


def test_greens_csv(capsys):
    code, out, _ = run_main(["greens", "--d", "3", "--side", "9", "--r", "1"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["x", "S_r(x)", "predicted", "ratio"]
    assert len(rows) == 1 + 9 // 2 + 1
    code, _, _ = run_main(["greens", "--d", "2", "--side", "9", "--r", "1"], capsys)
    assert code == 2


def test_check_conv(capsys):
    code, out, _ = run_main(["check-conv", "--d", "1", "--a", "2", "--b", "2"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["report"]["growth"] <= 1.05
    code, out, _ = run_main(["check-conv", "--d", "2", "--q", "1.5", "--sizes", "8", "16"], capsys)
    assert json.loads(out)["report"]["kind"] == "star"


def test_verify_switching_reports_readings(capsys):
    code, out, _ = run_main(["verify-switching", "--instances", "5", "--k", "1"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["report"]["path_instance"]["brute_force"] == [256, 256]
    assert rep["report"]["ghs_bk"]["1"]["reading"] == "joint"


def test_run_empty_suites(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"suites": []}))
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0
    assert json.loads((tmp_path / "o" / "summary.json").read_text()) == {"suites": []}


def test_run_config_errors(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text("{not json")
    assert cli.main(["run", "--config", str(cfg)]) == 2
    cfg.write_text(json.dumps({"suites": [{"name": "verify-lace", "graphs": ["nowhere"]}]}))
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2
    cfg.write_text(json.dumps({"suites": [{"name": "verify-lace", "tolerance": -1}]}))
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2
    cfg.write_text(json.dumps({"suites": [{"name": "dance"}]}))
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 2
    capsys.readouterr()


def test_run_budget_exit_3(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"suites": [{"name": "verify-lace", "graphs": ["box-2x3"],
                                           "p": [0.2], "orders": [0],
                                           "budgets": {"pair_states": 1000}}]}))
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 3
    assert "LACELAB_BUDGET" not in os.environ
    capsys.readouterr()


def test_run_failure_exit_1(tmp_path):
    # a growth limit below one cannot hold
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"suites": [{"name": "check-conv", "d": 1, "a": 2, "b": 2,
                                           "growth_max": 0.5}]}))
    assert cli.main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 1


def test_run_writes_reports_and_csv(tmp_path):
    cfg = {"suites": [{"name": "verify-lace", "graphs": ["single-bond", "triangle"], "p": [0.5],
                       "orders": [0, 1]},
                      {"name": "greens", "d": 3, "side": 9, "r": 0.5}],
           "output": {"format": "csv"}}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert cli.main(["run", "--config", str(path), "--out-dir", str(tmp_path / "o")]) == 0
    files = sorted(os.listdir(tmp_path / "o"))
    assert files == ["00-verify-lace.csv", "01-greens.csv", "summary.json", "timings.json"]
    rows = list(csv.DictReader(open(tmp_path / "o" / "00-verify-lace.csv")))
    assert len(rows) == 4 and all(r["pass"] == "True" for r in rows)


def test_run_deterministic_with_workers(tmp_path):
    cfg = {"suites": [{"name": "verify-switching", "instances": 10, "k": [1], "seed": 4},
                      {"name": "verify-lace", "graphs": ["triangle"], "p": [0.5], "orders": [0, 1],
                       "random_couplings": 2, "seed": 9}],
           "parallelism": 2}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    for d in ("a", "b"):
        assert cli.main(["run", "--config", str(path), "--out-dir", str(tmp_path / d)]) == 0
    for name in os.listdir(tmp_path / "a"):
        if name != "timings.json":
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    rep = json.loads((tmp_path / "a" / "01-verify-lace.json").read_text())
    assert "budget" in rep["report"] and "triangle" in rep["report"]["budget"]["graphs"]
