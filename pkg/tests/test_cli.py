from __future__ import annotations

import json
import subprocess
import sys

from conftest import CORPUS, EP
from etsx.cli import main

MOT = CORPUS / "motivating"


def run(*args) -> int:
    return main([str(a) for a in args])


def pipeline(tmp_path):
    store = tmp_path / "stores" / "fw.jsonl"
    store.parent.mkdir()
    assert run("extract", "--framework", MOT / "program.mir", "--out", store) == 0
    ranking = tmp_path / "ranking.json"
    assert run("locate", "--program", MOT / "program.mir", "--report", MOT / "crash.txt",
               "--ets-store", store.parent, "--out", ranking) == 0
    return store, ranking


def test_extract_match_locate(tmp_path):
    store, ranking = pipeline(tmp_path)
    assert store.read_text().splitlines()[0].startswith('{"format": "ets-store"')
    out = tmp_path / "match.json"
    assert run("match", "--report", MOT / "crash.txt", "--stores", store, "--out", out) == 0
    assert json.loads(out.read_text())["related_type"] == "OnlyKeyAPI"
    r = json.loads(ranking.read_text())
    assert r["candidates"][0]["sig"] == "cgeo.geocaching.DataStore$PreparedStmt.clearPreparedStmts"
    assert "report" in r and "ets" in r


def test_cis_and_explain(tmp_path):
    _, ranking = pipeline(tmp_path)
    assert run("cis", "--ranking", ranking, "--program", MOT / "program.mir", "--out", tmp_path / "cis") == 0
    files = sorted((tmp_path / "cis").glob("*.json"))
    assert files and json.loads(files[0].read_text())["keyInfo"]["ep"] == "EP4"
    base = tmp_path / "explain"
    assert run("explain", "--ranking", ranking, "--program", MOT / "program.mir",
               "--replies", MOT / "mock.json", "--out", base) == 0
    rep = json.loads((tmp_path / "explain.json").read_text())
    assert rep["provenance"]["constraint"]["status"] == "valid"
    assert (tmp_path / "explain.txt").read_text().startswith("Exception: java.lang.IllegalStateException")


def test_eval_writes_json_and_table(tmp_path):
    out = tmp_path / "eval.json"
    assert run("eval", "--corpus", CORPUS, "--ablate", "b4", "--out", out) == 0
    d = json.loads(out.read_text())
    assert d["config"]["ablate"] == ["b4"]
    assert (tmp_path / "eval.txt").exists()


def test_bad_inputs_exit_with_two(tmp_path, capsys):
    bad = tmp_path / "bad.mir"
    bad.write_text("not mir\n")
    assert run("extract", "--framework", bad) == 2
    assert "etsx:" in capsys.readouterr().err


def test_match_failure_exits_with_three(tmp_path):
    store, _ = pipeline(tmp_path)
    assert run("match", "--report", EP / "ep2_value" / "crash.txt", "--stores", store) == 3


def test_console_entry_point_runs():
    r = subprocess.run([sys.executable, "-m", "etsx.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("etsx ")
