"""Command-line surface and exit codes."""

from __future__ import annotations

import json

import pytest

from lazyc.cli import main
from lazyc.scenario import TEMPLATE_DIR
from lazyc.wrap import load_lzc

from helpers import SCENARIOS


def test_transform_is_byte_stable(tmp_path):
    src = [str(TEMPLATE_DIR / "example.mcl"), str(TEMPLATE_DIR / "escrow.mcl")]
    outs = []
    for name in ("a.lzc", "b.lzc"):
        out = tmp_path / name
        assert main(["transform", *src, "--deposit", "100000", "--window", "100",
                     "--max-call-gas", "2000000", "--checkpoint-every", "5", "-o", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    lc = load_lzc(tmp_path / "a.lzc")
    assert lc.params.checkpoint_interval == 5 and lc.contract_names == ("Example", "Escrow")


def test_transform_bad_input(tmp_path):
    bad = tmp_path / "bad.mcl"
    bad.write_text("contract {")
    assert main(["transform", str(bad), "--deposit", "1", "--window", "1",
                 "-o", str(tmp_path / "x.lzc")]) == 1


def test_run_writes_files(tmp_path):
    trace, report = tmp_path / "t.ndjson", tmp_path / "r.json"
    assert main(["run", str(SCENARIOS / "golden.scn"), "--trace", str(trace),
                 "--report", str(report)]) == 0
    rep = json.loads(report.read_text())
    assert rep["verdicts"][0]["gamma"] == {"Ingrid": 4000}
    assert all(json.loads(line) for line in trace.read_text().splitlines())


def test_run_report_to_stdout(capsys):
    assert main(["run", str(SCENARIOS / "honest.scn"), "--seed", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["seed"] == 3


def test_run_scenario_error(tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("param deposit 1\n")
    assert main(["run", str(bad)]) == 2
    assert main(["check", str(bad)]) == 2


def test_run_invariant_violation(monkeypatch):
    from lazyc import chain as chain_mod
    monkeypatch.setattr(chain_mod.ChainState, "conservation_violations",
                        lambda self: ["forced"])
    assert main(["run", str(SCENARIOS / "honest.scn")]) == 3


def test_check_ok(capsys):
    assert main(["check", str(SCENARIOS / "timeout.scn")]) == 0


def test_bench(capsys):
    assert main(["bench", "--template", "counter", "--calls", "5", "--seed", "2"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["n_calls"] == 5 and rep["template"] == "counter"


def test_bench_schedule_file(tmp_path, capsys):
    sched = tmp_path / "s.txt"
    sched.write_text("storage_read = 300\n")
    assert main(["bench", "--template", "escrow", "--calls", "3",
                 "--schedule", str(sched)]) == 0
    capsys.readouterr()
    assert main(["bench", "--template", "nope", "--calls", "3"]) == 1


def test_usage_error():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
