from __future__ import annotations

import json

import pytest

from conftest import FIXTURES
from tglp.cli import main


def fx(name):
    return str(FIXTURES / f"{name}.glp")


def test_check_well_typed(capsys):
    assert main(["check", fx("merge")]) == 0
    assert capsys.readouterr().out.strip() == "well-typed"


def test_check_ill_typed_reports_locations(capsys):
    assert main(["check", fx("merge_bad_decl")]) == 1
    err = capsys.readouterr().err.splitlines()
    assert err and all(line.startswith(fx("merge_bad_decl") + ":") for line in err)
    assert err[0].split(":")[1:3] == ["5", "1"]


def test_check_coverage_gap_names_the_path(capsys):
    assert main(["check", fx("merge_no_base")]) == 1
    assert "(0,↓) --> merge/3 --(2,↓)--> []" in capsys.readouterr().err


def test_strict_duality_flag(capsys):
    assert main(["check", fx("fileop_use")]) == 0
    assert main(["check", "--strict-duality", fx("fileop_use")]) == 1


def test_dump_moded(capsys):
    main(["check", "--dump-moded", fx("merge")])
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "↓merge(↓[↓X?|Xs?], Ys?, ↑[↑X|Zs]) :- ↑merge(Ys?, Xs?, Zs)."


def test_automaton_dump(capsys):
    assert main(["automaton", fx("merge"), "--type", "Stream"]) == 0
    assert capsys.readouterr().out.splitlines() == [
        "Stream --([],0,↑)--> ✓",
        "Stream --(cons,2,1,↑)--> _",
        "Stream --(cons,2,2,↑)--> Stream",
    ]


def test_parse_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.glp"
    bad.write_text("procedure p(Integer?).\np(X :- q.\n")
    assert main(["check", str(bad)]) == 2
    assert capsys.readouterr().err.startswith(f"{bad}:2:5:")


def test_usage_error_exits_2(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["run", fx("merge")]) == 2


def test_run_and_trace(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    code = main(["run", fx("copy_merge"), "--goal", "copy([1,2,3|Xs?],Xs1), copy([a,b|Ys?],Ys1), merge(Xs1?,Ys1?,Zs)",
                 "--policy", "eager-left", "--trace", str(trace)])
    assert code == 0
    out = capsys.readouterr().out
    assert "status: deadlock after 10 steps" in out
    assert "Zs := [1, a, 2, b, 3|" in out
    records = [json.loads(l) for l in trace.read_text(encoding="utf-8").splitlines()]
    assert records[0]["kind"] == "header" and records[-1]["kind"] == "final"
    assert main(["trace", "--verify", str(trace)]) == 0
    verdicts = capsys.readouterr().out.splitlines()
    assert verdicts[-1] == "verdict: ok" and len(verdicts) == 12


def test_failed_run_exits_1(capsys):
    assert main(["run", fx("merge_no_base"), "--goal", "merge([], [], Zs)"]) == 1


def test_machine_readable_run(capsys):
    main(["--format", "jsonl", "run", fx("lookup_fixed"), "--goal", 'lookup("b", V, [pair("a",1), pair("b",2)], L)'])
    rec = json.loads(capsys.readouterr().out)
    assert rec["status"] == "success" and rec["sigma"]["V"] == "2"


def test_sample(capsys):
    assert main(["--format", "jsonl", "trace", fx("merge"), "--sample", "30", "--depth", "4", "--seed", "2"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["procedure"] == "merge/3" and rec["covariance_violations"] == []


def test_seed_from_environment(monkeypatch, capsys):
    monkeypatch.setenv("TGLP_SEED", "11")
    from tglp.cli import build_parser

    args = build_parser().parse_args(["run", fx("merge"), "--goal", "merge([], [], Z)"])
    assert args.seed == 11
