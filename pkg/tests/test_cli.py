import json
import shutil
import subprocess

import pytest

from tmkit.cli import main

from conftest import CORPUS, SCENARIOS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_ok(capsys):
    code, out, err = run(capsys, "validate", CORPUS / "gate.tm")
    assert code == 0 and out == "" and err == ""


def test_validate_missing_file(capsys):
    code, _, err = run(capsys, "validate", CORPUS / "missing.tm")
    assert code == 2 and "cannot read" in err


def test_validate_bad_flow(capsys):
    code, out, err = run(capsys, "validate", CORPUS / "bad-flow.tm")
    assert code == 1 and out == ""
    assert "FLOW-001" in err


def test_validate_json_lines(capsys):
    code, _, err = run(capsys, "validate", "--json", CORPUS / "bad-flow.tm")
    assert code == 1
    [line] = err.splitlines()
    d = json.loads(line)
    assert d["ruleId"] == "FLOW-001" and d["severity"] == "error"
    assert d["location"]["startLine"] == 7


def test_color_is_opt_in(capsys, monkeypatch):
    monkeypatch.setenv("TM_COLOR", "always")
    _, _, err = run(capsys, "validate", CORPUS / "bad-flow.tm")
    assert err.startswith("\033[31m")
    monkeypatch.setenv("TM_COLOR", "never")
    _, _, err = run(capsys, "validate", CORPUS / "bad-flow.tm")
    assert "\033[" not in err


def test_events(capsys):
    code, out, _ = run(capsys, "events", CORPUS / "gate.tm")
    assert code == 0
    lines = out.splitlines()
    assert [line.split("\t")[0] for line in lines] == ["E1", "E2", "E3", "E4", "E5"]


def test_events_json(capsys):
    code, out, _ = run(capsys, "events", "--json", CORPUS / "caesar.tm")
    rows = {r["id"]: r for r in map(json.loads, out.splitlines())}
    assert rows["e"]["subEvents"] == ["e1", "e2"]
    assert len(rows["e"]["atomic"]) == len(rows["e"]["region"])


def test_plans(capsys):
    code, out, _ = run(capsys, "plans", CORPUS / "delivery.tm", "--start", "E1")
    data = json.loads(out)
    assert code == 0 and len(data["plans"]) == 3 and len(data["commonPrefix"]) == 7


def test_plans_unknown_start(capsys):
    code, _, err = run(capsys, "plans", CORPUS / "gate.tm", "--start", "E99")
    assert code == 5 and "UnknownEvent" in err


def test_plans_unknown_chronology(capsys):
    code, _, _ = run(capsys, "plans", CORPUS / "gate.tm", "--chronology", "nope")
    assert code == 2


def test_simulate_closed(capsys):
    code, out, _ = run(capsys, "simulate", CORPUS / "gate.tm", "--scenario", SCENARIOS / "gate--closed.json")
    steps = [json.loads(x) for x in out.splitlines()]
    assert code == 0 and len(steps) == 5 and steps[-1]["event"] == "E3"


def test_simulate_office2_matches_plan2(capsys):
    _, plans, _ = run(capsys, "plans", CORPUS / "delivery.tm", "--start", "E1")
    _, out, _ = run(capsys, "simulate", CORPUS / "delivery.tm", "--scenario", SCENARIOS / "delivery--office2.json")
    assert [json.loads(x)["event"] for x in out.splitlines()] == json.loads(plans)["plans"][1]


def test_simulate_missing_choice(capsys):
    code, out, err = run(
        capsys, "simulate", CORPUS / "gate.tm", "--scenario", SCENARIOS / "errors" / "gate--missing-choice.json"
    )
    assert code == 3 and out == "" and "ChoiceMissing" in err


def test_simulate_step_limit_writes_partial(capsys):
    code, out, _ = run(
        capsys, "simulate", CORPUS / "gate.tm", "--scenario", SCENARIOS / "errors" / "gate--step-limit.json"
    )
    assert code == 4 and len(out.splitlines()) == 3


def test_simulate_bad_scenario_file(capsys, tmp_path):
    bad = tmp_path / "s.json"
    bad.write_text("[1, 2")
    code, _, _ = run(capsys, "simulate", CORPUS / "gate.tm", "--scenario", bad)
    assert code == 2
    bad.write_text('{"chronology": "gate", "start": "E7"}')
    code, _, _ = run(capsys, "simulate", CORPUS / "gate.tm", "--scenario", bad)
    assert code == 2


def test_simulate_invalid_model(capsys):
    code, _, _ = run(capsys, "simulate", CORPUS / "bad-flow.tm", "--scenario", SCENARIOS / "gate--closed.json")
    assert code == 1


def test_export_out_file(capsys, tmp_path):
    target = tmp_path / "caesar.dot"
    code, out, _ = run(capsys, "export", CORPUS / "caesar.tm", "--level", "behavior", "--out", target)
    assert code == 0 and out == ""
    assert target.read_text().startswith("digraph tm {")


def test_export_json(capsys):
    code, out, _ = run(capsys, "export", CORPUS / "gate.tm", "--format", "json")
    assert code == 0 and json.loads(out)["tmVersion"] == "1.0"


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


@pytest.mark.skipif(shutil.which("tm") is None, reason="console script not installed")
def test_console_script():
    p = subprocess.run(["tm", "plans", str(CORPUS / "gate.tm"), "--start", "E1"], capture_output=True, text=True)
    assert p.returncode == 0
    assert json.loads(p.stdout)["plans"] == [["E1", "E2", "E3"], ["E1", "E4", "E5", "E2", "E3"]]
