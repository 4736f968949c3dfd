import csv
import json
from pathlib import Path

import pytest

from geotransfer.cli import EXIT_BAD_SCENARIO, EXIT_OK, EXIT_TASK_FAILED, main
from geotransfer.fixtures import builtin_fixtures
from geotransfer.scenario import ScenarioError, parse_scenario, run_scenario


def write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data, indent=2))
    return path


BASE = {
    "seed": 5,
    "profiles": [
        {"name": "half", "right_tail": {"kind": "constant", "value": 0.5}, "left_tail": 0.5},
        {"name": "two_step", "values": [0.5, 0.3333333333333333]},
    ],
    "streams": [{"name": "six_three", "values": [6, 3]}, {"name": "e0", "values": [1]}],
}


def scenario(*tasks):
    return dict(BASE, tasks=list(tasks))


def test_empty_task_list(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, scenario())), "--out", str(out)]) == EXIT_OK
    assert not out.exists() or not any(out.iterdir())


def test_allocate_reports(tmp_path, capsys):
    task = {
        "name": "alloc",
        "type": "allocate",
        "profile": "two_step",
        "stream": "six_three",
        "window": [0, 3],
        "expect": {"allocations": [3, 2, 4]},
    }
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, scenario(task))), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "alloc.json").read_text())
    assert report["schema"] == "1" and report["ok"]
    assert report["allocations"] == pytest.approx([3.0, 2.0, 4.0])
    rows = list(csv.DictReader((out / "alloc.csv").open()))
    assert [float(r["allocation"]) for r in rows] == pytest.approx([3.0, 2.0, 4.0])
    assert "1/1 tasks ok" in capsys.readouterr().out


def test_expectation_mismatch_fails_but_writes(tmp_path):
    task = {"name": "c", "type": "classify", "profile": "half", "expect": {"in_B": False}}
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, scenario(task))), "--out", str(out)]) == EXIT_TASK_FAILED
    report = json.loads((out / "c.json").read_text())
    assert not report["ok"] and report["expect_mismatches"][0]["key"] == "in_B"


def test_json_syntax_error_is_line_anchored(tmp_path, capsys):
    path = write(tmp_path, '{\n  "seed": 1,\n  "tasks": [,]\n}\n')
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == EXIT_BAD_SCENARIO
    assert f"{path}:3:" in capsys.readouterr().err


def test_validation_error_points_at_task(tmp_path, capsys):
    task = {"name": "bad_task", "type": "allocate", "profile": "nope", "stream": "e0"}
    path = write(tmp_path, scenario(task))
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == EXIT_BAD_SCENARIO
    err = capsys.readouterr().err
    line = next(i for i, text in enumerate(path.read_text().splitlines(), 1) if '"bad_task"' in text)
    assert f":{line}:" in err and "unknown profile" in err


@pytest.mark.parametrize(
    "task,needle",
    [
        ({"name": "t", "type": "dance"}, "unknown type"),
        ({"name": "t", "type": "reconstruct", "rule": "half"}, "window"),
        ({"name": "t", "type": "probes", "profile": "half", "depth": 0}, "depth"),
        ({"name": "t", "type": "axioms", "rule": "half", "axioms": ["fairness"]}, "unknown axioms"),
        ({"name": "t", "type": "axioms", "rule": "gallery:nope"}, "unknown gallery rule"),
        ({"name": "t", "type": "independence", "battery": {"size": -1}}, "size"),
        ({"name": "../t", "type": "venn"}, "file-name"),
    ],
)
def test_validation_errors(task, needle):
    with pytest.raises(ScenarioError, match=needle):
        parse_scenario(json.dumps(scenario(task)))


def test_bad_profile_definition():
    data = scenario()
    data["profiles"] = [{"name": "p", "values": [2.0]}]
    with pytest.raises(ScenarioError, match="profile 'p'"):
        parse_scenario(json.dumps(data))


def test_duplicate_task_names():
    with pytest.raises(ScenarioError, match="duplicate"):
        parse_scenario(json.dumps(scenario({"name": "v", "type": "venn"}, {"name": "v", "type": "venn"})))


def test_venn_task(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, scenario({"name": "venn", "type": "venn"}))), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "venn.csv").open()))
    assert sorted({int(r["row"]) for r in rows}) == [1, 2, 3, 4, 5, 6]
    assert all(r["match"] == "True" for r in rows)


def test_reconstruct_tasks(tmp_path):
    tasks = [
        {"name": "r1", "type": "reconstruct", "rule": "two_step", "window": [-2, 4], "expect": {"feasible": True, "max_error": 0.0}},
        {"name": "r2", "type": "reconstruct", "rule": "gallery:double", "window": [0, 3], "expect": {"feasible": False}},
    ]
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, scenario(*tasks))), "--out", str(out)]) == 0
    assert [r["recovered"] for r in json.loads((out / "r2.json").read_text())["recovered"]] == [2.0] * 3


def test_axioms_task_with_seed_override(tmp_path):
    task = {"name": "ax", "type": "axioms", "rule": "gallery:double", "axioms": ["feasibility"], "battery": {"size": 5}}
    out = tmp_path / "out"
    path = write(tmp_path, scenario(task))
    assert main(["run", str(path), "--out", str(out), "--seed", "99"]) == 0
    report = json.loads((out / "ax.json").read_text())
    assert report["verdicts"][0]["battery"]["seed"] == 99
    assert report["verdicts"][0]["outcome"] == "fail"


def test_independence_task_reports_mismatches(tmp_path):
    task = {"name": "ind", "type": "independence", "battery": {"size": 5, "max_window": 8}}
    out = tmp_path / "out"
    code = main(["run", str(write(tmp_path, scenario(task))), "--out", str(out)])
    report = json.loads((out / "ind.json").read_text())
    cells = {(m["rule"], m["axiom"]) for m in report["mismatches"]}
    assert code == (EXIT_OK if not cells else EXIT_TASK_FAILED)
    lines = (out / "ind.csv").read_text().splitlines()
    assert len(lines) == 6


def test_round_trip_reproduces_reports(tmp_path):
    tasks = [
        {"name": "a", "type": "allocate", "profile": "half", "stream": "e0", "window": [-2, 6]},
        {"name": "p", "type": "probes", "profile": "half", "depth": 10, "battery": {"size": 5}},
        {"name": "x", "type": "axioms", "rule": "half", "battery": {"size": 5}},
    ]
    sc = parse_scenario(json.dumps(scenario(*tasks)))
    again = parse_scenario(json.dumps(sc.to_dict()))
    run_scenario(sc, tmp_path / "one")
    run_scenario(again, tmp_path / "two")
    for name in ("a.json", "a.csv", "p.json", "x.json"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_builtin_fixtures_content():
    fx = builtin_fixtures()
    profiles = {p["name"]: p for p in fx["profiles"]}
    assert profiles["example1"]["right_tail"] == {"kind": "formula", "name": "example1"}
    for name in ("full_transfer", "uniform_quarter", "uniform_half", "no_transfer"):
        assert profiles[name]["left_tail"]["kind"] == "constant"
    for name in ("venn_blocks", "periodic_one_half", "step_unit_left", "step_zero_left"):
        assert name in profiles
    types = {t["type"] for t in fx["tasks"]}
    assert types == {"allocate", "classify", "axioms", "probes", "venn", "independence", "reconstruct"}
    parse_scenario(json.dumps(fx))


def test_bad_overrides(tmp_path):
    path = write(tmp_path, scenario())
    assert main(["run", str(path), "--out", str(tmp_path), "--tolerance", "2"]) == EXIT_BAD_SCENARIO
    assert main(["run", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_BAD_SCENARIO


def test_shipped_demo_scenario(tmp_path):
    demo = Path(__file__).resolve().parent.parent / "scenarios" / "demo.json"
    assert main(["run", str(demo), "--out", str(tmp_path)]) == EXIT_OK
    assert len(list(tmp_path.glob("*.json"))) == 6
