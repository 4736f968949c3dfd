"""Scenario files: named profiles and streams plus a list of tasks to run.

Every task writes ``<name>.json`` (and ``<name>.csv`` when tabular) into the
output directory.  A task may carry an ``expect`` block; any mismatch makes
the run fail while still writing all reports.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .axioms import (
    AXIOMS,
    Battery,
    check_axiom,
    pointwise_continuity_probe,
    sup_continuity_probe,
    taxicab_continuity_probe,
)
from .fixtures import FLAGS, venn_s_series, venn_table
from .gallery import gallery, independence_matrix
from .profile import LambdaProfile, classify, lambda_at
from .rules import (
    GeometricRule,
    allocate,
    allocate_direct,
    recovered_values,
    total_allocated,
)
from .stream import Stream, value_at

log = logging.getLogger(__name__)

SCHEMA = "1"
TASK_TYPES = ("allocate", "classify", "axioms", "probes", "venn", "independence", "reconstruct")
MAX_BATTERY = 100_000
MAX_DEPTH = 10_000
MAX_WINDOW = 1_000_000


class ScenarioError(ValueError):
    """Parse or validation failure, anchored to a line of the scenario file."""

    def __init__(self, message: str, line: int = 1, path: str = "<scenario>"):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line
        self.path = path


@dataclass
class Task:
    name: str
    type: str
    params: dict
    line: int = 1


@dataclass
class Scenario:
    profiles: dict = field(default_factory=dict)
    streams: dict = field(default_factory=dict)
    tasks: list = field(default_factory=list)
    seed: int = 0
    tolerance: float = 1e-9

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "tolerance": self.tolerance,
            "profiles": [{"name": k, **p.to_dict()} for k, p in self.profiles.items()],
            "streams": [{"name": k, **s.to_dict()} for k, s in self.streams.items()],
            "tasks": [{"name": t.name, "type": t.type, **t.params} for t in self.tasks],
        }


# --------------------------------------------------------------------------
# parsing


def _line_of(text: str, name: Optional[str], fallback_key: str) -> int:
    """Line of the first ``"name": "<name>"`` entry, else of ``fallback_key``."""
    if name is not None:
        m = re.search(r'"name"\s*:\s*' + re.escape(json.dumps(name)), text)
        if m:
            return text.count("\n", 0, m.start()) + 1
    m = re.search(re.escape(json.dumps(fallback_key)) + r"\s*:", text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def _int_range(params: dict, key: str, lo: int, hi: int, default=None):
    v = params.get(key, default)
    if v is None:
        return None
    if isinstance(v, bool) or not isinstance(v, int) or not lo <= v <= hi:
        raise ValueError(f"{key} must be an integer in [{lo}, {hi}], got {v!r}")
    return v


def _window(params: dict, required: bool):
    w = params.get("window")
    if w is None:
        if required:
            raise ValueError("window [lo, hi] is required")
        return None
    if (
        not isinstance(w, list)
        or len(w) != 2
        or not all(isinstance(x, int) and not isinstance(x, bool) for x in w)
        or not w[0] <= w[1]
        or w[1] - w[0] > MAX_WINDOW
    ):
        raise ValueError(f"window must be [lo, hi] with lo <= hi, got {w!r}")
    return tuple(w)


def _resolve_rule(ref: str, profiles: dict):
    if ref.startswith("gallery:"):
        names = {g.name: g.rule for g in gallery()}
        key = ref.split(":", 1)[1]
        if key not in names:
            raise ValueError(f"unknown gallery rule {key!r}; known: {sorted(names)}")
        return names[key]
    key = ref.split(":", 1)[1] if ref.startswith("profile:") else ref
    if key not in profiles:
        raise ValueError(f"unknown profile {key!r}")
    return GeometricRule(profiles[key], key)


def _validate_task(t: Task, sc: Scenario) -> None:
    p = t.params
    if t.type in ("allocate", "classify", "probes") and p.get("profile") not in sc.profiles:
        raise ValueError(f"unknown profile {p.get('profile')!r}")
    if t.type == "allocate":
        if p.get("stream") not in sc.streams:
            raise ValueError(f"unknown stream {p.get('stream')!r}")
        _window(p, required=False)
    if t.type in ("axioms", "reconstruct"):
        if not isinstance(p.get("rule"), str):
            raise ValueError("rule reference is required")
        _resolve_rule(p["rule"], sc.profiles)
    if t.type == "reconstruct":
        _window(p, required=True)
    if t.type == "axioms":
        bad = [a for a in p.get("axioms", AXIOMS) if a not in AXIOMS]
        if bad:
            raise ValueError(f"unknown axioms {bad}; expected among {list(AXIOMS)}")
    if t.type in ("axioms", "independence", "probes"):
        b = p.get("battery", {})
        if not isinstance(b, dict) or set(b) - {"size", "max_window"}:
            raise ValueError("battery accepts only size and max_window")
        _int_range(b, "size", 1, MAX_BATTERY)
        _int_range(b, "max_window", 1, 4096)
    if t.type == "probes":
        _int_range(p, "depth", 1, MAX_DEPTH)
    if "expect" in p and not isinstance(p["expect"], dict):
        raise ValueError("expect must be an object")


def parse_scenario(text: str, path: str = "<scenario>") -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON: {e.msg} (column {e.colno})", e.lineno, path) from None
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object", 1, path)
    unknown = set(data) - {"seed", "tolerance", "profiles", "streams", "tasks"}
    if unknown:
        raise ScenarioError(f"unknown top-level keys {sorted(unknown)}", _line_of(text, None, sorted(unknown)[0]), path)
    sc = Scenario()
    try:
        sc.seed = _int_range(data, "seed", 0, 2**64 - 1, 0)
        tol = data.get("tolerance", 1e-9)
        if not isinstance(tol, (int, float)) or isinstance(tol, bool) or not 0 < tol < 1:
            raise ValueError(f"tolerance must lie in (0, 1), got {tol!r}")
        sc.tolerance = float(tol)
    except ValueError as e:
        raise ScenarioError(str(e), _line_of(text, None, "seed"), path) from None

    for section, target, build in (
        ("profiles", sc.profiles, LambdaProfile.from_dict),
        ("streams", sc.streams, Stream.from_dict),
    ):
        entries = data.get(section, [])
        if not isinstance(entries, list):
            raise ScenarioError(f"{section} must be a list", _line_of(text, None, section), path)
        for k, entry in enumerate(entries):
            name = entry.get("name") if isinstance(entry, dict) else None
            line = _line_of(text, name, section)
            if not isinstance(name, str):
                raise ScenarioError(f"{section}[{k}] needs a string name", line, path)
            if name in target:
                raise ScenarioError(f"duplicate {section[:-1]} name {name!r}", line, path)
            try:
                target[name] = build(entry)
            except (ValueError, TypeError, KeyError) as e:
                raise ScenarioError(f"{section[:-1]} {name!r}: {e}", line, path) from None

    tasks = data.get("tasks", [])
    if not isinstance(tasks, list):
        raise ScenarioError("tasks must be a list", _line_of(text, None, "tasks"), path)
    seen = set()
    for k, entry in enumerate(tasks):
        if not isinstance(entry, dict):
            raise ScenarioError(f"tasks[{k}] must be an object", _line_of(text, None, "tasks"), path)
        name = entry.get("name", f"task{k}")
        line = _line_of(text, entry.get("name"), "tasks")
        if not isinstance(name, str) or not re.fullmatch(r"[A-Za-z0-9_.\-]+", name):
            raise ScenarioError(f"task name {name!r} must be a plain file-name token", line, path)
        if name in seen:
            raise ScenarioError(f"duplicate task name {name!r}", line, path)
        seen.add(name)
        kind = entry.get("type")
        if kind not in TASK_TYPES:
            raise ScenarioError(f"task {name!r}: unknown type {kind!r}; expected one of {', '.join(TASK_TYPES)}", line, path)
        params = {key: v for key, v in entry.items() if key not in ("name", "type")}
        task = Task(name, kind, params, line)
        try:
            _validate_task(task, sc)
        except (ValueError, TypeError) as e:
            raise ScenarioError(f"task {name!r}: {e}", line, path) from None
        sc.tasks.append(task)
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read scenario: {e.strerror}", 1, str(path)) from None
    return parse_scenario(text, str(path))


# --------------------------------------------------------------------------
# tasks


@dataclass
class TaskResult:
    name: str
    type: str
    ok: bool
    report: dict
    table: Optional[list] = None  # rows for the CSV report
    error: Optional[str] = None
    mismatches: list = field(default_factory=list)


def _close(a, b, tol) -> bool:
    if isinstance(a, bool) or isinstance(b, bool) or isinstance(a, str) or isinstance(b, str):
        return a == b
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_close(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return abs(a - b) <= tol * max(1.0, abs(b))
    return a == b


def _compare(actual: dict, expect: dict, tol: float) -> list[dict]:
    out = []
    for key, want in expect.items():
        got = actual.get(key, "<missing>")
        if not _close(got, want, tol):
            out.append({"key": key, "expected": want, "actual": got})
    return out


def _battery(sc: Scenario, params: dict, default_size: int = 200) -> Battery:
    b = params.get("battery", {})
    return Battery(
        seed=sc.seed,
        size=b.get("size", default_size),
        max_window=b.get("max_window", 64),
        tol=sc.tolerance,
    )


def _run_allocate(sc: Scenario, t: Task):
    p = sc.profiles[t.params["profile"]]
    r = sc.streams[t.params["stream"]]
    window = _window(t.params, required=False) or (r.window_lo, r.window_hi)
    res = allocate(p, r, window)
    oracle = [allocate_direct(p, r, i) for i in range(*window)]
    rows = [
        {"generation": i, "lambda": lambda_at(p, i), "income": value_at(r, i), "allocation": a, "oracle": o}
        for i, a, o in zip(range(*window), res.allocations, oracle)
    ]
    report = res.to_dict()
    report["total_allocated"] = total_allocated(p, r)
    report["oracle_max_gap"] = max((abs(a - o) for a, o in zip(res.allocations, oracle)), default=0.0)
    actual = dict(report)
    return report, rows, actual


def _run_classify(sc: Scenario, t: Task):
    rep = classify(sc.profiles[t.params["profile"]])
    report = rep.to_dict()
    return report, None, rep.flags() | {"sup_S": report["sup_S"]}


def _run_axioms(sc: Scenario, t: Task):
    rule = _resolve_rule(t.params["rule"], sc.profiles)
    battery = _battery(sc, t.params)
    verdicts = {a: check_axiom(rule, a, battery) for a in t.params.get("axioms", AXIOMS)}
    rows = [{"axiom": a, "outcome": v.outcome, "violation": v.violation} for a, v in verdicts.items()]
    report = {"rule": t.params["rule"], "verdicts": [v.to_dict() for v in verdicts.values()]}
    return report, rows, {a: v.outcome for a, v in verdicts.items()}


def _run_probes(sc: Scenario, t: Task):
    p = sc.profiles[t.params["profile"]]
    depth = t.params.get("depth", 50)
    battery = _battery(sc, t.params, default_size=50)
    verdicts = {
        "sup_continuity": sup_continuity_probe(p, depth, battery, sc.tolerance),
        "pointwise_continuity": pointwise_continuity_probe(p, depth, tol=sc.tolerance),
        "taxicab_continuity": taxicab_continuity_probe(GeometricRule(p), streams=battery.labelled, tol=sc.tolerance),
    }
    rows = [{"probe": k, "outcome": v.outcome, "violation": v.violation} for k, v in verdicts.items()]
    report = {"profile": t.params["profile"], "depth": depth, "probes": {k: v.to_dict() for k, v in verdicts.items()}}
    return report, rows, {k: v.outcome for k, v in verdicts.items()}


def _run_venn(sc: Scenario, t: Task):
    table = venn_table()
    series = venn_s_series()
    report = {"rows": table, "block_statistic": series}
    mismatches = [f"{r['profile']} (row {r['row']})" for r in table if not r["match"]]
    mismatches += [f"S at n={r['n']}" for r in series if not r["match"]]
    cols = ["row", "profile", *FLAGS, "sup_S", "expected", "match"]
    rows = [{k: r[k] for k in cols} for r in table]
    return report, rows, {"mismatches": mismatches}


def _run_independence(sc: Scenario, t: Task):
    m = independence_matrix(_battery(sc, t.params))
    report = m.to_dict()
    rows = list(csv.DictReader(io.StringIO(m.to_csv())))
    return report, rows, {"mismatches": [f"{x['rule']}/{x['axiom']}" for x in m.mismatches()]}


def _run_reconstruct(sc: Scenario, t: Task):
    ref = t.params["rule"]
    rule = _resolve_rule(ref, sc.profiles)
    lo, hi = _window(t.params, required=True)
    vals = recovered_values(rule, (lo, hi))
    feasible = all(0.0 <= v <= 1.0 for v in vals.values())
    rows = [{"generation": i, "recovered": v, "feasible": 0.0 <= v <= 1.0} for i, v in vals.items()]
    report = {"rule": ref, "window": [lo, hi], "feasible": feasible, "recovered": rows}
    if isinstance(rule, GeometricRule):
        err = max((abs(v - lambda_at(rule.profile, i)) for i, v in vals.items()), default=0.0)
        report["max_error"] = err
    return report, rows, {"feasible": feasible, **({"max_error": report["max_error"]} if "max_error" in report else {})}


_RUNNERS = {
    "allocate": _run_allocate,
    "classify": _run_classify,
    "axioms": _run_axioms,
    "probes": _run_probes,
    "venn": _run_venn,
    "independence": _run_independence,
    "reconstruct": _run_reconstruct,
}


def run_task(sc: Scenario, t: Task) -> TaskResult:
    try:
        report, rows, actual = _RUNNERS[t.type](sc, t)
    except Exception as e:  # task failures are reported, not raised
        log.exception("task %s failed", t.name)
        return TaskResult(t.name, t.type, False, {"error": f"{type(e).__name__}: {e}"}, error=str(e))
    mismatches = []
    if t.type in ("venn", "independence"):
        mismatches = [{"key": m} for m in actual["mismatches"]]
    if "expect" in t.params:
        mismatches += _compare(actual, t.params["expect"], sc.tolerance)
    report = {"task": t.name, "type": t.type, **report, "expect_mismatches": mismatches}
    return TaskResult(t.name, t.type, not mismatches, report, rows, None, mismatches)


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def write_report(res: TaskResult, out_dir: Path) -> None:
    payload = {"schema": SCHEMA, "ok": res.ok, **res.report}
    (out_dir / f"{res.name}.json").write_text(json.dumps(_jsonable(payload), indent=2) + "\n")
    if res.table:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(res.table[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(res.table)
        (out_dir / f"{res.name}.csv").write_text(buf.getvalue())


def run_scenario(sc: Scenario, out_dir) -> list[TaskResult]:
    out_dir = Path(out_dir)
    if sc.tasks:
        out_dir.mkdir(parents=True, exist_ok=True)
    results = []
    for t in sc.tasks:
        res = run_task(sc, t)
        write_report(res, out_dir)
        results.append(res)
    return results
