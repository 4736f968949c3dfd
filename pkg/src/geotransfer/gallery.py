"""Five non-geometric rules, each breaking exactly one characterizing axiom."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .profile import uniform
from .rules import Rule, apply_geometric
from .stream import (
    GeometricTail,
    Stream,
    is_finite_support,
    scale,
    value_at,
    with_value,
)

CHARACTERIZING_AXIOMS = (
    "feasibility",
    "independence_future_income",
    "scale_invariance",
    "continuity",
    "consistency",
)


class DoubleRule(Rule):
    """``phi_i(r) = 2 r_i``."""

    name = "double"

    def __call__(self, r: Stream) -> Stream:
        return scale(r, 2.0)


class SortingRule(Rule):
    """Generations 0 and 1 receive the smaller and larger of ``r_0, r_1``; others keep their income."""

    name = "sorting"

    def __call__(self, r: Stream) -> Stream:
        a, b = value_at(r, 0), value_at(r, 1)
        lo, hi = (a, b) if a <= b else (b, a)
        return with_value(with_value(r, 0, lo), 1, hi)


class ScaleBreakingRule(Rule):
    """Generation 0 keeps ``r_0^2 / (1 + r_0)`` and hands the rest of ``r_0`` to generation 1."""

    name = "scale_breaking"

    def __call__(self, r: Stream) -> Stream:
        r0, r1 = value_at(r, 0), value_at(r, 1)
        kept = r0 * r0 / (1.0 + r0)
        return with_value(with_value(r, 0, kept), 1, r1 + (r0 - kept))


class FiniteSupportSwitchRule(Rule):
    """Identity on finitely supported streams, uniform geometric rule with share 1/2 otherwise."""

    name = "finite_support_switch"

    def __init__(self):
        self.profile = uniform(0.5)

    def __call__(self, r: Stream) -> Stream:
        if is_finite_support(r):
            return r
        return apply_geometric(self.profile, r)


class MovingAverageRule(Rule):
    """``phi_i(r) = (r_i + r_(i-1) + r_(i-2)) / 4``."""

    name = "moving_average"

    def __call__(self, r: Stream) -> Stream:
        lo, hi = r.window_lo, r.window_hi + 2
        vals = tuple(
            (value_at(r, i) + value_at(r, i - 1) + value_at(r, i - 2)) / 4.0 for i in range(lo, hi)
        )

        def tail(t):
            if t is None:
                return None
            q = t.ratio
            return GeometricTail(t.coefficient * (1.0 + q + q * q) / 4.0, q)

        return Stream(lo, vals, tail(r.left_tail), tail(r.right_tail))


@dataclass(frozen=True)
class GalleryRule:
    name: str
    rule: Rule
    expected_matrix: dict = field(default_factory=dict)

    @property
    def broken_axiom(self) -> str:
        return next(a for a, v in self.expected_matrix.items() if v == "fail")


def _expect(broken: str) -> dict:
    return {a: ("fail" if a == broken else "pass") for a in CHARACTERIZING_AXIOMS}


EXPECTED = {
    "double": _expect("feasibility"),
    "sorting": _expect("independence_future_income"),
    "scale_breaking": _expect("scale_invariance"),
    "finite_support_switch": _expect("continuity"),
    "moving_average": _expect("consistency"),
}


def gallery() -> list[GalleryRule]:
    rules = [
        DoubleRule(),
        SortingRule(),
        ScaleBreakingRule(),
        FiniteSupportSwitchRule(),
        MovingAverageRule(),
    ]
    return [GalleryRule(r.name, r, dict(EXPECTED[r.name])) for r in rules]


@dataclass
class IndependenceMatrix:
    """Computed verdicts for every gallery rule and characterizing axiom."""

    verdicts: dict  # rule name -> axiom -> AxiomVerdict
    expected: dict

    def outcome(self, rule: str, axiom: str) -> str:
        return self.verdicts[rule][axiom].outcome

    def mismatches(self) -> list[dict]:
        out = []
        for rule, row in self.verdicts.items():
            for axiom, verdict in row.items():
                want = self.expected[rule][axiom]
                if verdict.outcome != want:
                    out.append(
                        {
                            "rule": rule,
                            "axiom": axiom,
                            "expected": want,
                            "outcome": verdict.outcome,
                            "witness": verdict.witness,
                            "violation": verdict.violation,
                        }
                    )
        return out

    @property
    def matches(self) -> bool:
        return not self.mismatches()

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rule", *CHARACTERIZING_AXIOMS])
        for rule, row in self.verdicts.items():
            cells = []
            for axiom in CHARACTERIZING_AXIOMS:
                got = row[axiom].outcome
                want = self.expected[rule][axiom]
                cells.append(f"{got}/{want}/{'match' if got == want else 'mismatch'}")
            writer.writerow([rule, *cells])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "axioms": list(CHARACTERIZING_AXIOMS),
            "matrix": {
                rule: {a: v.to_dict() for a, v in row.items()} for rule, row in self.verdicts.items()
            },
            "expected": self.expected,
            "mismatches": self.mismatches(),
            "all_match": self.matches,
        }


def independence_matrix(battery, rules=None) -> IndependenceMatrix:
    """Check every characterizing axiom for every gallery rule on ``battery``."""
    from .axioms import check_axiom

    rules = gallery() if rules is None else rules
    verdicts = {}
    for g in rules:
        verdicts[g.name] = {a: check_axiom(g.rule, a, battery) for a in CHARACTERIZING_AXIOMS}
    return IndependenceMatrix(verdicts, {g.name: dict(g.expected_matrix) for g in rules})
