"""Reference profiles, streams and the shipped regression scenario."""

from __future__ import annotations

import math

from .profile import LambdaProfile, TailSpec, classify, s_value, uniform
from .stream import GeometricTail, Stream, basis

FLAGS = ("in_B", "in_E", "in_T", "in_P", "in_U")


def _const(c):
    return TailSpec.constant(c)


def fixture_profiles() -> dict[str, LambdaProfile]:
    return {
        # 1 - exp(-2^-i) for i > 0, zero elsewhere
        "example1": LambdaProfile(0, (), TailSpec.formula("example1"), TailSpec.formula("example1")),
        # unit shares for i < 0 and at every pronic number, zero elsewhere
        "venn_blocks": LambdaProfile(0, (), TailSpec.formula("venn_blocks"), TailSpec.formula("venn_blocks")),
        # 1 on even generations, 1/2 on odd ones
        "periodic_one_half": LambdaProfile(0, (), TailSpec.periodic([1.0, 0.5]), TailSpec.periodic([1.0, 0.5])),
        # 1 for i <= 0, 0 for i > 0
        "step_unit_left": LambdaProfile(1, (), _const(1.0), _const(0.0)),
        # 0 for i <= 0, 1/2 for i > 0
        "step_zero_left": LambdaProfile(1, (), _const(0.0), _const(0.5)),
        "full_transfer": uniform(0.0),
        "uniform_quarter": uniform(0.25),
        "uniform_half": uniform(0.5),
        "no_transfer": uniform(1.0),
        # 0 on the past, 1 at the present, 1/2 afterwards
        "sup_witness": LambdaProfile(0, (1.0,), _const(0.0), _const(0.5)),
        # 1/2 at 0, 1/3 at 1, unit shares elsewhere
        "two_step": LambdaProfile(0, (0.5, 1.0 / 3.0)),
    }


def fixture_streams() -> dict[str, Stream]:
    return {
        "e0": basis(0),
        "e1": basis(1),
        "six_three": Stream(0, (6.0, 3.0)),
        "halving": Stream(0, (1.0,), None, GeometricTail(0.5, 0.5)),
        "two_sided": Stream(0, (1.0, 2.0, 3.0), GeometricTail(2.0, 0.5), GeometricTail(1.0, 0.7)),
    }


# (row, profile names, required flag values)
VENN_ROWS = (
    (1, ("venn_blocks",), {"in_P": True, "in_T": False}),
    (2, ("periodic_one_half",), {"in_P": True, "in_T": True}),
    (3, ("step_unit_left",), {"in_T": True, "in_P": True, "in_B": False}),
    (4, ("step_zero_left",), {"in_B": True, "in_T": False, "in_P": False}),
    (5, ("uniform_quarter", "uniform_half", "no_transfer"), {"in_U": True, "in_T": True}),
    (6, ("full_transfer",), {"in_U": True, "in_B": False}),
)

VENN_S_RANGE = range(0, 21)


def venn_s_series(n_values=VENN_S_RANGE) -> list[dict]:
    """``S`` at the pronic generations ``n(n+1)`` of the block profile.

    The block length grows by two each time, so ``S = 2n`` for ``n >= 1``;
    at ``n = 0`` the unit share at generation -1 caps the mass at 1.
    """
    p = fixture_profiles()["venn_blocks"]
    rows = []
    for n in n_values:
        s = s_value(p, n * (n + 1))
        want = 2.0 * n if n >= 1 else 1.0
        rows.append({"n": n, "generation": n * (n + 1), "S": s, "expected": want, "match": abs(s - want) <= 1e-9})
    return rows


def venn_table() -> list[dict]:
    profiles = fixture_profiles()
    rows = []
    for row, names, want in VENN_ROWS:
        for name in names:
            rep = classify(profiles[name])
            flags = rep.flags()
            rows.append(
                {
                    "row": row,
                    "profile": name,
                    **flags,
                    "sup_S": "inf" if math.isinf(rep.sup_S) else rep.sup_S,
                    "expected": " ".join(("" if v else "not ") + k for k, v in want.items()),
                    "match": all(flags[k] == v for k, v in want.items()),
                }
            )
    return rows


def builtin_fixtures() -> dict:
    """Regression scenario covering every reference profile and witness."""
    profiles = fixture_profiles()
    streams = fixture_streams()
    tasks = []
    for name in profiles:
        tasks.append({"name": f"classify_{name}", "type": "classify", "profile": name})
    tasks[0]["expect"] = {"in_B": False, "in_T": False, "in_E": False}
    tasks += [
        {
            "name": "allocate_uniform_half_e0",
            "type": "allocate",
            "profile": "uniform_half",
            "stream": "e0",
            "window": [-3, 12],
            "expect": {"allocations": [0.0] * 3 + [0.5 ** (i + 1) for i in range(12)]},
        },
        {
            "name": "allocate_example1_e1",
            "type": "allocate",
            "profile": "example1",
            "stream": "e1",
            "window": [1, 40],
            "expect": {"leaked_mass": math.exp(-1.0), "total_allocated": 1.0 - math.exp(-1.0)},
        },
        {
            "name": "allocate_two_step",
            "type": "allocate",
            "profile": "two_step",
            "stream": "six_three",
            "window": [0, 3],
            "expect": {"allocations": [3.0, 2.0, 4.0]},
        },
        {
            "name": "allocate_two_sided",
            "type": "allocate",
            "profile": "periodic_one_half",
            "stream": "two_sided",
            "window": [-10, 20],
        },
        {"name": "venn", "type": "venn"},
        {
            "name": "axioms_uniform_half",
            "type": "axioms",
            "rule": "uniform_half",
            "expect": {
                "feasibility": "pass",
                "balance": "pass",
                "scale_invariance": "pass",
                "independence_future_income": "pass",
                "independence_future_streams": "pass",
                "zero_inessential": "pass",
                "translation_invariance": "pass",
                "idempotency": "fail",
                "consistency": "pass",
                "continuity": "pass",
            },
        },
        {
            "name": "axioms_example1",
            "type": "axioms",
            "rule": "example1",
            "axioms": ["feasibility", "balance", "consistency", "continuity"],
            "expect": {"feasibility": "pass", "balance": "fail", "consistency": "pass", "continuity": "pass"},
        },
        {
            "name": "probes_sup_witness",
            "type": "probes",
            "profile": "sup_witness",
            "depth": 100,
            "expect": {"sup_continuity": "fail", "taxicab_continuity": "pass"},
        },
        {
            "name": "probes_venn_blocks",
            "type": "probes",
            "profile": "venn_blocks",
            "depth": 40,
            "expect": {"sup_continuity": "fail", "pointwise_continuity": "pass"},
        },
        {
            "name": "probes_uniform_half",
            "type": "probes",
            "profile": "uniform_half",
            "depth": 50,
            "expect": {"sup_continuity": "pass", "pointwise_continuity": "fail", "taxicab_continuity": "pass"},
        },
        {
            "name": "probes_periodic_one_half",
            "type": "probes",
            "profile": "periodic_one_half",
            "depth": 50,
            "expect": {"sup_continuity": "pass", "pointwise_continuity": "pass"},
        },
        {
            "name": "probes_full_transfer",
            "type": "probes",
            "profile": "full_transfer",
            "depth": 50,
            "expect": {"pointwise_continuity": "pass"},
        },
        {
            "name": "reconstruct_two_step",
            "type": "reconstruct",
            "rule": "two_step",
            "window": [-4, 6],
            "expect": {"feasible": True},
        },
        {
            "name": "reconstruct_double",
            "type": "reconstruct",
            "rule": "gallery:double",
            "window": [-2, 3],
            "expect": {"feasible": False},
        },
        {"name": "independence", "type": "independence"},
    ]
    return {
        "seed": 0,
        "tolerance": 1e-9,
        "profiles": [{"name": k, **p.to_dict()} for k, p in profiles.items()],
        "streams": [{"name": k, **s.to_dict()} for k, s in streams.items()],
        "tasks": tasks,
    }
