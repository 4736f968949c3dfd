"""Axiom checks and continuity probes over seeded batteries of income streams.

A check evaluates the defining (in)equality of an axiom on every battery case
and stops at the first violation beyond the tolerance.  Finite testing can
refute an axiom but never prove it, so ``pass`` means "no counterexample in
this battery".  The continuity probes additionally return certified passes
where a bound is available and ``inconclusive`` when a search runs out.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .profile import (
    LambdaProfile,
    TailSpec,
    _value_set,
    classify,
    lambda_at,
    partial_product,
)
from .rules import (
    ConsistencyPreconditionError,
    GeometricRule,
    Rule,
    allocate,
    consistency_transform,
)
from .stream import (
    GeometricTail,
    Stream,
    add,
    basis,
    restrict,
    scale,
    shift,
    sup_dist,
    sup_norm,
    taxicab_dist,
    taxicab_norm,
    value_at,
    with_value,
)

AXIOMS = (
    "feasibility",
    "balance",
    "scale_invariance",
    "independence_future_income",
    "independence_future_streams",
    "zero_inessential",
    "translation_invariance",
    "idempotency",
    "consistency",
    "continuity",
)

OUTCOMES = ("pass", "fail", "precondition-unmet", "inconclusive")

SCALE_FACTORS = (0.0, 0.5, 2.0, 3.7)
CONTINUITY_DEPTH = 512


@dataclass(frozen=True)
class AxiomVerdict:
    axiom: str
    outcome: str
    witness: Optional[dict] = None
    violation: float = 0.0
    battery_size: int = 0
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")

    @property
    def passed(self) -> bool:
        return self.outcome == "pass"

    def to_dict(self) -> dict:
        return {
            "axiom": self.axiom,
            "outcome": self.outcome,
            "witness": self.witness,
            "violation": self.violation,
            "battery": {"seed": self.seed, "size": self.battery_size},
        }


# --------------------------------------------------------------------------
# batteries


def _draw_share(rng: np.random.Generator) -> float:
    u = rng.random()
    if u < 0.1:
        return 0.0
    if u < 0.2:
        return 1.0
    return float(rng.uniform(0.05, 1.0))


def _draw_tail_spec(rng: np.random.Generator) -> TailSpec:
    if rng.random() < 0.6:
        return TailSpec.constant(_draw_share(rng))
    n = int(rng.integers(1, 4))
    return TailSpec.periodic([_draw_share(rng) for _ in range(n)])


def random_profile(rng: np.random.Generator, max_window: int = 64) -> LambdaProfile:
    """Random profile with constant or periodic tails on both sides."""
    n = int(rng.integers(0, max_window + 1))
    lo = int(rng.integers(-max_window, max_window + 1))
    values = tuple(_draw_share(rng) for _ in range(n))
    return LambdaProfile(lo, values, _draw_tail_spec(rng), _draw_tail_spec(rng))


def random_stream(
    rng: np.random.Generator,
    max_window: int = 64,
    max_value: float = 10.0,
    tail_prob: float = 0.3,
    max_ratio: float = 0.9,
) -> Stream:
    n = int(rng.integers(1, max_window + 1))
    lo = int(rng.integers(-max_window, max_window + 1))
    vals = rng.uniform(0.0, max_value, n)
    vals[rng.random(n) < 0.2] = 0.0

    def tail():
        if rng.random() >= tail_prob:
            return None
        return GeometricTail(float(rng.uniform(0.0, max_value)), float(rng.uniform(0.0, max_ratio)))

    left, right = tail(), tail()
    return Stream(lo, tuple(float(v) for v in vals), left, right)


def halving_stream() -> Stream:
    """``r_i = 2^-i`` for ``i >= 0``, zero before."""
    return Stream(0, (1.0,), None, GeometricTail(0.5, 0.5))


def fixture_streams() -> list[tuple[str, Stream]]:
    h = halving_stream()
    return [
        ("e0", basis(0)),
        ("e1", basis(1)),
        ("e-2", basis(-2)),
        ("6e0+3e1", Stream(0, (6.0, 3.0))),
        ("e0+3e1", Stream(0, (1.0, 3.0))),
        ("halving", h),
        ("halving_cut0", restrict(h, hi=1)),
        ("halving_cut1", restrict(h, hi=2)),
        ("halving_cut5", restrict(h, hi=6)),
        ("halving_mirror", Stream(0, (1.0,), GeometricTail(0.5, 0.5), None)),
        ("null", Stream()),
    ]


@dataclass(frozen=True)
class Battery:
    """Reproducible collection of test streams: fixed fixtures followed by seeded random draws."""

    seed: int = 0
    size: int = 200
    max_window: int = 64
    max_value: float = 10.0
    tail_prob: float = 0.3
    max_ratio: float = 0.9
    fixtures: bool = True
    tol: float = 1e-9

    def rng(self, tag: str = "") -> np.random.Generator:
        return np.random.default_rng([self.seed, zlib.crc32(tag.encode())])

    @cached_property
    def labelled(self) -> list[tuple[str, Stream]]:
        out = fixture_streams() if self.fixtures else []
        rng = self.rng("streams")
        for k in range(self.size):
            r = random_stream(rng, self.max_window, self.max_value, self.tail_prob, self.max_ratio)
            out.append((f"random[{k}]", r))
        return out

    @property
    def cases(self) -> list[Stream]:
        return [r for _, r in self.labelled]

    def __len__(self) -> int:
        return len(self.labelled)

    def pairs(self) -> list[tuple[Stream, Stream]]:
        cs = self.cases
        return list(zip(cs, cs[1:]))


# --------------------------------------------------------------------------
# checks


def _probe_indices(r: Stream, rng: np.random.Generator) -> list[int]:
    idx = {0, 1, r.window_lo, r.window_hi}
    s = r.support_start()
    if s is not None:
        idx.add(s)
    if r.values:
        idx.update(int(x) for x in rng.integers(r.window_lo, r.window_hi, 2))
    return sorted(idx)


class _Checker:
    def __init__(self, rule: Rule, axiom: str, battery: Battery, tol: float):
        self.rule = rule
        self.axiom = axiom
        self.battery = battery
        self.tol = tol
        self.checked = 0
        self.unmet = 0

    def verdict(self, outcome, witness=None, violation=0.0) -> AxiomVerdict:
        return AxiomVerdict(self.axiom, outcome, witness, violation, len(self.battery), self.battery.seed)

    def fail(self, label: str, r: Stream, violation: float, **extra) -> AxiomVerdict:
        witness = {"case": label, "stream": r.to_dict(), **extra}
        return self.verdict("fail", witness, violation)

    def done(self) -> AxiomVerdict:
        if self.checked == 0 and self.unmet:
            return self.verdict("precondition-unmet", {"cases_unmet": self.unmet})
        witness = {"cases_checked": self.checked}
        if self.unmet:
            witness["cases_unmet"] = self.unmet
        return self.verdict("pass", witness)


def _check_feasibility(c: _Checker) -> AxiomVerdict:
    for label, r in c.battery.labelled:
        v = taxicab_norm(c.rule(r)) - taxicab_norm(r)
        c.checked += 1
        if v > c.tol:
            return c.fail(label, r, v)
    return c.done()


def _check_balance(c: _Checker) -> AxiomVerdict:
    for label, r in c.battery.labelled:
        v = abs(taxicab_norm(c.rule(r)) - taxicab_norm(r))
        c.checked += 1
        if v > c.tol:
            return c.fail(label, r, v)
    return c.done()


def _check_scale(c: _Checker) -> AxiomVerdict:
    for label, r in c.battery.labelled:
        out = c.rule(r)
        for alpha in SCALE_FACTORS:
            v = sup_dist(c.rule(scale(r, alpha)), scale(out, alpha))
            c.checked += 1
            if v > c.tol:
                return c.fail(label, r, v, alpha=alpha)
    return c.done()


def _perturbations(v: float) -> list[float]:
    return [0.0, 0.5 * v, 2.0 * v, v + 1.0, max(v - 1.0, 0.0)]


def _check_future_income(c: _Checker) -> AxiomVerdict:
    rng = c.battery.rng(c.axiom)
    for label, r in c.battery.labelled:
        out = c.rule(r)
        for j in _probe_indices(r, rng):
            past = restrict(out, hi=j)
            for new in _perturbations(value_at(r, j)):
                v = sup_dist(past, restrict(c.rule(with_value(r, j, new)), hi=j))
                c.checked += 1
                if v > c.tol:
                    return c.fail(label, r, v, generation=j, new_income=new)
    return c.done()


def _check_future_streams(c: _Checker) -> AxiomVerdict:
    rng = c.battery.rng(c.axiom)
    cases = c.battery.labelled
    for k, (label, r) in enumerate(cases):
        other = cases[(k + 1) % len(cases)][1]
        out = c.rule(r)
        for j in _probe_indices(r, rng):
            spliced = add(restrict(r, hi=j), restrict(other, lo=j))
            v = sup_dist(restrict(out, hi=j), restrict(c.rule(spliced), hi=j))
            c.checked += 1
            if v > c.tol:
                return c.fail(label, r, v, generation=j, replacement=spliced.to_dict())
    return c.done()


def _check_zero_inessential(c: _Checker) -> AxiomVerdict:
    for label, r in c.battery.labelled:
        if r.left_tail is not None:
            continue
        s = r.support_start()
        out = c.rule(r)
        v = sup_norm(out if s is None else restrict(out, hi=s))
        c.checked += 1
        if v > c.tol:
            return c.fail(label, r, v, first_essential=s)
    return c.done()


def _check_translation(c: _Checker) -> AxiomVerdict:
    for label, r in c.battery.labelled:
        v = sup_dist(c.rule(shift(r)), shift(c.rule(r)))
        c.checked += 1
        if v > c.tol:
            return c.fail(label, r, v)
    return c.done()


def _check_idempotency(c: _Checker) -> AxiomVerdict:
    for label, r in c.battery.labelled:
        out = c.rule(r)
        v = sup_dist(c.rule(out), out)
        c.checked += 1
        if v > c.tol:
            return c.fail(label, r, v)
    return c.done()


def _check_consistency(c: _Checker) -> AxiomVerdict:
    rng = c.battery.rng(c.axiom)
    for label, r in c.battery.labelled:
        out = c.rule(r)
        for j in _probe_indices(r, rng):
            try:
                rj = consistency_transform(c.rule, r, j, c.tol)
            except ConsistencyPreconditionError:
                c.unmet += 1
                continue
            v = sup_dist(restrict(c.rule(rj), lo=j), restrict(out, lo=j))
            c.checked += 1
            if v > c.tol:
                return c.fail(label, r, v, generation=j, transformed=rj.to_dict())
    return c.done()


def _check_continuity(c: _Checker) -> AxiomVerdict:
    v = taxicab_continuity_probe(c.rule, CONTINUITY_DEPTH, c.battery.labelled, c.tol)
    return AxiomVerdict("continuity", v.outcome, v.witness, v.violation, len(c.battery), c.battery.seed)


_CHECKS: dict[str, Callable[[_Checker], AxiomVerdict]] = {
    "feasibility": _check_feasibility,
    "balance": _check_balance,
    "scale_invariance": _check_scale,
    "independence_future_income": _check_future_income,
    "independence_future_streams": _check_future_streams,
    "zero_inessential": _check_zero_inessential,
    "translation_invariance": _check_translation,
    "idempotency": _check_idempotency,
    "consistency": _check_consistency,
    "continuity": _check_continuity,
}


def _as_rule(rule) -> Rule:
    return GeometricRule(rule) if isinstance(rule, LambdaProfile) else rule


def check_axiom(rule, axiom: str, battery: Battery, tol: Optional[float] = None) -> AxiomVerdict:
    """Evaluate ``axiom`` for ``rule`` on every case of ``battery``."""
    if axiom not in _CHECKS:
        raise ValueError(f"unknown axiom {axiom!r}; expected one of {', '.join(AXIOMS)}")
    c = _Checker(_as_rule(rule), axiom, battery, battery.tol if tol is None else tol)
    return _CHECKS[axiom](c)


def check_all(rule, battery: Battery, axioms=AXIOMS, tol: Optional[float] = None) -> dict:
    return {a: check_axiom(rule, a, battery, tol) for a in axioms}


def lipschitz_certificate(rule, battery: Battery) -> float:
    """Largest observed ``d1(phi(r), phi(r')) / d1(r, r')`` over battery pairs.

    Pairs are consecutive battery cases plus each case against a copy with
    one generation raised by one unit.
    """
    rule = _as_rule(rule)
    rng = battery.rng("lipschitz")
    cases = battery.cases
    outs = [rule(r) for r in cases]
    best = 0.0
    for k in range(len(cases)):
        r, out = cases[k], outs[k]
        if k + 1 < len(cases):
            d_in = taxicab_dist(r, cases[k + 1])
            if d_in > 0.0:
                best = max(best, taxicab_dist(out, outs[k + 1]) / d_in)
        j = int(rng.integers(r.window_lo - 2, r.window_hi + 2))
        bumped = with_value(r, j, value_at(r, j) + 1.0)
        best = max(best, taxicab_dist(out, rule(bumped)) / taxicab_dist(r, bumped))
    return best


# --------------------------------------------------------------------------
# continuity probes


def _probe(axiom, outcome, witness, violation=0.0) -> AxiomVerdict:
    return AxiomVerdict(axiom, outcome, witness, violation)


def block_stream(lo: int, hi: int, height: float) -> Stream:
    """``height`` on every generation of ``[lo, hi]``."""
    return Stream(lo, (height,) * (hi - lo + 1))


def sup_witness_blocks(p: LambdaProfile, depth: int, horizon: int = 1 << 15) -> Optional[list]:
    """``[(m, j_m, i_m)]`` with ``sum_{j=j_m}^{i_m} lambda_i prod_{k=j}^{i-1} (1 - lambda_k) >= m``.

    Returns ``None`` when some ``m <= depth`` has no block within the horizon.
    """
    lo, spec = p.left_regime()
    start = lo - len(spec.cycle)
    stop = max(lo, p.window_hi) + horizon
    out = []
    i = start
    for m in range(1, depth + 1):
        found = None
        while i < stop and found is None:
            lam = lambda_at(p, i)
            if lam > 0.0:
                acc, w, j = 0.0, 1.0, i
                while i - j <= horizon:
                    acc += lam * w
                    if acc >= m:
                        found = j
                        break
                    w *= 1.0 - lambda_at(p, j - 1)
                    if w < 1e-18:
                        break
                    j -= 1
            if found is None:
                i += 1
        if found is None:
            return None
        out.append((m, found, i))
    return out


def sup_continuity_probe(
    p: LambdaProfile,
    depth: int = 100,
    battery: Optional[Battery] = None,
    tol: float = 1e-9,
) -> AxiomVerdict:
    """Certified bound ``sup S`` when S is bounded, explicit block witnesses otherwise."""
    rep = classify(p)
    if rep.in_T:
        b = rep.sup_S
        battery = battery or Battery(size=50)
        rule = GeometricRule(p)
        cases = battery.cases
        outs = [rule(r) for r in cases]
        worst = 0.0
        for k in range(len(cases) - 1):
            lhs = sup_dist(outs[k], outs[k + 1])
            rhs = b * sup_dist(cases[k], cases[k + 1])
            if lhs > rhs + tol:
                return _probe(
                    "sup_continuity",
                    "fail",
                    {"bound": b, "pair": [cases[k].to_dict(), cases[k + 1].to_dict()]},
                    lhs - rhs,
                )
            worst = max(worst, lhs - rhs)
        return _probe("sup_continuity", "pass", {"bound": b, "pairs": len(cases) - 1})
    blocks = sup_witness_blocks(p, depth)
    if blocks is None:
        return _probe("sup_continuity", "inconclusive", {"reason": "no witness block within horizon"})
    rows = []
    for m, j, i in blocks:
        phi = allocate(p, block_stream(j, i, 1.0 / m), (j, i + 1))[i]
        rows.append({"m": m, "lo": j, "hi": i, "sup_norm": 1.0 / m, "phi": phi})
    least = min(row["phi"] for row in rows)
    if least < 1.0 - tol:
        return _probe(
            "sup_continuity", "inconclusive", {"reason": "witness allocation below 1", "blocks": rows}
        )
    return _probe(
        "sup_continuity",
        "fail",
        {"depth": depth, "min_phi": least, "blocks": rows[:3] + rows[-3:]},
        least,
    )


def _unit_below(p: LambdaProfile, i: int, horizon: int) -> Optional[int]:
    for j in range(i - 1, i - 1 - horizon, -1):
        if lambda_at(p, j) == 1.0:
            return j
    return None


def pointwise_index(p: LambdaProfile, horizon: int = 1 << 14) -> Optional[int]:
    """First ``i`` with ``lambda_i > 0``: every earlier share is below 1 when the left tail has no unit."""
    lo, spec = p.left_regime()
    for i in range(lo - len(spec.cycle), max(lo, p.window_hi) + horizon):
        if lambda_at(p, i) > 0.0:
            return i
    return None


def spike_stream(p: LambdaProfile, i: int, m: int) -> Optional[Stream]:
    """Single spike at ``i - m`` of height ``1 / prod_{k=i-m}^{i-1} (1 - lambda_k)``."""
    prod = partial_product(p, i - m, i - 1)
    if prod == 0.0 or not math.isfinite(1.0 / prod):
        return None
    return Stream(i - m, (1.0 / prod,))


def pointwise_continuity_probe(
    p: LambdaProfile, depth: int = 50, horizon: int = 1 << 14, tol: float = 1e-9
) -> AxiomVerdict:
    vals, _ = _value_set(p)
    if vals == {0.0}:
        return _probe("pointwise_continuity", "pass", {"reason": "full transfer: output is identically zero"})
    rep = classify(p)
    if rep.in_P:
        lo, spec = p.left_regime()
        units = {}
        for i in sorted({lo - 1, lo, 0, p.window_hi}):
            j = _unit_below(p, i, horizon)
            if j is None:
                return _probe("pointwise_continuity", "inconclusive", {"reason": f"no unit share below {i}"})
            # spikes at or below the unit never reach generation i
            for m in range(i - j, i - j + depth):
                phi = allocate(p, basis(i - m), (i - m, i + 1))[i]
                if phi != 0.0:
                    return _probe(
                        "pointwise_continuity", "fail", {"generation": i, "spike": i - m, "phi": phi}, phi
                    )
            units[str(i)] = j
        return _probe("pointwise_continuity", "pass", {"unit_below": units, "depth": depth})
    i = pointwise_index(p, horizon)
    if i is None:
        return _probe("pointwise_continuity", "inconclusive", {"reason": "no positive share within horizon"})
    lam = lambda_at(p, i)
    rows = []
    for m in range(1, depth + 1):
        r = spike_stream(p, i, m)
        if r is None:
            return _probe(
                "pointwise_continuity", "inconclusive", {"reason": f"transfer product underflows at m={m}"}
            )
        phi = allocate(p, r, (i - m, i + 1))[i]
        if abs(phi - lam) > tol * max(1.0, lam):
            return _probe(
                "pointwise_continuity", "inconclusive", {"reason": "spike allocation drifted", "m": m, "phi": phi}
            )
        rows.append(phi)
    return _probe(
        "pointwise_continuity",
        "fail",
        {"generation": i, "lambda_i": lam, "depth": depth, "phi": rows[:5]},
        lam,
    )


def taxicab_continuity_probe(
    rule,
    depth: int = CONTINUITY_DEPTH,
    streams=(),
    tol: float = 1e-9,
) -> AxiomVerdict:
    """Follow convergent sequences to ``depth`` and compare images with the image of the limit.

    Sequences are the halving witness cut after ``m`` generations and, for
    each supplied stream, its cuts ``m`` generations beyond either window edge.
    """
    rule = _as_rule(rule)
    seqs = [("halving", halving_stream(), lambda m: restrict(halving_stream(), hi=m + 1))]
    labelled = [(s if isinstance(s, tuple) else (f"stream[{k}]", s)) for k, s in enumerate(streams)]
    for label, r in labelled:
        if r.left_tail is not None:
            seqs.append((f"{label}:left_cut", r, lambda m, r=r: restrict(r, lo=r.window_lo - m)))
        if r.right_tail is not None:
            seqs.append((f"{label}:right_cut", r, lambda m, r=r: restrict(r, hi=r.window_hi + m)))
    checked = 0
    for label, limit, at in seqs:
        target = rule(limit)
        rm = at(depth)
        d_in = taxicab_dist(rm, limit)
        if d_in > tol:
            continue
        d_out = taxicab_dist(rule(rm), target)
        checked += 1
        if d_out > tol:
            early = [value_at(rule(at(m)), 0) for m in range(4)]
            return _probe(
                "continuity",
                "fail",
                {
                    "sequence": label,
                    "depth": depth,
                    "input_distance": d_in,
                    "output_distance": d_out,
                    "limit": limit.to_dict(),
                    "phi0_sequence": early,
                    "phi0_limit": value_at(target, 0),
                },
                d_out,
            )
    return _probe("continuity", "pass", {"sequences_checked": checked, "depth": depth})
