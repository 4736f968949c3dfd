"""Geometric allocation rules.

Generation ``i`` receives ``r_i`` plus the transfer ``t_i`` handed down by
earlier generations, keeps ``lambda_i`` of it and passes the rest on:

    phi_i = lambda_i * (r_i + t_i),   t_{i+1} = (1 - lambda_i) * (r_i + t_i).

:func:`allocate` runs that recurrence once over an evaluation window,
seeding ``t`` at the left edge in closed form.  :func:`allocate_direct`
sums the defining series term by term and is kept as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .profile import (
    FORMULAS,
    LambdaProfile,
    TailSpec,
    _right_product,
    lambda_at,
    left_sum,
)
from .stream import (
    TRUNCATION_TOL,
    GeometricTail,
    RepresentationError,
    Stream,
    basis,
    mass_below,
    restrict,
    taxicab_norm,
    value_at,
    with_value,
)

__all__ = [
    "Rule",
    "GeometricRule",
    "AllocationResult",
    "ConsistencyPreconditionError",
    "InfeasibleRuleError",
    "geometric",
    "no_transfer",
    "full_transfer",
    "incoming_transfer",
    "allocate",
    "allocate_direct",
    "allocate_direct_many",
    "total_allocated",
    "total_below",
    "consistency_transform",
    "recover_lambda",
    "recovered_values",
]

MAX_HORIZON = 1 << 16
ORACLE_THRESHOLD = 1e-15


class ConsistencyPreconditionError(ValueError):
    """The consistency transform of a stream leaves the nonnegative cone."""

    def __init__(self, j: int, value: float):
        super().__init__(f"consistency transform at generation {j} has negative income {value!r}")
        self.j = j
        self.value = value


class InfeasibleRuleError(ValueError):
    """A recovered retention share falls outside [0, 1]."""

    def __init__(self, values: dict):
        bad = {i: v for i, v in values.items() if not 0.0 <= v <= 1.0}
        super().__init__(f"recovered shares outside [0, 1]: {bad}")
        self.values = values
        self.offending = bad


class Rule:
    """An allocation rule: a map from income streams to income streams."""

    name = "rule"

    def __call__(self, r: Stream) -> Stream:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"


class GeometricRule(Rule):
    def __init__(self, profile: LambdaProfile, name: Optional[str] = None):
        self.profile = profile
        self.name = name or "geometric"

    def __call__(self, r: Stream) -> Stream:
        return apply_geometric(self.profile, r)


def geometric(p: LambdaProfile, name: Optional[str] = None) -> GeometricRule:
    return GeometricRule(p, name)


def no_transfer() -> GeometricRule:
    t = TailSpec.constant(1.0)
    return GeometricRule(LambdaProfile(0, (), t, t), "no_transfer")


def full_transfer() -> GeometricRule:
    t = TailSpec.constant(0.0)
    return GeometricRule(LambdaProfile(0, (), t, t), "full_transfer")


def _as_rule(rule) -> Rule:
    return GeometricRule(rule) if isinstance(rule, LambdaProfile) else rule


# --------------------------------------------------------------------------
# forward pass


def _left_income(r: Stream, boundary: int) -> tuple[float, float]:
    """``(a, q)``: income at ``boundary - k`` is ``a q^(k-1)`` for ``k >= 1``.

    Only valid for ``boundary <= r.window_lo``.
    """
    if r.left_tail is None:
        return 0.0, 0.0
    q = r.left_tail.ratio
    return r.left_tail.coefficient * q ** (r.window_lo - boundary), q


def _step(lam: float, x: float) -> tuple[float, float]:
    """Allocation and onward transfer for available income ``x``."""
    if lam == 1.0:
        return x, 0.0
    return lam * x, (1.0 - lam) * x


def incoming_transfer(p: LambdaProfile, r: Stream, i: int) -> float:
    """``t_i = sum_{j<i} prod_{k=j}^{i-1} (1 - lambda_k) r_j``."""
    lo, spec = p.left_regime()
    lo = min(lo, r.window_lo, i)
    a, q = _left_income(r, lo)
    t = left_sum(spec, lo, a, q)
    if t == math.inf:
        raise ValueError("incoming transfer diverges")
    for k in range(lo, i):
        _, t = _step(lambda_at(p, k), value_at(r, k) + t)
    return t


@dataclass(frozen=True)
class AllocationResult:
    """Allocations on ``[window_lo, window_lo + len(allocations))`` plus closed-form summaries.

    ``left_allocation_sum`` is what generations left of the window keep,
    ``tail_allocation_sum`` what generations right of it keep and
    ``leaked_mass`` the income that is passed on forever.
    """

    window_lo: int
    allocations: tuple
    residual_transfer: float
    tail_allocation_sum: float
    leaked_mass: float
    left_allocation_sum: float = 0.0

    @property
    def window_hi(self) -> int:
        return self.window_lo + len(self.allocations)

    def __getitem__(self, i: int) -> float:
        if not self.window_lo <= i < self.window_hi:
            raise IndexError(f"generation {i} outside evaluation window")
        return self.allocations[i - self.window_lo]

    @property
    def window_sum(self) -> float:
        return math.fsum(self.allocations)

    @property
    def total(self) -> float:
        return math.fsum([self.left_allocation_sum, self.window_sum, self.tail_allocation_sum])

    def to_dict(self) -> dict:
        return {
            "window_lo": self.window_lo,
            "allocations": list(self.allocations),
            "residual_transfer": self.residual_transfer,
            "tail_allocation_sum": self.tail_allocation_sum,
            "leaked_mass": self.leaked_mass,
            "left_allocation_sum": self.left_allocation_sum,
        }


def _right_outflow(p: LambdaProfile, r: Stream, start: int, t: float) -> tuple[float, float]:
    """Allocated and leaked mass over generations ``>= start`` given transfer ``t`` into ``start``."""
    end = max(start, r.window_hi, p.window_hi)
    acc = []
    for i in range(start, end):
        phi, t = _step(lambda_at(p, i), value_at(r, i) + t)
        acc.append(phi)
    tail = r.right_tail.advance(end - r.window_hi) if r.right_tail else None
    a, q = (tail.coefficient, tail.ratio) if tail else (0.0, 0.0)
    beyond = a / (1.0 - q)
    spec = p.right_tail
    if spec.kind == "formula":
        f = FORMULAS[spec.name]
        leak_terms = [t * f.product_from(end)]
        m = 0
        while a and a * q**m / (1.0 - q) > 1e-18:
            leak_terms.append(a * q**m * f.product_from(end + m))
            m += 1
        leaked = math.fsum(leak_terms)
    else:
        leaked = 0.0 if _right_product(spec, end) == 0.0 else t + beyond
    acc.append(t + beyond - leaked)
    return math.fsum(acc), leaked


def allocate(
    p: LambdaProfile,
    r: Stream,
    window: Optional[tuple[int, int]] = None,
) -> AllocationResult:
    """Allocations of the geometric rule ``p`` on ``window = (lo, hi)`` (half-open).

    Without a left income tail the window must start at or before the first
    generation with positive income.  The default window is the stream's own.
    """
    lo, hi = window if window is not None else (r.window_lo, r.window_hi)
    if hi < lo:
        raise ValueError(f"empty evaluation window ({lo}, {hi})")
    start = r.support_start()
    if r.left_tail is None and start is not None and lo > start:
        raise ValueError(
            f"evaluation window starts at {lo} but income is positive at generation {start}"
        )
    t = incoming_transfer(p, r, lo)
    left_alloc = mass_below(r, lo) - t if r.left_tail is not None else 0.0
    out = []
    for i in range(lo, hi):
        phi, t = _step(lambda_at(p, i), value_at(r, i) + t)
        out.append(phi)
    tail_alloc, leaked = _right_outflow(p, r, hi, t)
    return AllocationResult(lo, tuple(out), t, tail_alloc, leaked, max(left_alloc, 0.0))


# --------------------------------------------------------------------------
# rule application with a representable output


def _left_depth(a: float, q: float, tol: float, cap: int) -> int:
    d = 0
    while a * q**d / (1.0 - q) >= tol:
        d += 1
        if d > cap:
            raise RepresentationError("left income tail decays too slowly to truncate")
    return d


def apply_geometric(
    p: LambdaProfile,
    r: Stream,
    tol: float = TRUNCATION_TOL,
    max_horizon: int = MAX_HORIZON,
) -> Stream:
    """``phi^lambda(r)`` as a :class:`Stream`.

    Tails of the output are exact where they are geometric (constant
    retention on that side).  Elsewhere the output is materialized until the
    mass it could still carry is below ``tol``; by the 1-Lipschitz property
    the taxicab error of the cut is at most ``tol`` per side.
    """
    lo0, spec = p.left_regime()
    left_out = None
    if r.left_tail is None:
        lo = r.window_lo
        t = 0.0
    else:
        boundary = min(lo0, r.window_lo)
        a, q = _left_income(r, boundary)
        if spec.kind == "constant":
            c = spec.value
            # phi at boundary - m equals c * a * q^(m-1) / (1 - (1-c) q)
            left_out = GeometricTail(c * a / (1.0 - (1.0 - c) * q), q)
            lo = boundary
        else:
            lo = boundary - _left_depth(a, q, tol, max_horizon)
        a_lo, _ = _left_income(r, lo)
        t = left_sum(spec, lo, a_lo, q)

    end = max(r.window_hi, p.window_hi, lo)
    vals = []
    for i in range(lo, end):
        phi, t = _step(lambda_at(p, i), value_at(r, i) + t)
        vals.append(phi)

    income = r.right_tail.advance(end - r.window_hi) if r.right_tail else None
    i = end
    right_spec = p.right_tail
    right_out = None

    def remaining(i):
        if income is None:
            return 0.0
        return income.remainder(i - end)

    if right_spec.kind == "constant" and right_spec.value in (0.0, 1.0):
        if right_spec.value == 1.0 and (t > 0.0 or income is not None):
            vals.append(value_at(r, i) + t)
            i += 1
            right_out = income.advance(1) if income is not None else None
    elif right_spec.kind == "constant":
        c = right_spec.value
        while remaining(i) >= tol:
            phi, t = _step(c, value_at(r, i) + t)
            vals.append(phi)
            i += 1
            if i - end > max_horizon:
                raise RepresentationError("right income tail decays too slowly to truncate")
        if t > 0.0:
            if 1.0 - c == 1.0:
                raise RepresentationError(f"retention share {c!r} is too small for a geometric output tail")
            right_out = GeometricTail(c * t, 1.0 - c)
    else:
        while (t + remaining(i)) * (1.0 - _right_product(right_spec, i)) >= tol:
            phi, t = _step(lambda_at(p, i), value_at(r, i) + t)
            vals.append(phi)
            i += 1
            if i - end > max_horizon:
                raise RepresentationError("allocation does not settle within the horizon")
    return Stream(lo, tuple(vals), left_out, right_out)


# --------------------------------------------------------------------------
# oracle and closed forms


def _oracle_floor(r: Stream, threshold: float) -> Optional[int]:
    """Lowest generation the oracle needs: income below it is under ``threshold``."""
    if r.left_tail is None:
        return r.window_lo
    tail = r.left_tail
    d = 0
    while tail.remainder(d) >= threshold:
        d += 1
        if d > MAX_HORIZON:
            break
    return r.window_lo - d


def allocate_direct(p: LambdaProfile, r: Stream, i: int, threshold: float = ORACLE_THRESHOLD) -> float:
    """``lambda_i * sum_{j<=i} prod_{k=j}^{i-1} (1 - lambda_k) r_j`` summed literally.

    Terms are collected down to the generation below which the remaining
    income is under ``threshold`` and added in decreasing magnitude.
    """
    return allocate_direct_many(p, r, [i], threshold)[0]


def allocate_direct_many(
    p: LambdaProfile, r: Stream, indices: Sequence[int], threshold: float = ORACLE_THRESHOLD
) -> list[float]:
    """:func:`allocate_direct` at several generations, sharing the share and income arrays."""
    indices = list(indices)
    if not indices:
        return []
    floor = _oracle_floor(r, threshold)
    top = max(indices)
    gens = range(floor, top + 1)
    lam = np.array([lambda_at(p, k) for k in gens])
    inc = np.array([value_at(r, k) for k in gens])
    out = []
    for i in indices:
        if i < floor or lam[i - floor] == 0.0:
            out.append(0.0)
            continue
        n = i - floor + 1
        # weights[j] = prod_{k=j}^{i-1} (1 - lambda_k), built from the right
        weights = np.ones(n)
        if n > 1:
            weights[:-1] = np.cumprod((1.0 - lam[: n - 1])[::-1])[::-1]
        terms = lam[n - 1] * weights * inc[:n]
        terms = terms[np.argsort(-np.abs(terms))]
        out.append(math.fsum(terms.tolist()))
    return out


def _survival(p: LambdaProfile, lo: int, hi: int, at_hi: float) -> list[float]:
    """``[P(lo), ..., P(hi-1)]`` with ``P(i) = (1 - lambda_i) P(i+1)`` and ``P(hi) = at_hi``."""
    out = [0.0] * (hi - lo)
    acc = at_hi
    for i in range(hi - 1, lo - 1, -1):
        acc *= 1.0 - lambda_at(p, i)
        out[i - lo] = acc
    return out


def total_allocated(p: LambdaProfile, r: Stream) -> float:
    """``sum_i (1 - prod_{k>=i} (1 - lambda_k)) r_i``."""
    lo0, spec = p.left_regime()
    lo = min(lo0, r.window_lo)
    end = max(lo, r.window_hi, p.window_hi)
    at_end = _right_product(p.right_tail, end)
    surv = _survival(p, lo, end, at_end)
    leak = [value_at(r, i) * s for i, s in zip(range(lo, end), surv)]
    a, q = _left_income(r, lo)
    seed = left_sum(spec, lo, a, q)
    if seed:
        leak.append(seed * (surv[0] if surv else at_end))
    tail = r.right_tail.advance(end - r.window_hi) if r.right_tail else None
    if tail is not None:
        if p.right_tail.kind == "formula":
            f = FORMULAS[p.right_tail.name]
            m = 0
            while tail.remainder(m) > 1e-18:
                leak.append(tail.value(m + 1) * f.product_from(end + m))
                m += 1
        else:
            leak.append(tail.total() * at_end)
    return taxicab_norm(r) - math.fsum(leak)


def total_below(p: LambdaProfile, r: Stream, j: int) -> float:
    """``sum_{i<j} (1 - prod_{k=i}^{j-1} (1 - lambda_k)) r_i``."""
    lo0, spec = p.left_regime()
    lo = min(lo0, r.window_lo, j)
    surv = _survival(p, lo, j, 1.0)
    kept = [value_at(r, i) * s for i, s in zip(range(lo, j), surv)]
    a, q = _left_income(r, lo)
    seed = left_sum(spec, lo, a, q)
    if seed:
        kept.append(seed * (surv[0] if surv else 1.0))
    return mass_below(r, j) - math.fsum(kept)


# --------------------------------------------------------------------------
# consistency and reconstruction


def consistency_transform(rule, r: Stream, j: int, tol: float = 1e-9) -> Stream:
    """``r^j``: past generations zeroed, generation ``j`` absorbs every past residual."""
    rule = _as_rule(rule)
    out = rule(r)
    residual = mass_below(r, j) - mass_below(out, j)
    v = value_at(r, j) + residual
    if v < 0.0:
        if v < -tol:
            raise ConsistencyPreconditionError(j, v)
        v = 0.0
    return with_value(restrict(r, lo=j), j, v)


def recovered_values(rule, window: tuple[int, int]) -> dict:
    """``{i: rule(e^i)_i}`` over the window, without any feasibility check."""
    rule = _as_rule(rule)
    lo, hi = window
    return {i: value_at(rule(basis(i)), i) for i in range(lo, hi)}


def recover_lambda(
    rule,
    window: tuple[int, int],
    tail: TailSpec = TailSpec.constant(1.0),
) -> LambdaProfile:
    """Profile with ``lambda_i = rule(e^i)_i`` on the window and ``tail`` outside it."""
    vals = recovered_values(rule, window)
    if any(not 0.0 <= v <= 1.0 for v in vals.values()):
        raise InfeasibleRuleError(vals)
    lo, hi = window
    return LambdaProfile(lo, tuple(vals[i] for i in range(lo, hi)), tail, tail)
