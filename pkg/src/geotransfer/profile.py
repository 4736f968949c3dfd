"""Retention profiles ``lambda: Z -> [0, 1]`` and their sub-family analysis.

A :class:`LambdaProfile` holds explicit retention shares on a window and a
:class:`TailSpec` on each side.  Tails are constant, periodic (indexed by
absolute generation, ``pattern[i % len(pattern)]``) or a named formula from
:data:`FORMULAS`.  Every quantity that involves infinitely many generations
(tail products, arrival masses, the S-statistic and its supremum) is
evaluated in closed form per tail kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

__all__ = [
    "INF",
    "TailSpec",
    "LambdaProfile",
    "FamilyReport",
    "FORMULAS",
    "uniform",
    "lambda_at",
    "partial_product",
    "tail_product_limit",
    "arrival_mass",
    "s_value",
    "sup_s",
    "classify",
]

INF = math.inf


def _share(x, what="retention share") -> float:
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{what} must lie in [0, 1], got {x}")
    return x


# --------------------------------------------------------------------------
# named formulas


class Formula:
    """A closed-form retention profile usable as a tail.

    Subclasses describe where their left part becomes a constant or periodic
    regime (``left_boundary`` / ``left_regime``) and give closed forms for
    the right-hand quantities the analysis needs.
    """

    name = ""
    left_boundary = 0

    def value(self, i: int) -> float:
        raise NotImplementedError

    def left_regime(self) -> "TailSpec":
        """Pure (constant or periodic) spec valid for every ``i < left_boundary``."""
        raise NotImplementedError

    def product_from(self, start: int) -> float:
        """``prod_{k >= start} (1 - lambda_k)``."""
        raise NotImplementedError

    def inf_from(self, start: int) -> float:
        """``inf_{k >= start} lambda_k``."""
        raise NotImplementedError

    def sup_s_from(self, start: int, mass: float) -> float:
        """Supremum of the S-statistic over ``i >= start`` given arrival mass at ``start``."""
        raise NotImplementedError


class Example1(Formula):
    """``lambda_i = 1 - exp(-1/2**i)`` for ``i > 0``, zero otherwise."""

    name = "example1"
    left_boundary = 1

    def value(self, i: int) -> float:
        return -math.expm1(-(2.0**-i)) if i > 0 else 0.0

    def left_regime(self) -> "TailSpec":
        return TailSpec.constant(0.0)

    def product_from(self, start: int) -> float:
        # 1 - lambda_k = exp(-1/2**k); the exponents sum to 2**(1 - start)
        return math.exp(-(2.0 ** (1 - max(start, 1))))

    def inf_from(self, start: int) -> float:
        return 0.0

    def sup_s_from(self, start: int, mass: float) -> float:
        if mass == INF:
            # every lambda_i with i > 0 is positive
            return INF
        best = 0.0
        i, m = start, mass
        while True:
            lam = self.value(i)
            best = max(best, _s(lam, m))
            m = _step_mass(m, lam)
            i += 1
            # lambda_k <= 2**-k and the arrival mass grows by at most one per
            # generation, so 2**-i * A_i bounds every later S_k
            if i > 0 and 2.0**-i * m <= best:
                return best


class VennBlocks(Formula):
    """``lambda_i = 1`` for ``i < 0`` and ``i = n(n+1)``, zero otherwise."""

    name = "venn_blocks"
    left_boundary = 0

    def value(self, i: int) -> float:
        if i < 0:
            return 1.0
        n = math.isqrt(i)
        return 1.0 if n * (n + 1) == i else 0.0

    def left_regime(self) -> "TailSpec":
        return TailSpec.constant(1.0)

    def product_from(self, start: int) -> float:
        return 0.0

    def inf_from(self, start: int) -> float:
        return 0.0

    def sup_s_from(self, start: int, mass: float) -> float:
        # S at the block ends n(n+1) equals the block length 2n
        return INF


FORMULAS: dict[str, Formula] = {f.name: f for f in (Example1(), VennBlocks())}


# --------------------------------------------------------------------------
# tails and profiles


@dataclass(frozen=True)
class TailSpec:
    kind: str
    value: float = 0.0
    pattern: tuple = ()
    name: str = ""

    def __post_init__(self) -> None:
        if self.kind == "constant":
            object.__setattr__(self, "value", _share(self.value))
        elif self.kind == "periodic":
            pattern = tuple(_share(x) for x in self.pattern)
            if not pattern:
                raise ValueError("periodic pattern must be nonempty")
            object.__setattr__(self, "pattern", pattern)
        elif self.kind == "formula":
            if self.name not in FORMULAS:
                raise ValueError(f"unknown formula {self.name!r}; known: {sorted(FORMULAS)}")
        else:
            raise ValueError(f"unknown tail kind {self.kind!r}")

    @classmethod
    def constant(cls, c: float) -> "TailSpec":
        return cls("constant", value=c)

    @classmethod
    def periodic(cls, pattern: Sequence[float]) -> "TailSpec":
        return cls("periodic", pattern=tuple(pattern))

    @classmethod
    def formula(cls, name: str) -> "TailSpec":
        return cls("formula", name=name)

    def at(self, i: int) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "periodic":
            return self.pattern[i % len(self.pattern)]
        return FORMULAS[self.name].value(i)

    @property
    def cycle(self) -> tuple:
        """Values repeated by a pure tail (constant has period one)."""
        if self.kind == "constant":
            return (self.value,)
        if self.kind == "periodic":
            return self.pattern
        raise ValueError("formula tails have no cycle")

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "periodic":
            return {"kind": "periodic", "pattern": list(self.pattern)}
        return {"kind": "formula", "name": self.name}

    @classmethod
    def from_dict(cls, data) -> "TailSpec":
        if isinstance(data, (int, float)):
            return cls.constant(data)
        kind = data.get("kind")
        if kind == "constant":
            return cls.constant(data["value"])
        if kind == "periodic":
            return cls.periodic(data["pattern"])
        if kind == "formula":
            return cls.formula(data["name"])
        raise ValueError(f"unknown tail kind {kind!r}")


@dataclass(frozen=True)
class LambdaProfile:
    """Retention shares: explicit on ``[window_lo, window_hi)``, tails outside."""

    window_lo: int = 0
    values: tuple = ()
    left_tail: TailSpec = field(default_factory=lambda: TailSpec.constant(1.0))
    right_tail: TailSpec = field(default_factory=lambda: TailSpec.constant(1.0))

    def __post_init__(self) -> None:
        object.__setattr__(self, "window_lo", int(self.window_lo))
        object.__setattr__(self, "values", tuple(_share(v) for v in self.values))

    @property
    def window_hi(self) -> int:
        return self.window_lo + len(self.values)

    def __getitem__(self, i: int) -> float:
        return lambda_at(self, i)

    def left_regime(self) -> tuple[int, TailSpec]:
        """``(L, spec)`` such that ``lambda_i = spec.at(i)`` for every ``i < L``."""
        if self.left_tail.kind == "formula":
            f = FORMULAS[self.left_tail.name]
            return min(self.window_lo, f.left_boundary), f.left_regime()
        return self.window_lo, self.left_tail

    def to_dict(self) -> dict:
        return {
            "window_lo": self.window_lo,
            "values": list(self.values),
            "left_tail": self.left_tail.to_dict(),
            "right_tail": self.right_tail.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LambdaProfile":
        unknown = set(data) - {"window_lo", "values", "left_tail", "right_tail", "name"}
        if unknown:
            raise ValueError(f"unknown profile fields: {sorted(unknown)}")
        return cls(
            int(data.get("window_lo", 0)),
            tuple(data.get("values", ())),
            TailSpec.from_dict(data.get("left_tail", {"kind": "constant", "value": 1.0})),
            TailSpec.from_dict(data.get("right_tail", {"kind": "constant", "value": 1.0})),
        )


def uniform(c: float) -> LambdaProfile:
    """Constant retention share ``c``; 0 is full transfer, 1 is no transfer."""
    t = TailSpec.constant(c)
    return LambdaProfile(0, (), t, t)


def lambda_at(p: LambdaProfile, i: int) -> float:
    if p.window_lo <= i < p.window_hi:
        return p.values[i - p.window_lo]
    if i < p.window_lo:
        return p.left_tail.at(i)
    return p.right_tail.at(i)


def partial_product(p: LambdaProfile, i: int, j: int) -> float:
    """``prod_{k=i}^{j} (1 - lambda_k)``; the empty range ``j = i - 1`` gives 1."""
    if j < i - 1:
        raise ValueError(f"reversed range [{i}, {j}]")
    out = 1.0
    for k in range(i, j + 1):
        out *= 1.0 - lambda_at(p, k)
        if out == 0.0:
            break
    return out


def _right_product(spec: TailSpec, start: int) -> float:
    if spec.kind == "formula":
        return FORMULAS[spec.name].product_from(start)
    return 0.0 if any(x > 0 for x in spec.cycle) else 1.0


def tail_product_limit(p: LambdaProfile, i: int) -> float:
    """``prod_{k=i}^{+inf} (1 - lambda_k)``: the share of ``r_i`` never retained."""
    hi = p.window_hi
    if i >= hi:
        return _right_product(p.right_tail, i)
    rest = _right_product(p.right_tail, hi)
    if rest == 0.0:
        return 0.0
    return partial_product(p, i, hi - 1) * rest


def left_sum(spec: TailSpec, boundary: int, a: float, q: float) -> float:
    """``sum_{m>=1} prod_{k=L-m}^{L-1} (1 - lambda_k) * a * q**(m-1)`` with ``L = boundary``.

    ``spec`` must describe every ``lambda_k`` with ``k < boundary``.  With
    ``a = q = 1`` this is the mass arriving at ``L`` from unit incomes on
    every earlier generation.
    """
    if a == 0.0:
        return 0.0
    cycle = spec.cycle
    period = len(cycle)
    g = 1.0
    acc = []
    for u in range(1, period + 1):
        g *= 1.0 - cycle[(boundary - u) % period]
        acc.append(g * q ** (u - 1))
    beta = g
    denom = 1.0 - beta * q**period
    if denom <= 0.0:
        return INF
    return a * math.fsum(acc) / denom


def _step_mass(mass: float, lam: float) -> float:
    """Arrival mass one generation later: ``1 + (1 - lam) * mass``."""
    if lam == 1.0:
        return 1.0
    return 1.0 + (1.0 - lam) * mass


def _s(lam: float, mass: float) -> float:
    return 0.0 if lam == 0.0 else lam * mass


def arrival_mass(p: LambdaProfile, i: int) -> float:
    """``sum_{j<=i} prod_{k=j}^{i-1} (1 - lambda_k)``, possibly infinite."""
    lo, spec = p.left_regime()
    lo = min(lo, i)
    mass = 1.0 + left_sum(spec, lo, 1.0, 1.0)
    for k in range(lo, i):
        mass = _step_mass(mass, lambda_at(p, k))
    return mass


def s_value(p: LambdaProfile, i: int) -> float:
    """``S_i = lambda_i * sum_{j<=i} prod_{k=j}^{i-1} (1 - lambda_k)``."""
    return _s(lambda_at(p, i), arrival_mass(p, i))


def _sup_s_pure_left(spec: TailSpec, boundary: int) -> float:
    """Supremum of S over ``i < boundary`` where the profile follows ``spec``."""
    period = len(spec.cycle)
    start = boundary - period
    mass = 1.0 + left_sum(spec, start, 1.0, 1.0)
    best = 0.0
    for k in range(start, boundary):
        lam = spec.at(k)
        best = max(best, _s(lam, mass))
        mass = _step_mass(mass, lam)
    return best


def _sup_s_pure_right(spec: TailSpec, start: int, mass: float) -> float:
    """Supremum of S over ``i >= start`` for a constant or periodic right tail."""
    cycle = [spec.at(start + u) for u in range(len(spec.cycle))]
    if mass == INF:
        return INF if any(x > 0 for x in cycle) else 0.0
    if all(x == 0 for x in cycle):
        return 0.0

    def one_period(m):
        s_vals = []
        for lam in cycle:
            s_vals.append(_s(lam, m))
            m = _step_mass(m, lam)
        return s_vals, m

    first, _ = one_period(mass)
    # A(start + P) = alpha + beta * A(start); each phase is monotone in the
    # number of periods and converges to the fixed point
    _, alpha = one_period(0.0)
    beta = math.prod(1.0 - x for x in cycle)
    fixed = alpha / (1.0 - beta)
    steady, _ = one_period(fixed)
    return max(first + steady)


def sup_s(p: LambdaProfile) -> float:
    """``sup_i S_i`` as an extended real (``INF`` when unbounded)."""
    lo, spec = p.left_regime()
    best = _sup_s_pure_left(spec, lo)
    mass = 1.0 + left_sum(spec, lo, 1.0, 1.0)
    for k in range(lo, p.window_hi):
        lam = lambda_at(p, k)
        best = max(best, _s(lam, mass))
        mass = _step_mass(mass, lam)
    right = p.right_tail
    if right.kind == "formula":
        tail_sup = FORMULAS[right.name].sup_s_from(p.window_hi, mass)
    else:
        tail_sup = _sup_s_pure_right(right, p.window_hi, mass)
    return max(best, tail_sup)


# --------------------------------------------------------------------------
# sub-family classification


@dataclass(frozen=True)
class FamilyReport:
    """Membership of a geometric rule in the sub-families B, E, T, P and U."""

    in_B: bool
    in_E: bool
    in_T: bool
    in_P: bool
    in_U: bool
    sup_S: float
    inf_lambda: float
    witnesses: dict

    def flags(self) -> dict:
        return {k: getattr(self, k) for k in ("in_B", "in_E", "in_T", "in_P", "in_U")}

    def to_dict(self) -> dict:
        out = self.flags()
        out["sup_S"] = "inf" if self.sup_S == INF else self.sup_S
        out["inf_lambda"] = self.inf_lambda
        out["witnesses"] = dict(self.witnesses)
        return out


def _value_set(p: LambdaProfile) -> tuple[set, float]:
    """Distinct retention shares (``None`` marks a non-constant formula) and the infimum."""
    lo, left = p.left_regime()
    vals = set(left.cycle)
    vals.update(lambda_at(p, k) for k in range(lo, p.window_hi))
    right = p.right_tail
    if right.kind == "formula":
        inf_right = FORMULAS[right.name].inf_from(p.window_hi)
        vals_all = vals | {None}
        inf = min([inf_right] + list(vals))
        return vals_all, inf
    vals.update(right.cycle)
    return vals, min(vals)


def classify(p: LambdaProfile) -> FamilyReport:
    """Decide membership in B, E, T, P, U for the supported tail kinds."""
    w: dict = {}
    hi = p.window_hi
    right_limit = _right_product(p.right_tail, hi)
    in_B = right_limit == 0.0
    if in_B:
        w["in_B"] = f"tail products vanish beyond generation {hi}"
    else:
        w["in_B"] = f"prod_(k>={hi}) (1 - lambda_k) = {right_limit!r} > 0"

    vals, inf_lambda = _value_set(p)
    in_E = inf_lambda > 0.0
    w["in_E"] = f"inf lambda = {inf_lambda!r}"

    s_sup = sup_s(p)
    in_T = s_sup < INF
    w["in_T"] = f"sup S = {'inf' if s_sup == INF else repr(s_sup)}"

    _, left = p.left_regime()
    in_P = 1.0 in left.cycle
    w["in_P"] = (
        "unit retention recurs in the left tail"
        if in_P
        else "no unit retention below every generation"
    )

    in_U = None not in vals and len(vals) == 1
    w["in_U"] = f"constant lambda = {next(iter(vals))!r}" if in_U else "lambda is not constant"
    return FamilyReport(in_B, in_E, in_T, in_P, in_U, s_sup, inf_lambda, w)
