"""Nonnegative doubly-infinite income streams.

A :class:`Stream` stores explicit incomes on a finite window ``[window_lo,
window_hi)`` plus optional geometric tails on either side.  The left tail
gives the income of generation ``window_lo - k`` and the right tail the
income of generation ``window_hi - 1 + k`` for ``k >= 1``; both equal
``coefficient * ratio ** (k - 1)``.  Every norm and distance below is
evaluated in closed form, tails included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "GeometricTail",
    "Stream",
    "RepresentationError",
    "DEFAULT_TOL",
    "DEFAULT_HORIZON",
    "TRUNCATION_TOL",
    "basis",
    "null",
    "value_at",
    "scale",
    "add",
    "shift",
    "restrict",
    "truncate_left",
    "taxicab_norm",
    "sup_norm",
    "taxicab_dist",
    "sup_dist",
    "mass_below",
    "mass_from",
    "with_value",
    "is_finite_support",
    "from_values",
    "sample",
]

DEFAULT_TOL = 1e-9
DEFAULT_HORIZON = 512
TRUNCATION_TOL = 1e-12

# sign changes further out than this are refused; heads past 4096 terms are summed with numpy
_MAX_CROSSING = 10_000_000


class RepresentationError(ValueError):
    """Raised when a result cannot be held as window plus geometric tails."""


def _as_real(x: Any, what: str) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"{what} must be finite, got {x!r}")
    return x


@dataclass(frozen=True)
class GeometricTail:
    """Tail whose value at offset ``k >= 1`` is ``coefficient * ratio**(k-1)``."""

    coefficient: float
    ratio: float

    def __post_init__(self) -> None:
        c = _as_real(self.coefficient, "tail coefficient")
        q = _as_real(self.ratio, "tail ratio")
        if c < 0:
            raise ValueError(f"tail coefficient must be >= 0, got {c}")
        if not 0 <= q < 1:
            raise ValueError(f"tail ratio must lie in [0, 1), got {q}")
        object.__setattr__(self, "coefficient", c)
        object.__setattr__(self, "ratio", q)

    def value(self, k: int) -> float:
        if k < 1:
            raise ValueError("tail offsets start at 1")
        if self.coefficient == 0.0:
            return 0.0
        return self.coefficient * self.ratio ** (k - 1)

    def total(self) -> float:
        return self.coefficient / (1.0 - self.ratio)

    def remainder(self, k: int) -> float:
        """Sum of the tail beyond offset ``k``."""
        if self.coefficient == 0.0:
            return 0.0
        return self.coefficient * self.ratio**k / (1.0 - self.ratio)

    def advance(self, k: int) -> "GeometricTail":
        """The same tail seen from ``k`` generations further out."""
        return GeometricTail(self.coefficient * self.ratio**k if k else self.coefficient, self.ratio)

    @property
    def finite(self) -> bool:
        return self.coefficient == 0.0 or self.ratio == 0.0

    def to_dict(self) -> dict:
        return {"coefficient": self.coefficient, "ratio": self.ratio}


@dataclass(frozen=True)
class Stream:
    """Income profile ``r: Z -> R+`` with finite taxicab norm."""

    window_lo: int = 0
    values: tuple = ()
    left_tail: Optional[GeometricTail] = None
    right_tail: Optional[GeometricTail] = None

    def __post_init__(self) -> None:
        vals = tuple(_as_real(v, "income") for v in self.values)
        for i, v in enumerate(vals):
            if v < 0:
                raise ValueError(f"income at generation {self.window_lo + i} is negative ({v})")
        object.__setattr__(self, "window_lo", int(self.window_lo))
        object.__setattr__(self, "values", vals)
        # zero-coefficient tails are the same as no tail
        for side in ("left_tail", "right_tail"):
            tail = getattr(self, side)
            if tail is not None and tail.coefficient == 0.0:
                object.__setattr__(self, side, None)

    @property
    def window_hi(self) -> int:
        return self.window_lo + len(self.values)

    def __getitem__(self, i: int) -> float:
        return value_at(self, i)

    def extend(self, lo: int, hi: int) -> "Stream":
        """Materialize tail values so that the window covers ``[lo, hi)``."""
        new_lo = min(lo, self.window_lo)
        new_hi = max(hi, self.window_hi)
        if new_lo == self.window_lo and new_hi == self.window_hi:
            return self
        n_left = self.window_lo - new_lo
        n_right = new_hi - self.window_hi
        left = self.left_tail
        right = self.right_tail
        head = [left.value(k) for k in range(n_left, 0, -1)] if left else [0.0] * n_left
        tail = [right.value(k) for k in range(1, n_right + 1)] if right else [0.0] * n_right
        return Stream(
            new_lo,
            tuple(head) + self.values + tuple(tail),
            left.advance(n_left) if left else None,
            right.advance(n_right) if right else None,
        )

    def support_start(self) -> Optional[int]:
        """First generation with positive income, ``None`` when unbounded or empty."""
        if self.left_tail is not None:
            return None
        for k, v in enumerate(self.values):
            if v > 0:
                return self.window_lo + k
        if self.right_tail is not None:
            return self.window_hi
        return None

    def to_dict(self) -> dict:
        out: dict = {"window_lo": self.window_lo, "values": list(self.values)}
        if self.left_tail is not None:
            out["left_tail"] = self.left_tail.to_dict()
        if self.right_tail is not None:
            out["right_tail"] = self.right_tail.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Stream":
        unknown = set(data) - {"window_lo", "values", "left_tail", "right_tail", "name"}
        if unknown:
            raise ValueError(f"unknown stream fields: {sorted(unknown)}")

        def tail(d):
            if d is None:
                return None
            return GeometricTail(d["coefficient"], d["ratio"])

        return cls(
            int(data.get("window_lo", 0)),
            tuple(data.get("values", ())),
            tail(data.get("left_tail")),
            tail(data.get("right_tail")),
        )


def null() -> Stream:
    """The null stream ``0_Z``."""
    return Stream()


def basis(i: int) -> Stream:
    """Unit income at generation ``i``, zero elsewhere."""
    return Stream(i, (1.0,))


def value_at(r: Stream, i: int) -> float:
    lo, hi = r.window_lo, r.window_hi
    if lo <= i < hi:
        return r.values[i - lo]
    if i < lo:
        return r.left_tail.value(lo - i) if r.left_tail else 0.0
    return r.right_tail.value(i - hi + 1) if r.right_tail else 0.0


def with_value(r: Stream, i: int, v: float) -> Stream:
    """Copy of ``r`` with generation ``i`` set to ``v``."""
    s = r.extend(i, i + 1)
    vals = list(s.values)
    vals[i - s.window_lo] = v
    return Stream(s.window_lo, tuple(vals), s.left_tail, s.right_tail)


def scale(r: Stream, alpha: float) -> Stream:
    alpha = _as_real(alpha, "scale factor")
    if alpha < 0:
        raise ValueError("scale factor must be nonnegative")

    def t(tail):
        return GeometricTail(alpha * tail.coefficient, tail.ratio) if tail else None

    return Stream(r.window_lo, tuple(alpha * v for v in r.values), t(r.left_tail), t(r.right_tail))


def shift(r: Stream, by: int = 1) -> Stream:
    """Translate so that ``shift(r)[i + by] == r[i]``."""
    return Stream(r.window_lo + by, r.values, r.left_tail, r.right_tail)


def _merge_depth(a, b, horizon):
    """Generations to materialize before two same-side tails can be merged."""
    if a is None or b is None or a.ratio == b.ratio:
        return 0
    fast = a if a.ratio < b.ratio else b
    k = 0
    while fast.remainder(k) >= TRUNCATION_TOL:
        k += 1
        if k > horizon:
            raise RepresentationError(
                f"tails with ratios {a.ratio} and {b.ratio} do not merge within {horizon} generations"
            )
    return k


def _combine(a, b):
    if a is None or b is None:
        return a or b
    if a.ratio == b.ratio:
        return GeometricTail(a.coefficient + b.coefficient, a.ratio)
    # the faster tail has been materialized down to negligible mass
    return a if a.ratio > b.ratio else b


def add(r: Stream, s: Stream, horizon: int = DEFAULT_HORIZON) -> Stream:
    """Pointwise sum.

    Tails with equal ratios add exactly.  Otherwise the faster-decaying tail
    is materialized until its remaining mass is below ``TRUNCATION_TOL`` and
    the slower one carries on as the tail of the sum.
    """
    k_left = _merge_depth(r.left_tail, s.left_tail, horizon)
    k_right = _merge_depth(r.right_tail, s.right_tail, horizon)
    lo = min(r.window_lo, s.window_lo) - k_left
    hi = max(r.window_hi, s.window_hi) + k_right
    a = r.extend(lo, hi)
    b = s.extend(lo, hi)
    vals = tuple(x + y for x, y in zip(a.values, b.values))
    return Stream(lo, vals, _combine(a.left_tail, b.left_tail), _combine(a.right_tail, b.right_tail))


def restrict(r: Stream, lo: Optional[int] = None, hi: Optional[int] = None) -> Stream:
    """Zero every generation outside ``[lo, hi)``; ``None`` leaves that side open."""
    if lo is not None and hi is not None and hi <= lo:
        return null()
    a = r.window_lo if lo is None else lo
    b = r.window_hi if hi is None else hi
    s = r.extend(min(a, b), max(a, b))
    start = 0 if lo is None else lo - s.window_lo
    stop = len(s.values) if hi is None else hi - s.window_lo
    return Stream(
        s.window_lo + start,
        s.values[start:stop],
        s.left_tail if lo is None else None,
        s.right_tail if hi is None else None,
    )


def truncate_left(r: Stream, m: int) -> Stream:
    """Keep generations ``j >= -m`` and zero the rest."""
    if m < 0:
        raise ValueError("truncation depth must be nonnegative")
    return restrict(r, lo=-m)


def taxicab_norm(r: Stream) -> float:
    parts = list(r.values)
    if r.left_tail:
        parts.append(r.left_tail.total())
    if r.right_tail:
        parts.append(r.right_tail.total())
    return math.fsum(parts)


def sup_norm(r: Stream) -> float:
    # the head of a tail is its largest value
    parts = list(r.values) + [0.0]
    if r.left_tail:
        parts.append(r.left_tail.coefficient)
    if r.right_tail:
        parts.append(r.right_tail.coefficient)
    return max(parts)


def mass_below(r: Stream, j: int) -> float:
    """Sum of incomes of generations ``i < j``."""
    return taxicab_norm(restrict(r, hi=j))


def mass_from(r: Stream, j: int) -> float:
    """Sum of incomes of generations ``i >= j``."""
    return taxicab_norm(restrict(r, lo=j))


def _tail_params(tail):
    return (tail.coefficient, tail.ratio) if tail else (0.0, 0.0)


def _geometric_abs_diff_sum(a: float, x: float, b: float, y: float) -> float:
    """Exact ``sum_{k>=0} |a x^k - b y^k|``.

    ``a x^k - b y^k`` changes sign at most once, at
    ``k* = log(b/a) / log(x/y)``; terms are summed explicitly up to the
    crossing and in closed form afterwards.
    """
    if a == 0.0:
        return b / (1.0 - y)
    if b == 0.0:
        return a / (1.0 - x)
    if x == y:
        return abs(a - b) / (1.0 - x)
    if x == 0.0 or y == 0.0:
        k_cross = 1
    else:
        k_cross = (math.log(b) - math.log(a)) / (math.log(x) - math.log(y))
        k_cross = max(0, math.ceil(k_cross)) if k_cross > 0 else 0
        # past k_neg both remainders are below 1e-17 of the total, so the sign change is immaterial
        total = a / (1.0 - x) + b / (1.0 - y)
        floor = math.log(1e-17) + math.log(total)
        k_neg = max(
            (floor + math.log1p(-x) - math.log(a)) / math.log(x),
            (floor + math.log1p(-y) - math.log(b)) / math.log(y),
        )
        k_cross = min(k_cross, max(0, math.ceil(k_neg)))
    if k_cross > _MAX_CROSSING:
        raise RepresentationError("tail difference changes sign too far out to sum exactly")
    if k_cross <= 4096:
        head = [abs(a * x**k - b * y**k) for k in range(k_cross)]
        head_sum = math.fsum(head)
    else:
        k = np.arange(k_cross, dtype=float)
        head_sum = math.fsum(np.abs(a * x**k - b * y**k))
    rest = a * x**k_cross / (1.0 - x) - b * y**k_cross / (1.0 - y)
    return head_sum + abs(rest)


def _geometric_abs_diff_sup(a: float, x: float, b: float, y: float) -> float:
    """Exact ``sup_{k>=0} |a x^k - b y^k|``.

    A difference of two decaying exponentials has at most one critical
    point, so the supremum sits at ``k = 0`` or at an integer next to it.
    """
    if a == 0.0 or b == 0.0:
        return max(a, b)
    if x == y:
        return abs(a - b)
    cands = {0, 1}
    if x > 0.0 and y > 0.0:
        num = math.log(b) + math.log(-math.log(y)) - math.log(a) - math.log(-math.log(x))
        k0 = num / (math.log(x) - math.log(y))
        if 0.0 < k0 < 1e15:
            cands.update((math.floor(k0), math.ceil(k0)))
    return max(abs(a * x**k - b * y**k) for k in cands)


def _aligned(r: Stream, s: Stream):
    lo = min(r.window_lo, s.window_lo)
    hi = max(r.window_hi, s.window_hi)
    return r.extend(lo, hi), s.extend(lo, hi)


def taxicab_dist(r: Stream, s: Stream) -> float:
    a, b = _aligned(r, s)
    parts = [abs(u - v) for u, v in zip(a.values, b.values)]
    parts.append(_geometric_abs_diff_sum(*_tail_params(a.left_tail), *_tail_params(b.left_tail)))
    parts.append(_geometric_abs_diff_sum(*_tail_params(a.right_tail), *_tail_params(b.right_tail)))
    return math.fsum(parts)


def sup_dist(r: Stream, s: Stream) -> float:
    a, b = _aligned(r, s)
    parts = [abs(u - v) for u, v in zip(a.values, b.values)] + [0.0]
    parts.append(_geometric_abs_diff_sup(*_tail_params(a.left_tail), *_tail_params(b.left_tail)))
    parts.append(_geometric_abs_diff_sup(*_tail_params(a.right_tail), *_tail_params(b.right_tail)))
    return max(parts)


def is_finite_support(r: Stream) -> bool:
    """True when only finitely many generations have positive income."""
    return all(t is None or t.finite for t in (r.left_tail, r.right_tail))


def from_values(values: Sequence[float] | dict, window_lo: int = 0) -> Stream:
    """Convenience constructor: a list starting at ``window_lo`` or an ``{index: value}`` map."""
    if isinstance(values, dict):
        if not values:
            return null()
        lo, hi = min(values), max(values) + 1
        return Stream(lo, tuple(float(values.get(i, 0.0)) for i in range(lo, hi)))
    return Stream(window_lo, tuple(values))


def sample(r: Stream, indices: Iterable[int]) -> list[float]:
    return [value_at(r, i) for i in indices]
