import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geotransfer.axioms import random_profile, random_stream
from geotransfer.fixtures import fixture_profiles
from geotransfer.profile import LambdaProfile, TailSpec, classify, lambda_at, uniform
from geotransfer.rules import (
    ConsistencyPreconditionError,
    InfeasibleRuleError,
    allocate,
    allocate_direct,
    allocate_direct_many,
    apply_geometric,
    consistency_transform,
    full_transfer,
    geometric,
    incoming_transfer,
    no_transfer,
    recover_lambda,
    total_allocated,
    total_below,
)
from geotransfer.stream import (
    GeometricTail,
    RepresentationError,
    Stream,
    basis,
    mass_below,
    scale,
    shift,
    sup_dist,
    taxicab_dist,
    taxicab_norm,
    value_at,
    with_value,
)
from oracles import exact_allocation, exact_transfer

PROFILES = fixture_profiles()
TWO_STEP = PROFILES["two_step"]
SIX_THREE = Stream(0, (6.0, 3.0))


def pair(seed, max_window=24):
    rng = np.random.default_rng(seed)
    return random_profile(rng, max_window), random_stream(rng, max_window)


def window_for(r, pad=6):
    lo = r.window_lo if r.left_tail is None else r.window_lo - pad
    return lo, r.window_hi + pad


seeds = st.integers(0, 2**32 - 1)


# -- worked examples, checked against exact rational arithmetic


def test_two_step_transfers_against_exact_oracle():
    lams = {0: F(1, 2), 1: F(1, 3)}
    income = {0: 6, 1: 3}
    assert [exact_transfer(lams, 1, income, i) for i in (1, 2)] == [3, 4]
    assert [exact_allocation(lams, 1, income, i) for i in range(3)] == [3, 2, 4]
    assert incoming_transfer(TWO_STEP, SIX_THREE, 1) == 3.0
    assert incoming_transfer(TWO_STEP, SIX_THREE, 2) == 4.0
    res = allocate(TWO_STEP, SIX_THREE, (0, 3))
    assert res.allocations == (3.0, 2.0, 4.0)
    assert res.total == 9.0 and res.leaked_mass == 0.0


def test_incoming_transfer_basis():
    assert incoming_transfer(uniform(0.3), basis(0), 0) == 0.0
    assert incoming_transfer(uniform(0.5), basis(0), 1) == 0.5
    assert incoming_transfer(uniform(0.5), basis(0), 2) == 0.25


def test_uniform_half_on_e0():
    res = allocate(uniform(0.5), basis(0), (-4, 30))
    assert res.allocations[:4] == (0.0,) * 4
    assert list(res.allocations[4:]) == [0.5 ** (i + 1) for i in range(30)]


def test_extreme_rules():
    r = Stream(-2, (1.0, 0.0, 4.0), None, GeometricTail(1.0, 0.5))
    assert taxicab_dist(no_transfer()(r), r) == 0.0
    out = full_transfer()(r)
    assert taxicab_norm(out) == 0.0
    res = allocate(uniform(0.0), r, (-2, 5))
    assert res.window_sum == 0.0 and res.leaked_mass == pytest.approx(taxicab_norm(r))
    res = allocate(uniform(1.0), r, (-2, 5))
    assert list(res.allocations) == [value_at(r, i) for i in range(-2, 5)]


def test_window_must_cover_support():
    with pytest.raises(ValueError):
        allocate(uniform(0.5), Stream(0, (1.0, 1.0)), (1, 4))
    allocate(uniform(0.5), Stream(0, (0.0, 1.0)), (1, 4))


def test_example1_leaks_exp_minus_one():
    ex = PROFILES["example1"]
    assert total_allocated(ex, basis(1)) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)
    res = allocate(ex, basis(1), (1, 30))
    assert res.leaked_mass == pytest.approx(math.exp(-1.0), abs=1e-12)
    assert res.window_sum + res.tail_allocation_sum == pytest.approx(1 - math.exp(-1.0), abs=1e-12)


def test_balance_for_b_member():
    r = Stream(-3, (1.0, 2.0), GeometricTail(0.5, 0.7), GeometricTail(2.0, 0.3))
    assert total_allocated(uniform(0.5), r) == pytest.approx(taxicab_norm(r), abs=1e-12)


def test_total_below_no_transfer():
    r = Stream(-3, (1.0, 2.0, 3.0, 4.0), GeometricTail(1.0, 0.5))
    assert total_below(uniform(1.0), r, 0) == pytest.approx(mass_below(r, 0))


def test_consistency_transform_examples():
    rj = consistency_transform(uniform(0.5), SIX_THREE, 1)
    assert value_at(rj, 1) == 6.0 and value_at(rj, 0) == 0.0
    r = Stream(-2, (1.0, 2.0, 3.0, 4.0))
    nt = consistency_transform(no_transfer(), r, 0)
    assert [value_at(nt, i) for i in range(-3, 3)] == [0, 0, 0, 3.0, 4.0, 0]


def test_consistency_transform_geometric_equals_mass_plus_transfer():
    p = TWO_STEP
    r = Stream(-1, (2.0, 6.0, 3.0, 1.0))
    for j in range(-1, 4):
        rj = consistency_transform(p, r, j)
        assert value_at(rj, j) == pytest.approx(value_at(r, j) + incoming_transfer(p, r, j), abs=1e-12)


def test_consistency_transform_precondition():
    class Doubler:
        def __call__(self, r):
            return scale(r, 2.0)

    with pytest.raises(ConsistencyPreconditionError):
        consistency_transform(Doubler(), Stream(0, (3.0, 1.0)), 1)


def test_recover_lambda():
    p = TWO_STEP
    q = recover_lambda(geometric(p), (-3, 5))
    assert [q[i] for i in range(-3, 5)] == [lambda_at(p, i) for i in range(-3, 5)]
    ones = recover_lambda(no_transfer(), (0, 4))
    assert ones.values == (1.0,) * 4

    class Doubler:
        def __call__(self, r):
            return scale(r, 2.0)

    with pytest.raises(InfeasibleRuleError) as info:
        recover_lambda(Doubler(), (0, 3))
    assert set(info.value.values.values()) == {2.0}


def test_output_tail_is_exact_for_constant_left_share():
    r = Stream(0, (1.0,), GeometricTail(2.0, 0.5), None)
    out = apply_geometric(uniform(0.25), r)
    assert out.left_tail is not None
    for i in range(-40, 3):
        assert value_at(out, i) == pytest.approx(allocate_direct(uniform(0.25), r, i), rel=1e-12, abs=1e-15)


def test_oracle_many_matches_single():
    p, r = pair(3)
    lo, hi = window_for(r)
    many = allocate_direct_many(p, r, range(lo, hi))
    assert many == [allocate_direct(p, r, i) for i in range(lo, hi)]


# -- randomized invariants


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_recurrence_matches_oracle(seed):
    p, r = pair(seed)
    lo, hi = window_for(r)
    res = allocate(p, r, (lo, hi))
    oracle = allocate_direct_many(p, r, range(lo, hi))
    assert max(abs(a - b) for a, b in zip(res.allocations, oracle)) <= 1e-10
    assert all(a >= 0.0 for a in res.allocations)


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_applied_rule_matches_allocation(seed):
    p, r = pair(seed)
    lo, hi = window_for(r)
    out = apply_geometric(p, r)
    res = allocate(p, r, (lo, hi))
    assert max(abs(value_at(out, i) - a) for i, a in zip(range(lo, hi), res.allocations)) <= 1e-10


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_accounting_identity(seed):
    p, r = pair(seed)
    lo, hi = window_for(r)
    res = allocate(p, r, (lo, hi))
    retained_left = res.left_allocation_sum
    lhs = res.window_sum + res.tail_allocation_sum + res.leaked_mass
    assert lhs == pytest.approx(taxicab_norm(r) - retained_left, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(seeds)
def test_feasibility_and_balance_on_b(seed):
    p, r = pair(seed)
    total = total_allocated(p, r)
    assert total <= taxicab_norm(r) + 1e-9
    assert taxicab_norm(apply_geometric(p, r)) <= taxicab_norm(r) + 1e-9
    if classify(p).in_B:
        assert total == pytest.approx(taxicab_norm(r), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_lipschitz(seed):
    rng = np.random.default_rng(seed)
    p = random_profile(rng, 16)
    r, s = random_stream(rng, 16), random_stream(rng, 16)
    rule = geometric(p)
    assert taxicab_dist(rule(r), rule(s)) <= taxicab_dist(r, s) + 1e-9


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(-30, 30))
def test_consistency(seed, j):
    p, r = pair(seed)
    rj = consistency_transform(p, r, j)
    hi = max(r.window_hi, j) + 8
    base = allocate(p, r, (min(window_for(r)[0], j), hi))
    after = allocate(p, rj, (j, hi))
    for i in range(j, hi):
        assert after[i] == pytest.approx(base[i], abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(seeds, st.sampled_from([0.0, 0.5, 2.0, 7.25]))
def test_scale_invariance(seed, alpha):
    p, r = pair(seed)
    w = window_for(r)
    a = allocate(p, scale(r, alpha), w).allocations
    b = allocate(p, r, w).allocations
    for x, y in zip(a, b):
        assert x == pytest.approx(alpha * y, rel=1e-12, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(-30, 30), st.floats(min_value=0.0, max_value=50.0))
def test_dependence_locality(seed, j, v):
    p, r = pair(seed)
    lo, _ = window_for(r)
    lo = min(lo, j)
    a = allocate(p, r, (lo, j)).allocations
    b = allocate(p, with_value(r, j, v), (lo, j)).allocations
    if r.left_tail is None or j >= r.window_lo:
        assert a == b
    else:
        # cutting the left income tail re-bases its coefficients
        assert b == pytest.approx(a, rel=1e-12, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_zero_for_inessential(seed):
    rng = np.random.default_rng(seed)
    p = random_profile(rng, 16)
    r = Stream(int(rng.integers(-10, 10)), tuple(rng.uniform(0, 5, 6)), None, None)
    s = r.support_start()
    if s is None:
        return
    res = allocate(p, r, (s - 10, s))
    assert all(a == 0.0 for a in res.allocations)


@settings(max_examples=100, deadline=None)
@given(seeds, st.one_of(st.just(0.0), st.floats(min_value=1e-6, max_value=1.0)))
def test_translation_covariance_uniform(seed, c):
    rng = np.random.default_rng(seed)
    r = random_stream(rng, 16)
    rule = geometric(uniform(c))
    assert sup_dist(rule(shift(r)), shift(rule(r))) <= 1e-10


@pytest.mark.parametrize("c", [0.0, 0.1, 0.5, 0.9, 1.0])
def test_idempotency_dichotomy(c):
    rule = geometric(uniform(c))
    r = Stream(0, (1.0, 2.0))
    out = rule(r)
    gap = sup_dist(rule(out), out)
    if c in (0.0, 1.0):
        assert gap == 0.0
    else:
        assert gap > 1e-3


def test_subnormal_share_is_not_representable():
    with pytest.raises(RepresentationError):
        apply_geometric(uniform(1e-300), basis(0))


def test_formula_right_tail_allocation():
    ex = PROFILES["example1"]
    r = Stream(-2, (1.0, 1.0, 1.0), GeometricTail(1.0, 0.5), GeometricTail(1.0, 0.5))
    out = apply_geometric(ex, r)
    for i in range(-8, 25):
        assert value_at(out, i) == pytest.approx(allocate_direct(ex, r, i), abs=1e-12)
    assert taxicab_norm(out) == pytest.approx(total_allocated(ex, r), abs=1e-10)


def test_periodic_left_tail_with_income_tail():
    p = LambdaProfile(0, (0.5,), TailSpec.periodic([0.2, 0.7, 0.0]), TailSpec.constant(0.4))
    r = Stream(0, (1.0,), GeometricTail(3.0, 0.8), None)
    out = apply_geometric(p, r)
    for i in range(-60, 10):
        assert value_at(out, i) == pytest.approx(allocate_direct(p, r, i), abs=1e-11)
    assert taxicab_norm(out) == pytest.approx(taxicab_norm(r), abs=1e-10)
    assert total_below(p, r, 0) == pytest.approx(
        math.fsum(value_at(out, i) for i in range(-400, 0)), abs=1e-10
    )
