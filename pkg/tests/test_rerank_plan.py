import pytest
from hypothesis import given, strategies as st

from hlmcite.rerank import PlanError, plan_split


def test_paper_case_r7_t5():
    plan = plan_split(7, 5)
    assert (plan.fixed_count, plan.pool_count, plan.slots) == (3, 4, 2)
    assert not plan.clamped


def test_paper_case_r8_t5():
    plan = plan_split(8, 5)
    assert (plan.fixed_count, plan.pool_count, plan.slots) == (2, 6, 3)


def test_boundary_r_equals_2t1():
    plan = plan_split(10, 5)
    assert (plan.fixed_count, plan.pool_count, plan.slots) == (0, 10, 5)
    assert not plan.clamped


def test_r_equals_t1_keeps_everything_fixed():
    plan = plan_split(5, 5)
    assert (plan.fixed_count, plan.pool_count, plan.slots) == (5, 0, 0)


def test_clamped_beyond_twice_t1():
    plan = plan_split(12, 5)
    assert plan.clamped
    assert (plan.fixed_count, plan.pool_count, plan.slots) == (0, 12, 5)


def test_errors():
    with pytest.raises(PlanError):
        plan_split(4, 5)
    with pytest.raises(PlanError):
        plan_split(5, 0)


@given(st.integers(min_value=1, max_value=20).flatmap(
    lambda t1: st.tuples(st.just(t1), st.integers(min_value=t1, max_value=2 * t1))
))
def test_arithmetic_identity_in_band(pair):
    t1, r = pair
    plan = plan_split(r, t1)
    assert plan.fixed_count == 2 * t1 - r
    assert plan.pool_count == 2 * (r - t1)
    assert plan.slots == r - t1
    assert plan.fixed_count + plan.pool_count == r
    assert plan.fixed_count + plan.slots == t1


def test_split_applies_to_retrieval_order():
    plan = plan_split(8, 5)
    ids = [f"c{i}" for i in range(8)]
    fixed, pool = plan.split(ids)
    assert fixed == ("c0", "c1")
    assert pool == tuple(f"c{i}" for i in range(2, 8))
    with pytest.raises(PlanError):
        plan.split(ids[:-1])
