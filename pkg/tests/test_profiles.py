import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from projlab.corpus import check_partition, check_split, teal_ok, yellow_ok
from projlab.profiles import (
    EXACT, ComplexityProfile, classify_interval, effective_dims, eps_slack, format_profile, growth,
    is_valid, log_slack, parse_profile, partition, reduce_oracle, split_teal_yellow, validate_profile,
)

from strategies import intervals, profiles, sigmas

P = ComplexityProfile
F = Fraction


def test_validate_examples():
    assert validate_profile(P((0, 1, 2, 3), 2)) == []
    v = validate_profile(P((0, 3), 2))
    assert [(x.index, x.rule) for x in v] == [(1, "growth_cap")]
    v = validate_profile(P((1, 1), 1))
    assert [(x.index, x.rule) for x in v] == [(0, "origin")]
    assert {x.rule for x in validate_profile(P((0, 2, 1), 2))} == {"monotone"}


def test_growth_examples():
    assert growth(P((0, 1, 2, 2, 2)), 0, 4) == 2
    assert growth(P((0, 1, 2, 2, 2)), 3, 3) == 0
    assert growth(P((0, 2, 4, 6)), 1, 3) == 4
    with pytest.raises(ValueError):
        growth(P((0, 2, 4, 6)), 3, 1)


def test_reduce_oracle_examples():
    p = P((0, 1, 2, 3, 4))
    assert reduce_oracle(p, 2).values == (0, 1, 2, 2, 2)
    assert reduce_oracle(p, 4) == p
    assert reduce_oracle(p, 0).values == (0,) * 5


def test_classify_examples():
    lab = classify_interval(P((0, 1, 2, 2, 2)), 0, 4, 1)
    assert lab.is_teal
    # the five-point profile only reaches R=4; yellow on [0, 4]
    lab = classify_interval(P((0, 2, 4, 5, 6)), 0, 4, 1)
    assert lab.is_yellow and lab.kind == "yellow"
    lab = classify_interval(P((0, 1, 2, 2, 3)), 0, 4, 1, eps_slack(F(1, 4)))
    assert lab.is_yellow and lab.yellow_deficit == 1
    assert not classify_interval(P((0, 1, 2, 2, 3)), 0, 4, 1).is_yellow
    with pytest.raises(ValueError):
        classify_interval(P((0, 1, 2)), 1, 5, 1)


def test_log_slack_is_exact():
    p = P((0, 0, 0, 0, 0))
    # yellow deficit 4 on [0, 4]; c log2 b = 1 * 2 at b = 4, 2 * 2 = 4 at c = 2
    assert not classify_interval(p, 0, 4, 1, log_slack(1)).is_yellow
    assert classify_interval(p, 0, 4, 1, log_slack(2)).is_yellow


def test_split_examples():
    m, pieces = split_teal_yellow(P((0, 0, 0, 2, 4, 6)), 0, 5, 1)
    assert m == 2 and [tuple(x) for x in pieces] == [(0, 2, "teal"), (2, 5, "yellow")]
    m, _ = split_teal_yellow(P(tuple(range(8))), 0, 7, 1)
    assert m == 7
    m, _ = split_teal_yellow(P((0, 2, 4, 6)), 0, 3, 1)
    assert m == 0


def test_partition_examples():
    p = P((0, 0, 0, 2, 4, 6))
    assert [tuple(x) for x in partition(p, 0, 5, 1, 5)] == [(0, 2, "teal"), (2, 5, "yellow")]
    q = P((0, 0, 0, 2, 4, 6, 6))
    out = partition(q, 0, 6, 1, 3)
    assert len(out) <= 4 and not check_partition(q, 0, 6, F(1), 3, out)
    assert [tuple(x) for x in partition(q, 2, 2, 1, 3)] == [(2, 2, "teal")]


def test_effective_dims_examples():
    assert effective_dims(P(tuple(range(17)))) == (1, 1)
    half = P.from_increments([2] * 8 + [0] * 8)
    lo, hi = effective_dims(half)
    assert lo == F(16, 16) and hi == F(16, 12)
    assert effective_dims(P((0,) * 9)) == (0, 0)
    with pytest.raises(ValueError):
        effective_dims(P((0, 1)), window=4)


def test_text_roundtrip(tmp_path):
    p = P((0, 1, 3, 4), 2)
    assert format_profile(p) == "3 2\n0 1 3 4\n"
    assert parse_profile(format_profile(p)) == p
    with pytest.raises(ValueError):
        parse_profile("3 2\n0 1 2")


@given(profiles(max_r=40), sigmas, st.data())
def test_split_passes_definitions(p, sigma, data):
    a, b = data.draw(intervals(p))
    m, pieces = split_teal_yellow(p, a, b, sigma)
    assert check_split(p, a, b, sigma, m, pieces) == []
    assert classify_interval(p, a, m, sigma, EXACT).is_teal
    assert classify_interval(p, m, b, sigma, EXACT).is_yellow


@given(profiles(max_r=64), sigmas, st.integers(1, 20), st.data())
def test_partition_passes_definitions(p, sigma, max_len, data):
    a, b = data.draw(intervals(p))
    out = partition(p, a, b, sigma, max_len)
    assert check_partition(p, a, b, sigma, max_len, out) == []
    assert len(out) <= max(1, 2 * math.ceil((b - a) / max_len))


@given(profiles(max_r=30), sigmas, st.data())
def test_classify_matches_definitions(p, sigma, data):
    a, b = data.draw(intervals(p))
    lab = classify_interval(p, a, b, sigma)
    assert lab.is_teal == teal_ok(p.values, a, b, sigma)
    assert lab.is_yellow == yellow_ok(p.values, a, b, sigma)


@given(profiles(max_r=30), st.integers(0, 70))
def test_reduce_oracle_valid_and_below(p, cap):
    q = reduce_oracle(p, cap)
    assert is_valid(q)
    assert all(x <= y for x, y in zip(q.values, p.values))


@given(profiles(min_r=1, max_r=30), st.data())
def test_growth_telescopes(p, data):
    a, c = data.draw(intervals(p))
    b = data.draw(st.integers(a, c))
    assert growth(p, a, c) == growth(p, a, b) + growth(p, b, c)


@given(profiles(max_r=30, ambient_dim=1))
def test_generated_profiles_valid(p):
    assert is_valid(p)
