import json
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from projlab.bounds import (
    EngineConfig, PreconditionError, Variant, bound_thm31, bound_thm32, bourgain_certificate,
    chain_certificate, direction_hypothesis, teal_interval_bound, thm31_certificate, thm32_certificate,
    yellow_interval_bound,
)
from projlab.directions import parse_seq
from projlab.error_terms import ErrorTerm, et_eval
from projlab.profiles import ComplexityProfile

from strategies import profiles

P = ComplexityProfile
F = Fraction


def ideal(R, rate=1):
    return P(tuple(math.ceil(F(rate) * s) for s in range(R + 1)), 1)


def test_thm31_examples():
    assert bound_thm31(0.8, 0.7, 1e-4, 10**4, log_const=0) == 6000
    assert bound_thm31(F(4, 5), F(7, 10), 0, 1000, log_const=0) == 700
    assert bound_thm31(0.5, 0.5, 1e-4, 10**4, log_const=0) == 4000
    assert bound_thm31(0.8, 0.7, 0, 1024) == F(7, 10) * 1024 - 10
    assert bound_thm31(0, 1, 1, 100) == 0
    with pytest.raises(ValueError):
        bound_thm31(1, 0, 0, 100)
    with pytest.raises(ValueError):
        bound_thm31(1, 1, 0, 1)


def test_thm32_examples():
    assert bound_thm32(120, 100, 50, 2, 0.01) == 55
    assert bound_thm32(80, 100, 50, 2, 0.01) == 35
    assert bound_thm32(0, 100, 50, 2, 0.01) == 20
    with pytest.raises(PreconditionError):
        bound_thm32(80, 100, 40, 2, 0)
    with pytest.raises(ValueError):
        bound_thm32(80, 100, 101, 2, 0)


def _yellow60():
    # slope 1 up to 100, then growth 60 on [100, 150] (slope 2 for 10, slope 1 after)
    incs = [1] * 100 + [2] * 10 + [1] * 40
    return P.from_increments(incs)


def test_yellow_bound_examples():
    p = _yellow60()
    assert p[150] - p[100] == 60
    v, err = yellow_interval_bound(p, 100, 150, 1, Variant("log2"))
    assert v == 10 and err == ErrorTerm(c_log2=1)
    v, err = yellow_interval_bound(p, 100, 150, 1, Variant("eps", F(1, 100)))
    assert v == 10 and err == ErrorTerm(c_epsb=4)
    assert et_eval(err, 150, F(1, 100)) == 6
    v, _ = yellow_interval_bound(P(tuple(range(41))), 20, 40, 1, Variant("exact"))
    assert v == 0


def test_yellow_rounds_up():
    p = P.from_increments([1] * 40)
    v, _ = yellow_interval_bound(p, 17, 20, F(2, 3), Variant("exact"))
    assert v == 1  # 3 - 2 = 1 exactly
    v, _ = yellow_interval_bound(p, 16, 20, F(2, 3), Variant("exact"))
    assert v == 2  # 4 - 8/3 = 4/3 rounds up


def test_teal_bound_examples():
    p = P.from_increments([2] * 10 + [0] * 30)
    assert teal_interval_bound(p, 16, 40, 1, Variant("log2")) == (0, ErrorTerm(c_log2=1))
    assert teal_interval_bound(p, 16, 40, 1, Variant("eps", F(1, 10)))[1] == ErrorTerm(c_epsb=4)
    assert teal_interval_bound(p, 20, 20, 1, Variant("sqrt"))[0] == 0


def test_interval_preconditions():
    p = P.from_increments([2] * 10 + [0] * 30)
    with pytest.raises(PreconditionError):
        yellow_interval_bound(p, 16, 40, 1, Variant("exact"))  # flat: not yellow
    with pytest.raises(PreconditionError):
        teal_interval_bound(p, 0, 8, 1, Variant("exact"))  # b below b_min
    with pytest.raises(PreconditionError):
        teal_interval_bound(p, 16, 40, 1, Variant("exact"), direction=P((0,) * 41, 1))


def test_direction_hypothesis_examples():
    assert direction_hypothesis(ideal(64), 0, 64, 1, Variant("exact"))
    masked = P.from_increments([1] * 8 + [0] * 8 + [1] * 48, 1)
    res = direction_hypothesis(masked, 0, 64, 1, Variant("exact"))
    assert not res and res.first_fail == 9
    # log slack c log2 64 = 6 absorbs six missing bits
    res = direction_hypothesis(masked, 0, 64, 1, Variant("log2"))
    assert not res and res.first_fail == 15
    assert direction_hypothesis(ideal(64, F(1, 2)), 0, 64, F(1, 2), Variant("exact"))


def test_chain_examples():
    seq = parse_seq("list:2,8,32")
    c = chain_certificate(P(tuple(range(97))), ideal(96), seq, 1, Variant("exact"))
    assert c.status == "certified" and c.total_value == 0 and c.bound == 96
    assert c.statement_id == "prop5.4"
    assert all(e.label in ("yellow", "head") for e in c.ledger)
    half = P(tuple(math.ceil(F(r, 2)) for r in range(257)))
    c = chain_certificate(half, ideal(256), seq, F(1, 2), Variant("log2"))
    assert c.certified_rate >= F(1, 2) - c.evaluated_error / 256
    assert c.bound >= 128
    bad = P.from_increments([1] * 20 + [0] * 60 + [1] * 16, 1)
    c = chain_certificate(P(tuple(range(97))), bad, seq, 1, Variant("exact"))
    assert c.status == "inapplicable" and c.failing_interval == (16, 48)
    assert c.certified_rate == 0


def test_prop51_reports_both_rates():
    R = 512
    p = P(tuple(math.ceil(F(4, 5) * r) for r in range(R + 1)))
    c = chain_certificate(p, ideal(R), parse_seq("geo:4"), F(4, 5), Variant("eps", F(1, 100)))
    assert c.statement_id == "prop5.1"
    M = c.extras["pieces"]
    assert c.extras["ledger_rate"] == F(4, 5) - (4 * M + 1) * F(1, 100)
    assert c.extras["blanket_rate"] == F(4, 5) - F(25, 100)


def test_bourgain_examples():
    seq = parse_seq("list:2")
    pe = ideal(100)
    tight = P.from_increments([0] * 50 + [2] * 50)
    c = bourgain_certificate(tight, pe, seq)
    assert c.extras["case"] == "split" and c.extras["yellow"] == [[50, 100]]
    assert c.extras["raw_bound"] == 50 and c.extras["L"] == 50
    front = P.from_increments([2] * 30 + [0] * 70)
    c = bourgain_certificate(front, pe, seq)
    assert c.extras["yellow"] == [] and c.bound == 60
    c = bourgain_certificate(P(tuple(range(101))), pe, seq)
    assert c.bound == 100
    assert c.extra_log and c.statement_id == "prop6.1"


def test_bourgain_partition_case():
    seq = parse_seq("geo:4")
    tight = P.from_increments([0] * 64 + [2] * 64)
    c = bourgain_certificate(tight, ideal(128), seq)
    assert c.extras["case"] == "partition"
    assert c.extras["raw_bound"] == 64


def test_closed_form_certificates():
    p = P(tuple(math.ceil(F(4, 5) * r) for r in range(1025)))
    c = thm31_certificate(p, ideal(1024, F(7, 10)))
    assert c.statement_id == "thm3.1" and 0 < c.certified_rate <= F(7, 10)
    c = thm32_certificate(p, ideal(1024), C=2)
    assert c.extras["t"] == 1024 and c.extras["upper_bound"] == max(F(820 - 1024), F(0))


def test_certificate_json_stable():
    seq = parse_seq("geo:4")
    p = P.from_increments([0] * 64 + [2] * 64)
    a = bourgain_certificate(p, ideal(128), seq).dumps()
    b = bourgain_certificate(p, ideal(128), seq).dumps()
    assert a == b
    obj = json.loads(a)
    assert list(obj) == sorted(obj)
    assert obj["certified_rate"][1] > 0


cfg2 = EngineConfig(b_min=2)


@given(profiles(min_r=2, max_r=64))
def test_bourgain_half_bound(p):
    R = p.horizon
    c = bourgain_certificate(p, ideal(R), parse_seq("geo:4"), cfg2)
    assert c.applicable
    assert c.bound >= -(-p[R] // 2)
    assert c.bound <= R
    assert 0 <= c.certified_rate <= 2


@given(profiles(min_r=2, max_r=64), st.sampled_from([F(1, 2), F(1), F(3, 4)]),
       st.sampled_from(["exact", "log2", "sqrt", "eps(1/20)"]))
def test_chain_invariants(p, sigma, variant):
    R = p.horizon
    c = chain_certificate(p, ideal(R), parse_seq("geo:4"), sigma, Variant.parse(variant), cfg2)
    assert c.total_value == sum(e.value for e in c.ledger)
    assert c.bound == p[R] - c.total_value
    assert 0 <= c.certified_rate <= p.ambient_dim
    pos = 0
    for e in c.ledger:
        assert e.a == pos
        pos = e.b
    assert pos == R
