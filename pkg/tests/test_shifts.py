import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcalg.errors import HorizonError, SpecError
from hcalg.seq import TruncatedSeq
from hcalg.shifts import (
    WeightSeq,
    apply_shift,
    check_gamma_condition,
    check_inverse_example,
    check_mk_weight,
    derivative_weight,
    tends_to_zero,
    verify_regularity,
)
from hcalg.spaces import SpaceSpec

H = 40
weights = st.lists(st.floats(0.2, 5.0), min_size=H, max_size=H)
coeff = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)
vectors = st.dictionaries(st.integers(0, H), coeff, max_size=6).map(lambda d: TruncatedSeq.from_values(d, H))


def step_backward(wts, v):
    """One application of e_n -> w_n e_{n-1} on a dense vector, w_n = wts[n-1]."""
    out = np.zeros_like(v)
    for n in range(1, v.size):
        out[n - 1] = wts[n - 1] * v[n]
    return out


def test_weight_products_examples():
    w = WeightSeq.rolewicz(2.0, 10)
    assert w.logW(10) == pytest.approx(10 * math.log(2))
    assert w.log_prod(4, 3) == 0.0
    d = derivative_weight(6)
    assert math.exp(d.logW(5)) == pytest.approx(120.0)
    assert math.exp(d.log_prod(3, 5)) == pytest.approx(60.0)
    c = WeightSeq.counterexample_odd(9)
    assert [round(math.exp(c.logW(n))) for n in range(1, 8)] == [1, 1, 4, 2, 16, 4, 64]


def test_log_products_match_direct_products():
    wts = np.linspace(0.5, 3.0, 30)
    w = WeightSeq.explicit(wts)
    for a, b in [(1, 30), (5, 9), (12, 12)]:
        assert math.exp(w.log_prod(a, b)) == pytest.approx(math.prod(wts[a - 1 : b]), rel=1e-13)


def test_lookup_past_horizon_raises():
    with pytest.raises(HorizonError):
        WeightSeq.rolewicz(2.0, 5).logW(6)
    with pytest.raises(SpecError):
        WeightSeq.explicit([1.0, -1.0])


def test_json_round_trip_of_catalogue():
    w = WeightSeq.one_plus_lambda_over_n(0.5, 50)
    v = WeightSeq.from_json(w.to_json())
    assert np.array_equal(w.cum, v.cum)


@given(wts=weights, x=vectors, steps=st.integers(0, 12))
@settings(max_examples=50, deadline=None)
def test_backward_shift_matches_stepwise_oracle(wts, x, steps):
    w = WeightSeq.explicit(wts)
    v = x.to_dense()
    for _ in range(steps):
        v = step_backward(wts, v)
    got = apply_shift(w, x, steps).to_dense()
    assert np.allclose(got, v, rtol=1e-11, atol=1e-300)


@given(wts=weights, x=vectors, y=vectors, a=coeff, steps=st.integers(1, 8))
@settings(max_examples=40, deadline=None)
def test_shift_is_linear(wts, x, y, a, steps):
    w = WeightSeq.explicit(wts)
    lhs = apply_shift(w, x.scale(a) + y, steps).to_dense()
    rhs = apply_shift(w, x, steps).to_dense() * a + apply_shift(w, y, steps).to_dense()
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


@given(wts=weights, n=st.integers(0, 20), steps=st.integers(1, 20))
@settings(max_examples=40, deadline=None)
def test_backward_undoes_forward(wts, n, steps):
    w = WeightSeq.explicit(wts)
    e = TruncatedSeq.basis(n, H)
    f = apply_shift(w, e, steps, "forward")
    b = apply_shift(w, f, steps)
    # B^s F^s e_n = (w_{n+1} ... w_{n+s})**2 e_n
    expect = math.exp(2 * w.log_prod(n + 1, n + steps))
    assert b.coeff(n) == pytest.approx(expect, rel=1e-12)


def test_forward_past_horizon_raises():
    with pytest.raises(HorizonError):
        apply_shift(WeightSeq.rolewicz(2.0, 10), TruncatedSeq.basis(9, 10), 2, "forward")


def test_unilateral_backward_drops_low_indices():
    out = apply_shift(WeightSeq.rolewicz(3.0, 10), TruncatedSeq.from_values([1, 1, 1], 10), 2)
    assert out.support == (0,) and out.coeff(0) == pytest.approx(9.0)


# condition checks --------------------------------------------------------------------


def test_tends_to_zero_rule():
    assert tends_to_zero([1, 0.5, 0.1, 1e-8], 1e-6)
    assert not tends_to_zero([1, 1e-8, 1e-7], 1e-6)
    assert not tends_to_zero([], 1.0)


def test_gamma_condition_on_rolewicz_lp1():
    rep = check_gamma_condition(WeightSeq.rolewicz(2.0, 80), SpaceSpec.lp(1), 1.0, [0, 3], 80)
    assert rep.tends_to_zero
    # 2**-n exactly
    assert rep.offsets[0]["inf"] == pytest.approx(2.0**-80, rel=1e-12)


def test_gamma_condition_fails_for_constant_weight():
    rep = check_gamma_condition(WeightSeq.rolewicz(1.0, 50), SpaceSpec.lp(1), 1.0, [0], 50)
    assert not rep.tends_to_zero


def test_regularity_of_lp_space():
    rep = verify_regularity(SpaceSpec.lp(1), None, 1, 1, 1.0, 0, 0, 20)
    assert rep.passed and rep.product_ratio == pytest.approx(1.0)


def test_inverse_example_identities():
    rep = check_inverse_example(200)
    assert rep.forward_exact and rep.backward_exact
    assert rep.max_log_error_forward < 1e-12 and rep.max_log_error_backward < 1e-12
    assert rep.backward_value[9] == pytest.approx(1 / 11)


def test_mk_weight_block_ends_follow_recursion():
    M = [1, 2, 5, 12, 30]
    w = WeightSeq.mk_weight(M)
    assert w.logW(2) == pytest.approx(2 * math.log(2))
    # C_{M_{k+1}} = C_{M_k} (1 + 1/k)
    assert w.logW(5) == pytest.approx(w.logW(2) * 1.5)
    assert w.logW(12) == pytest.approx(w.logW(5) * (1 + 1 / 3))
    assert check_mk_weight(M, ks=[3]).passed


def test_mk_weight_rejects_bad_input():
    with pytest.raises(SpecError):
        WeightSeq.mk_weight([3, 2])
    with pytest.raises(HorizonError):
        WeightSeq.mk_weight([1, 2, 5], horizon=6)


@given(gaps=st.lists(st.integers(1, 40), min_size=3, max_size=7).map(sorted))
@settings(max_examples=40, deadline=None)
def test_mk_weight_is_non_increasing_for_growing_gaps(gaps):
    # block k has step C_{M_{k-1}} / ((k-1)(M_{k+1}-M_k)), so growing gaps keep it monotone
    M = list(np.cumsum([1, 1] + gaps))
    w = WeightSeq.mk_weight(M)
    lw = w.log_w(np.arange(1, M[-1] + 1))
    assert np.all(np.diff(lw) <= 1e-12 * max(1.0, float(w.logW(M[-1]))))
    assert np.all(lw > 0)


def test_mk_weight_increases_when_a_gap_shrinks():
    w = WeightSeq.mk_weight([1, 2, 4, 5])
    assert w.w(5) > w.w(4)
