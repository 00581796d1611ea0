import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcalg.algebra import monomial, power
from hcalg.densitysets import build_family
from hcalg.errors import SpecError
from hcalg.seq import TruncatedSeq
from hcalg.shifts import WeightSeq, apply_shift
from hcalg.spaces import SpaceSpec, seminorm
from hcalg.witnesses import (
    PASS,
    WitnessSpecCoord,
    build_cauchy_witness,
    build_coordwise_witness,
    build_omega_fhc,
    build_ufhc_cauchy,
    build_ufhc_coordwise,
    check_condition_b,
    choose_shift_amounts,
    degree_sequence,
    dense_targets,
    find_tail_threshold,
    prepare_cauchy,
    search_cauchy_witness,
    search_coordwise_witness,
    select_kappa_beta,
    ufhc_q,
)

LP1 = SpaceSpec.lp(1)


def max_abs_diff(a: TruncatedSeq, b: TruncatedSeq) -> float:
    return float(np.abs(a.to_dense() - b.to_dense()).max(initial=0.0))


# kappa and beta ------------------------------------------------------------------------


def test_select_kappa_beta_examples():
    kb = select_kappa_beta([1, 2, 3])
    assert kb.kappa == (1.0,) and kb.beta == (1,)
    kb = select_kappa_beta([(1, 0), (0, 1), (1, 1)], kappa0=(1, 1.5))
    assert kb.beta == (1, 0) and kb.kappa == pytest.approx((1.0, 1.5))
    assert kb.L((0, 1)) == pytest.approx(1.5) and kb.L((1, 1)) == pytest.approx(2.5)
    single = select_kappa_beta([(2, 1)])
    assert single.beta == (2, 1) and single.L((2, 1)) == 1.0


def test_select_kappa_beta_rejects_ties_and_zero():
    with pytest.raises(SpecError):
        select_kappa_beta([(1, 0), (0, 1)], kappa0=(1, 1))
    with pytest.raises(SpecError):
        select_kappa_beta([(0, 0)])


@given(A=st.sets(st.tuples(st.integers(0, 3), st.integers(0, 3)).filter(any), min_size=1, max_size=6),
       seed=st.integers(0, 1000))
@settings(max_examples=50, deadline=None)
def test_selected_beta_is_the_strict_minimiser(A, seed):
    kb = select_kappa_beta(sorted(A), seed=seed)
    assert kb.beta in A and all(k > 0 for k in kb.kappa)
    assert kb.L(kb.beta) == 1.0
    assert all(kb.L(a) > 1.0 for a in A if a != kb.beta)
    assert select_kappa_beta(sorted(A), seed=seed) == kb


# coordinatewise witnesses ----------------------------------------------------------------


def test_coordwise_worked_example():
    H = 40
    w = WeightSeq.rolewicz(2.0, H)
    kb = select_kappa_beta([1, 2])
    spec = WitnessSpecCoord([1, 2], [TruncatedSeq.zeros(H)], TruncatedSeq.basis(0, H), 20, kb)
    wit = build_coordwise_witness(spec, w, LP1)
    u = wit.u[0]
    assert u.support == (20,) and u.coeff(20) == pytest.approx(2.0**-20, rel=1e-15)
    e0 = TruncatedSeq.basis(0, H)
    assert max_abs_diff(apply_shift(w, u, 20), e0) < 1e-15
    sq = apply_shift(w, power(u, 2), 20)
    assert sq.support == (0,) and sq.coeff(0) == pytest.approx(2.0**-20, rel=1e-13)
    assert max_abs_diff(wit.predicted[(2,)], sq) < 1e-20


def test_zero_target_leaves_x():
    H = 30
    x = TruncatedSeq.from_values([0.5, 0.25], H)
    kb = select_kappa_beta([1, 2])
    wit = build_coordwise_witness(WitnessSpecCoord([1, 2], [x], TruncatedSeq.zeros(H), 10, kb),
                                  WeightSeq.rolewicz(2.0, H), LP1)
    assert max_abs_diff(wit.u[0], x) == 0.0


def test_n_k_must_clear_support_of_x():
    H = 30
    kb = select_kappa_beta([1])
    spec = WitnessSpecCoord([1], [TruncatedSeq.basis(12, H)], TruncatedSeq.basis(0, H), 10, kb)
    with pytest.raises(SpecError):
        build_coordwise_witness(spec, WeightSeq.rolewicz(2.0, H), LP1)


@given(vals=st.lists(st.complex_numbers(min_magnitude=0.1, max_magnitude=2.0, allow_nan=False), min_size=1, max_size=4),
       n=st.integers(5, 60))
@settings(max_examples=40, deadline=None)
def test_single_monomial_hits_target_exactly(vals, n):
    H = 80
    w = WeightSeq.one_plus_lambda_over_n(1.0, H)
    y = TruncatedSeq.from_values(vals, H)
    kb = select_kappa_beta([1])
    wit = build_coordwise_witness(WitnessSpecCoord([1], [TruncatedSeq.zeros(H)], y, n, kb), w, LP1)
    got = apply_shift(w, wit.u[0], n)
    assert max_abs_diff(got, y) <= 1e-12 * max(1.0, float(np.abs(y.to_dense()).max()))


@given(seed=st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_coordwise_search_predictions_match_direct_shift(seed):
    H = 300
    rng = np.random.default_rng(seed)
    w = WeightSeq.rolewicz(2.0, H)
    A = [(1, 0), (0, 1), (1, 1)]
    x = [TruncatedSeq.from_values(list(rng.uniform(-1, 1, 2)), H) for _ in range(2)]
    y = TruncatedSeq.from_values(list(rng.uniform(0.2, 1, 3)), H)
    wit = search_coordwise_witness(A, x, y, w, LP1, seed=seed)
    assert wit.status == PASS
    for alpha, pred in wit.predicted.items():
        direct = apply_shift(w, monomial(wit.u, alpha, "coordinatewise"), wit.N)
        assert max_abs_diff(direct, pred) <= 1e-12
    beta = tuple(wit.params["beta"])
    assert seminorm(wit.predicted[beta] - y, LP1) < 1e-12


# Cauchy witnesses ---------------------------------------------------------------------------


def test_choose_shift_amounts_examples():
    assert choose_shift_amounts([1, 2], (2,), 1) == [5]
    assert choose_shift_amounts([2], (2,), 3) == [13]
    assert choose_shift_amounts([1, 2, 3], (3,), 4) == [17]


@given(A=st.sets(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 2)).filter(any), min_size=1, max_size=8),
       p=st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_shift_amounts_separate_every_other_index(A, p):
    beta = max(A)
    s = choose_shift_amounts(sorted(A), beta, p)
    assert all(v > 4 * p for v in s)
    for a in A:
        if a != beta:
            assert sum((b - ai) * si for b, ai, si in zip(beta, a, s)) > 3 * p


def test_zero_p_is_padded():
    H = 100
    spec = prepare_cauchy([1, 2], [TruncatedSeq.zeros(H)], TruncatedSeq.basis(0, H), LP1)
    assert spec.p == 1 and spec.padded and spec.s == [5]


def test_cauchy_worked_example_exact_zero_and_decaying_residual():
    H = 3000
    w = WeightSeq.rolewicz(2.0, H)
    y = TruncatedSeq.basis(1, H)
    wit = search_cauchy_witness([1, 2], [TruncatedSeq.zeros(H)], y, w, LP1)
    assert wit.status == PASS
    u = wit.u[0]
    lin = apply_shift(w, u, wit.N)
    assert lin.nnz == 0 and lin.tail_bound == 0.0
    sq = apply_shift(w, power(u, 2, "cauchy"), wit.N)
    resid = seminorm(sq - y, LP1)
    assert resid == pytest.approx(wit.extra["residual_norm"], rel=1e-9)
    samples = [s["residual"] for s in wit.extra["residual_samples"]]
    assert all(b < a for a, b in zip(samples, samples[1:]))


def test_cauchy_witness_rejects_small_J():
    H = 500
    spec = prepare_cauchy([1, 2], [TruncatedSeq.zeros(H)], TruncatedSeq.basis(1, H), LP1)
    with pytest.raises(SpecError):
        build_cauchy_witness(spec, WeightSeq.rolewicz(2.0, H), LP1, spec.J_min - 1)


# upper frequent constructions -------------------------------------------------------------


def test_tail_threshold_examples():
    w = WeightSeq.rolewicz(2.0, 300)
    thr = find_tail_threshold(w, LP1, 0.1, 0, 1.0)
    assert thr.N == 5 and thr.bound == pytest.approx(2.0**-4, rel=1e-12)
    assert find_tail_threshold(w, LP1, 100.0, 3, 1.0).N == 3


@given(M=st.floats(0.5, 50.0), eps=st.floats(1e-4, 0.5))
@settings(max_examples=30, deadline=None)
def test_tail_threshold_grows_with_M(M, eps):
    w = WeightSeq.rolewicz(2.0, 400)
    assert find_tail_threshold(w, LP1, eps, 0, 2 * M).N >= find_tail_threshold(w, LP1, eps, 0, M).N


def test_ufhc_coordwise_worked_example():
    w = WeightSeq.rolewicz(2.0, 400)
    v = TruncatedSeq.basis(0, 10)
    wit = build_ufhc_coordwise(1, 2, v, TruncatedSeq.zeros(10), w, LP1, 5, 1, 40)
    u = wit.u[0]
    assert u.support == tuple(range(5, 201, 5))
    assert all(u.coeff(5 * k) == pytest.approx(2.0 ** (-5 * k), rel=1e-13) for k in range(1, 41))
    for j in (1, 3, 7):
        lin = apply_shift(w, u, 5 * j)
        assert lin.coeff(0) == pytest.approx(1.0, rel=1e-13)
        assert lin.coeff(5) == pytest.approx(2.0**-5, rel=1e-13)
        sq = apply_shift(w, power(u, 2), 5 * j)
        assert sq.coeff(0) == pytest.approx(2.0 ** (-5 * j), rel=1e-12)


def test_condition_b_rolewicz_value():
    rep = check_condition_b(WeightSeq.rolewicz(2.0, 400), LP1, 2, 0.5, [20, 40])
    assert rep.values[1][1] <= 2.0**-19 * (1 + 1e-12)
    assert rep.values[1][1] == pytest.approx(2.0**-19, rel=1e-12)
    assert rep.decreasing()


def test_ufhc_cauchy_ratio_and_exact_zeros():
    sigma = 200
    y = TruncatedSeq.basis(0, 10)
    q = ufhc_q(y, WeightSeq.rolewicz(2.0, 4000), LP1, 0.05).N
    w = WeightSeq.rolewicz(2.0, 2 * q * sigma)
    wit = build_ufhc_cauchy(2, y, TruncatedSeq.zeros(10), w, LP1, 0.5, 0.625, q, sigma)
    assert wit.status == PASS
    assert abs(wit.extra["ratio"] / wit.extra["ratio_limit"] - 1) <= 0.1
    u = wit.u[0]
    for s in wit.extra["orbit_times"][:5]:
        assert apply_shift(w, u, s).nnz == 0


# frequent constructions -------------------------------------------------------------------


def test_degree_sequence_and_targets_are_deterministic():
    assert degree_sequence(10) == [1, 1, 2, 1, 2, 3, 1, 2, 3, 4]
    a, b = dense_targets(4, seed=3), dense_targets(4, seed=3)
    assert a == b and [t.p for t in a] == [1, 2, 3, 4]


def test_omega_fhc_block_images_hit_targets():
    fam = build_family(2, 2000, a=[1, 2])
    w = WeightSeq.rolewicz(2.0, 2000)
    targets = dense_targets(2, seed=0)
    wit = build_omega_fhc(targets, fam, w)
    assert wit.status == PASS
    u = wit.u[0]
    t = targets[0]
    for n in fam.sets[0][:5]:
        img = apply_shift(w, u, int(n))
        for l in range(t.p + 1):
            assert img.coeff(l) == pytest.approx(t.values[l], abs=1e-9)
