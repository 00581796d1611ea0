import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcalg.algebra import (
    Poly,
    block_ends,
    block_minimum,
    eval_poly,
    free_generators,
    generator_power_distance,
    monomial,
    power,
    product,
    vandermonde_certificate,
)
from hcalg.errors import SpecError
from hcalg.seq import TruncatedSeq
from hcalg.spaces import SpaceSpec, seminorm

H = 30

coeff = st.complex_numbers(max_magnitude=4.0, allow_nan=False, allow_infinity=False)
vectors = st.dictionaries(st.integers(0, H), coeff, max_size=6).map(lambda d: TruncatedSeq.from_values(d, H))
kinds = st.sampled_from(["coordinatewise", "cauchy"])


def dense_product(x, y, kind):
    a, b = x.to_dense(), y.to_dense()
    if kind == "coordinatewise":
        return a * b
    return np.convolve(a, b)[: H + 1]


def close(x, y, rel=1e-12):
    a, b = x.to_dense(), y.to_dense()
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-300)
    return np.abs(a - b).max(initial=0.0) <= rel * scale


def test_product_examples():
    x = TruncatedSeq.from_values([1, 2, 3], 5)
    y = TruncatedSeq.from_values([4, 5], 5)
    assert product(x, y).to_dict() == pytest.approx({0: 4, 1: 10})
    c = product(x, y, "cauchy").to_dict()
    assert [c[k] for k in range(4)] == pytest.approx([4, 13, 22, 15])


def test_cauchy_overflow_goes_to_tail():
    e3 = TruncatedSeq.basis(3, 4)
    sq = product(e3, e3, "cauchy")
    assert sq.nnz == 0 and sq.tail_bound == pytest.approx(1.0)


def test_unknown_product_and_bad_power_rejected():
    e0 = TruncatedSeq.basis(0, 3)
    with pytest.raises(SpecError):
        product(e0, e0, "hadamard")
    with pytest.raises(SpecError):
        power(e0, 0)
    with pytest.raises(SpecError):
        monomial([e0], (0,), "cauchy")


@given(x=vectors, y=vectors, kind=kinds)
@settings(max_examples=60, deadline=None)
def test_product_matches_dense_oracle(x, y, kind):
    got = product(x, y, kind).to_dense()
    want = dense_product(x, y, kind)
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12)


@given(x=vectors, y=vectors, kind=kinds)
@settings(max_examples=40, deadline=None)
def test_products_commute(x, y, kind):
    assert close(product(x, y, kind), product(y, x, kind))


@given(x=vectors, y=vectors, z=vectors, kind=kinds)
@settings(max_examples=40, deadline=None)
def test_products_associate(x, y, z, kind):
    # truncation at the horizon commutes with the product since indices only grow
    assert close(product(product(x, y, kind), z, kind), product(x, product(y, z, kind), kind), rel=1e-11)


@given(x=vectors, y=vectors, kind=kinds)
@settings(max_examples=40, deadline=None)
def test_l1_norm_is_submultiplicative(x, y, kind):
    lp1 = SpaceSpec.lp(1)
    p = product(x, y, kind)
    lhs = seminorm(p, lp1) + p.tail_bound
    assert lhs <= seminorm(x, lp1) * seminorm(y, lp1) * (1 + 1e-12) + 1e-300


@given(x=vectors, m=st.integers(1, 5), kind=kinds)
@settings(max_examples=40, deadline=None)
def test_power_matches_repeated_product(x, m, kind):
    ref = x
    for _ in range(m - 1):
        ref = product(ref, x, kind)
    assert close(power(x, m, kind), ref, rel=1e-11)


def test_poly_and_eval():
    P = Poly({(1,): 2.0, 3: -1.0})
    assert P.degrees() == [1, 3] and P.coeff_of_degree(3) == -1
    x = TruncatedSeq.from_values([0.5, 2.0], 4)
    v = eval_poly(P, x).to_dict()
    assert v[0] == pytest.approx(2 * 0.5 - 0.125) and v[1] == pytest.approx(4 - 8)
    assert Poly.from_json(P.to_json()) == P
    with pytest.raises(SpecError):
        Poly({(0,): 1.0})


def test_two_variable_monomial():
    u = [TruncatedSeq.from_values([2.0, 3.0], 3), TruncatedSeq.from_values([5.0, 7.0], 3)]
    m = monomial(u, (2, 1), "coordinatewise").to_dict()
    assert m[0] == pytest.approx(20.0) and m[1] == pytest.approx(63.0)


# free generators ---------------------------------------------------------------------------


def test_block_ends_are_triangular():
    assert block_ends(10).tolist() == [0, 1, 3, 6, 10, 15]
    assert block_minimum([5, 4, 3, 2, 1, 9]).tolist() == pytest.approx([5, 3, 3, 1, 1, 1])


def test_generators_have_leading_basis_vector():
    fg = free_generators(SpaceSpec.lp(1), 3, 40, seed=7)
    for n, g in enumerate(fg.gens):
        assert g.min_support() == n and g.coeff(n) == 1
        assert all(abs(g.coeff(k)) < 1 for k in g.support if k > n)
    again = free_generators(SpaceSpec.lp(1), 3, 40, seed=7)
    assert again.lambdas == fg.lambdas


def test_generator_powers_approach_basis():
    sp = SpaceSpec.lp(1)
    fg = free_generators(sp, 3, 60, seed=1)
    for n, g in enumerate(fg.gens):
        d = [generator_power_distance(g, n, p, sp) for p in (1, 10, 50, 200)]
        assert all(a >= b for a, b in zip(d, d[1:]))
        assert d[-1] < 1e-6


def test_vandermonde_certificate():
    cert = vandermonde_certificate([0.3, 0.7])
    assert cert.ok and len(cert.nodes) == 5
    # 0.3 * 0.3 equals the node for (2, 0), and (1, 1) with lambda = (0.3, 0.3) collides
    bad = vandermonde_certificate([0.3, 0.3])
    assert not bad.ok and bad.min_gap == 0.0


def test_vandermonde_product_formula_small_case():
    cert = vandermonde_certificate([0.5], multi_indices=[(1,), (2,)])
    assert cert.det_product == pytest.approx(0.25 - 0.5)
    assert abs(cert.det_numeric) == pytest.approx(abs(cert.det_product))
    assert math.isclose(cert.min_gap, 0.25)
