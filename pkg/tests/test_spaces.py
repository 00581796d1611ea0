import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcalg.errors import HorizonError, SpecError
from hcalg.logmath import logsumexp
from hcalg.seq import TruncatedSeq
from hcalg.spaces import P_MAX, SpaceSpec, f_norm, in_ball, seminorm

H = 40

coeff = st.complex_numbers(max_magnitude=10.0, allow_nan=False, allow_infinity=False)
vectors = st.dictionaries(st.integers(0, H), coeff, max_size=8).map(lambda d: TruncatedSeq.from_values(d, H))

SPACES = [
    SpaceSpec.lp(1),
    SpaceSpec.lp(2),
    SpaceSpec.c0(),
    SpaceSpec.weighted_c0((1.0, 2.0, 1.5) + (3.0,) * (H - 2)),
    SpaceSpec.omega(Q=8),
    SpaceSpec.entire(Q=8),
]


def plain_seminorm(x: TruncatedSeq, spec: SpaceSpec, q: int) -> float:
    """Direct formulas on the dense vector."""
    v = np.abs(x.to_dense())
    n = np.arange(v.size)
    if spec.kind == "lp":
        return float(np.sum(v**spec.p) ** (1 / spec.p))
    if spec.kind == "c0":
        return float(v.max(initial=0.0))
    if spec.kind == "weighted_c0":
        g = np.array([spec.gamma[i] if i < len(spec.gamma) else spec.gamma[-1] for i in n])
        return float((v * g).max(initial=0.0))
    if spec.kind == "omega":
        return float(v[: q + 1].sum())
    return float(np.sum(v * float(q) ** n))


# sequences and log arithmetic ---------------------------------------------------------


def test_logsumexp_matches_direct_sum():
    vals = np.log([1e-3, 2.0, 5.0, 1e-30])
    assert logsumexp(vals) == pytest.approx(math.log(7.001 + 1e-30), rel=1e-15)
    assert logsumexp([]) == -math.inf


def test_huge_and_tiny_coefficients_survive():
    x = TruncatedSeq.from_log([0, 1], [-5000.0, 3000.0], [1, 1j], 5)
    assert x.logabs.tolist() == [-5000.0, 3000.0]
    assert seminorm(x, SpaceSpec.c0()) == math.inf


def test_repeated_indices_are_summed_and_zeros_dropped():
    x = TruncatedSeq.from_log([2, 2, 3], [0.0, 0.0, -math.inf], [1, -1, 1], 5)
    assert x.nnz == 0
    y = TruncatedSeq.from_log([1, 1], [math.log(2), math.log(3)], [1, 1], 5)
    assert y.coeff(1) == pytest.approx(5.0)


def test_support_outside_horizon_rejected():
    with pytest.raises(HorizonError):
        TruncatedSeq.basis(6, 5)


def test_json_round_trip():
    x = TruncatedSeq.from_values({0: 1 + 2j, 7: -0.25}, 10, tail_bound=1e-9)
    y = TruncatedSeq.from_json(x.to_json())
    assert y.support == x.support and y.tail_bound == x.tail_bound
    assert np.allclose(y.values(), x.values(), rtol=1e-15)


# seminorms -------------------------------------------------------------------------------


def test_seminorm_examples():
    assert seminorm(TruncatedSeq.basis(0, 5), SpaceSpec.lp(1)) == 1.0
    assert seminorm(TruncatedSeq.basis(3, 5), SpaceSpec.entire(Q=5), 2) == pytest.approx(8.0, rel=1e-14)
    ones = TruncatedSeq.from_values([1, 1, 1, 1, 1], 5)
    assert seminorm(ones, SpaceSpec.omega(Q=5), 3) == pytest.approx(4.0)


def test_q_outside_range_rejected():
    with pytest.raises(SpecError):
        seminorm(TruncatedSeq.basis(0, 5), SpaceSpec.entire(Q=4), 5)


@pytest.mark.parametrize("spec", SPACES, ids=lambda s: s.kind)
@given(x=vectors)
@settings(max_examples=40, deadline=None)
def test_seminorm_agrees_with_dense_formula(spec, x):
    for q in (1, 2, 3):
        if q > spec.Q:
            continue
        assert seminorm(x, spec, q) == pytest.approx(plain_seminorm(x, spec, q), rel=1e-12, abs=1e-300)


def test_f_norm_examples():
    assert f_norm(TruncatedSeq.zeros(5), SpaceSpec.entire()) == 0.0
    assert f_norm(TruncatedSeq.basis(0, 5), SpaceSpec.lp(1)) == pytest.approx(1.0, abs=1e-15)
    # every seminorm equal to 3: sum 2^-p min(1, 3) = 1
    x = TruncatedSeq.from_values([3.0], 5)
    assert f_norm(x, SpaceSpec.omega(Q=P_MAX)) == pytest.approx(1.0, abs=1e-15)


def test_in_ball_examples():
    e0 = TruncatedSeq.basis(0, 10)
    lp1 = SpaceSpec.lp(1)
    assert in_ball(e0, e0, 0.1, lp1)
    assert not in_ball(e0, TruncatedSeq.zeros(10), 0.5, lp1)
    near = TruncatedSeq.from_values({0: 1.0, 5: 0.01}, 10)
    assert in_ball(near, e0, 0.1, lp1)


def test_in_ball_counts_tail():
    e0 = TruncatedSeq.basis(0, 10)
    assert not in_ball(e0.with_tail(0.2), e0, 0.1, SpaceSpec.lp(1))


@pytest.mark.parametrize("spec", SPACES, ids=lambda s: s.kind)
@given(x=vectors, y=vectors, z=vectors)
@settings(max_examples=30, deadline=None)
def test_triangle_inequality(spec, x, y, z):
    for q in (1, 2):
        if q > spec.Q:
            continue
        d = lambda a, b: seminorm(a - b, spec, q)  # noqa: E731
        assert d(x, z) <= (d(x, y) + d(y, z)) * (1 + 1e-12) + 1e-300
    fd = lambda a, b: f_norm(a - b, spec)  # noqa: E731
    assert fd(x, z) <= (fd(x, y) + fd(y, z)) * (1 + 1e-12) + 1e-300


@pytest.mark.parametrize("spec", SPACES, ids=lambda s: s.kind)
@given(x=vectors, lam=coeff)
@settings(max_examples=30, deadline=None)
def test_f_norm_scaling(spec, x, lam):
    assert f_norm(x.scale(lam), spec) <= (abs(lam) + 1) * f_norm(x, spec) * (1 + 1e-12) + 1e-300


@pytest.mark.parametrize("spec", [SpaceSpec.omega(Q=8), SpaceSpec.entire(Q=8)], ids=["omega", "entire"])
@given(x=vectors)
@settings(max_examples=40, deadline=None)
def test_seminorms_increase_with_q(spec, x):
    vals = [seminorm(x, spec, q) for q in range(1, 9)]
    assert all(a <= b * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
