import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcalg.convolution import (
    EntireTrunc,
    PhiSpec,
    SearchGrid,
    build_convolution_witness,
    cauchy_product,
    condition_e_certificate,
    condition_e_pairs,
    eigen_residual,
    exp_vector,
    phi_of_D,
    revalidate,
    search_condition_e,
    wellbehaved_search,
)
from hcalg.errors import BudgetExhausted, SpecError

PHI_EX = PhiSpec.half_exp_plus_exp_i_minus_quarter()
small_complex = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


def test_exp_vector_coefficients():
    e = exp_vector(2.0, 6)
    assert e.taylor.real.tolist() == pytest.approx([2.0**n / math.factorial(n) for n in range(7)], rel=1e-14)
    assert exp_vector(0, 3).taylor.tolist() == [1, 0, 0, 0]
    with pytest.raises(SpecError):
        exp_vector(1, -1)


@given(lam=small_complex, mu=small_complex)
@settings(max_examples=40, deadline=None)
def test_product_of_exponentials_adds_exponents(lam, mu):
    L = 40
    prod = cauchy_product(exp_vector(lam, L), exp_vector(mu, L))
    assert np.allclose(prod.taylor, exp_vector(lam + mu, L).taylor, rtol=1e-12, atol=1e-14)


def test_phi_of_D_on_polynomials():
    D = PhiSpec.polynomial([0, 1])
    sq = phi_of_D(D, EntireTrunc.from_coeffs([0, 0, 1]))  # D z^2 = 2z
    assert sq.taylor.tolist()[:2] == [0, 2]
    D2 = PhiSpec.polynomial([0, 0, 1])
    cube = phi_of_D(D2, EntireTrunc.from_coeffs([0, 0, 0, 1]))  # D^2 z^3 = 6z
    assert cube.taylor.tolist()[:2] == [0, 6]


@given(lam=small_complex)
@settings(max_examples=30, deadline=None)
def test_exponentials_are_eigenvectors(lam):
    for phi in (PhiSpec.polynomial([1, -2, 0.5]), PhiSpec.poly_times_exp([0, 1]), PHI_EX):
        assert eigen_residual(phi, lam, 60)["value"] < 1e-8


def test_phi_evaluations_agree_with_taylor_series():
    for z in (0.3, 1 + 2j, -2.5j):
        assert PHI_EX(z) == pytest.approx(0.5 * cmath.exp(z) + cmath.exp(1j * z) - 0.25)
        assert complex(PHI_EX.taylor_eval_mp(z)) == pytest.approx(PHI_EX(z), rel=1e-13)


def test_constant_phi_rejected():
    with pytest.raises(SpecError):
        PhiSpec.polynomial([3.0])


# condition (e) --------------------------------------------------------------------------


def test_condition_pairs_skip_the_diagonal_point():
    pairs = condition_e_pairs([1, 2], 2)
    assert pairs == [(1, 0), (1, 1), (2, 0), (2, 1)]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_lattice_values_follow_closed_form(k):
    a, b = 2j * math.pi * k, 2 * math.pi * k
    cert = condition_e_certificate(PHI_EX, [1, 2, 3], 3, a, b)
    for row in cert.rows:
        n, d = row["n"], row["d"]
        exact = 0.5 * math.exp(2 * d * k * math.pi) + math.exp(-2 * (n - d) * k * math.pi) - 0.25
        assert math.exp(row["log_lhs"]) == pytest.approx(abs(exact), rel=1e-9)


def test_worked_example_certificate():
    cert = search_condition_e(PHI_EX, [1, 2, 3], SearchGrid(k_max=3))
    assert cert.m == 3 and cert.extra["k"] <= 3 and cert.holds()
    check = revalidate(cert)
    assert check["pass"] and check["max_rel_deviation"] < 1e-9


def test_exponential_alone_is_inconclusive():
    with pytest.raises(BudgetExhausted):
        search_condition_e(PhiSpec.exp(), [1, 2], SearchGrid(kind="box", steps=5))


def test_wellbehaved_ray_search():
    phi = PhiSpec.poly_times_exp([2, 1])
    cert = wellbehaved_search(phi, -1, [1, 2])
    assert cert.m == 1 and cert.extra["t0"] == pytest.approx(0.4429, abs=1e-4)
    # |(t0 v + 2) e^{t0 v}| = 1 at the boundary point
    t0 = cert.extra["t0"]
    assert abs(phi(-t0)) == pytest.approx(1.0, abs=1e-9)
    assert cert.holds() and revalidate(cert)["pass"]
    with pytest.raises(SpecError):
        wellbehaved_search(phi, 0, [1, 2])


def test_convolution_witness_passes_and_is_reproducible():
    cert = search_condition_e(PHI_EX, [1, 2, 3], SearchGrid(k_max=3))
    wit = build_convolution_witness(PHI_EX, [1, 2, 3], cert.m, cert.a, cert.b, N=400)
    assert wit.status == "pass"
    assert wit.N == 400 and wit.m == 3
    again = build_convolution_witness(PHI_EX, [1, 2, 3], cert.m, cert.a, cert.b, N=400)
    assert again.to_json() == wit.to_json()
    with pytest.raises(SpecError):
        build_convolution_witness(PHI_EX, [1, 2, 3], 4, cert.a, cert.b)


def test_short_orbits_do_not_show_decay_yet():
    cert = search_condition_e(PHI_EX, [1, 2, 3], SearchGrid(k_max=3))
    wit = build_convolution_witness(PHI_EX, [1, 2, 3], cert.m, cert.a, cert.b, N=40)
    assert wit.status == "fail" and not wit.checks["v1 tends to zero"]["pass"]
    assert wit.checks["phi(D)^N v3 = sum b_j E(lambda_j)"]["pass"]
