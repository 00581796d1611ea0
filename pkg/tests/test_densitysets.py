import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcalg.densitysets import (
    DensityFamily,
    build_family,
    build_family_far,
    check_Mk,
    compute_Mk,
    counts_upto,
    density_estimate,
    gap_violations,
    scan_kappa,
    split_two,
    thin_separate,
)
from hcalg.errors import HorizonError, SpecError

increasing_sets = st.sets(st.integers(1, 300), max_size=40).map(sorted)


def brute_kappa(sets, C):
    k = 1
    for p, A in enumerate(sets):
        for B in sets[p + 1 :]:
            for n in A:
                for m in B:
                    if abs(int(n) - int(m)) < C:
                        k = max(k, max(int(n), int(m)) + 1)
    return k


def brute_split(E):
    """Block membership by walking positions one at a time."""
    E = list(E)
    first, second = [], []
    j, k = 1, 1
    while j <= len(E):
        u, v = k, math.isqrt(k)
        for part, length in ((first, u), (None, v), (second, u), (None, v)):
            for _ in range(length):
                if j <= len(E) and part is not None:
                    part.append(E[j - 1])
                j += 1
        k += 1
    return first, second


def test_split_two_example():
    A, B = split_two(range(1, 30))
    assert A.tolist() == [1, 5, 6, 11, 12, 13, 19, 20, 21, 22]
    assert B.tolist() == [3, 8, 9, 15, 16, 17, 25, 26, 27, 28]


@given(size=st.integers(4, 400), step=st.integers(1, 5))
@settings(max_examples=40, deadline=None)
def test_split_two_matches_walk(size, step):
    E = np.arange(1, size * step + 1, step)
    A, B = split_two(E)
    a, b = brute_split(E)
    assert A.tolist() == a and B.tolist() == b
    assert not set(a) & set(b)


def test_split_two_needs_four_elements():
    with pytest.raises(HorizonError):
        split_two([1, 2, 3])


def test_thin_separate_and_counts():
    assert thin_separate([2, 4, 6, 8, 10, 12, 14], 3).tolist() == [6, 12]
    with pytest.raises(SpecError):
        thin_separate([1, 2], 0)
    assert counts_upto([2, 3, 7], 8).tolist() == [0, 0, 1, 2, 2, 2, 2, 3, 3]


@given(A=increasing_sets, burn=st.integers(1, 100))
@settings(max_examples=50, deadline=None)
def test_density_matches_direct_counts(A, burn):
    H = 300
    lo = min(sum(1 for a in A if a <= N) / N for N in range(burn, H + 1))
    hi = max(sum(1 for a in A if a <= N) / N for N in range(burn, H + 1))
    assert density_estimate(A, H, burn, "lower") == pytest.approx(lo, abs=1e-15)
    assert density_estimate(A, H, burn, "upper") == pytest.approx(hi, abs=1e-15)


@given(sets=st.lists(increasing_sets, min_size=2, max_size=3), C=st.integers(1, 30))
@settings(max_examples=60, deadline=None)
def test_scan_kappa_matches_pairwise_oracle(sets, C):
    # make the sets disjoint by keeping the first owner of every value
    seen, clean = set(), []
    for s in sets:
        clean.append([v for v in s if v not in seen])
        seen.update(s)
    assert scan_kappa(clean, C) == brute_kappa(clean, C)


def test_kappa_on_built_family_matches_oracle():
    fam = build_family(3, 3000, a=[1, 2, 3])
    for C, expect in [(1, 1), (5, 1), (10, 2986), (30, 3000)]:
        assert fam.kappa(C) == expect == brute_kappa(fam.sets, C)


def test_far_family_is_disjoint_with_positive_density():
    fam = build_family_far(4, 20_000)
    assert fam.disjoint() and fam.count == 4
    assert all(d > 0 for d in fam.lower_densities())


def test_gap_enforcement_removes_violations():
    a = [1, 2, 3]
    far = build_family_far(3, 20_000)
    assert gap_violations(far.sets, a)
    fam = build_family(3, 20_000, a=a)
    assert gap_violations(fam.sets, a) == []
    assert all(d > 0 for d in fam.densities)


def test_gap_violation_reports_minimum():
    assert gap_violations([[1, 10], [20]], [2, 1]) == [(1, 0, -1, 0)]


def test_compute_Mk_on_reference_family():
    fam = build_family(3, 100_000, a=[1, 2, 3])
    M = compute_Mk(fam, 7)
    assert M == [1, 2, 3, 4, 5, 6, 459]
    assert fam.kappa(10) == 4580
    assert check_Mk(fam, M)
    with pytest.raises(HorizonError):
        compute_Mk(fam, 9)


def test_family_is_deterministic_and_round_trips():
    f1 = build_family(3, 10_000, a=[1, 2, 3], kappa_C=[1, 10])
    f2 = build_family(3, 10_000, a=[1, 2, 3], kappa_C=[1, 10])
    assert f1.to_json() == f2.to_json()
    back = DensityFamily.from_json(f1.to_json())
    assert [s.tolist() for s in back.sets] == [s.tolist() for s in f1.sets]
    assert back.kappa_table == f1.kappa_table
