import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hcalg.algebra import Poly
from hcalg.seq import TruncatedSeq
from hcalg.shifts import WeightSeq
from hcalg.spaces import SpaceSpec
from hcalg.verify import (
    Ball,
    CriterionInstance,
    brute_product,
    brute_shift_orbit,
    check_instance,
    dumps,
    emit_report,
    merge_status,
    oracle_compare,
    orbit_hit_density,
)
from hcalg.witnesses import search_coordwise_witness

LP1 = SpaceSpec.lp(1)
W2 = WeightSeq.rolewicz(2.0, 200)


def small_witness():
    H = 200
    return search_coordwise_witness([1, 2], [TruncatedSeq.zeros(H)], TruncatedSeq.from_values([1.0, 0.5], H), W2, LP1)


def log_coeffs(d):
    return {i: (math.log(abs(v)), v / abs(v)) for i, v in d.items()}


def plain(c):
    return {i: math.exp(a) * p for i, (a, p) in c.items()}


def test_brute_product_by_hand():
    x = log_coeffs({0: 1 + 0j, 2: 2 + 0j})
    y = log_coeffs({1: 3 + 0j, 2: 1j})
    assert plain(brute_product(x, y, "coordinatewise", 5)) == pytest.approx({2: 2j})
    assert plain(brute_product(x, y, "cauchy", 3)) == pytest.approx({1: 3, 2: 1j, 3: 6})


def test_brute_orbit_steps_through_checkpoints():
    out = brute_shift_orbit(W2, log_coeffs({3: 1 + 0j}), 200, [1, 3, 4])
    assert out[1].coeff(2) == pytest.approx(2.0)
    assert out[3].coeff(0) == pytest.approx(8.0)
    assert out[4].nnz == 0


def test_oracle_agrees_with_witness_predictions():
    wit = small_witness()
    res = oracle_compare(wit, W2)
    assert res["pass"] and res["count"] > 0 and res["max_rel"] < 1e-9


def test_oracle_detects_a_wrong_prediction():
    wit = small_witness()
    key = next(iter(wit.predicted))
    wit.predicted[key] = wit.predicted[key].scale(1 + 1e-6)
    assert not oracle_compare(wit, W2)["pass"]


def test_check_instance_example():
    H = 50
    w = WeightSeq.rolewicz(2.0, H)
    u = TruncatedSeq.from_values({10: 2.0**-10}, H)
    e0 = TruncatedSeq.basis(0, H)

    def instance(W):
        return CriterionInstance([(1,), (2,)], (1,), [u], 10, (e0, 1e-9, 1), W, "coordinatewise", LP1, w)

    # B^10 u = e_0 exactly, while u^2 = 2^-20 e_10 lands on 2^-10 e_0
    rep = check_instance(instance(1e-3))
    assert rep.status == "pass" and rep.exit_code == 0
    assert rep.per_alpha[(2,)]["norm"] == pytest.approx(2.0**-10)
    assert rep.per_alpha[(1,)]["distance"] == 0.0
    assert check_instance(instance(2.0**-10)).status == "fail"


def test_merge_status_order():
    assert merge_status("pass", "inconclusive") == "inconclusive"
    assert merge_status("inconclusive", "fail", "pass") == "fail"
    assert merge_status() == "pass"


# hit densities ----------------------------------------------------------------------


def test_hit_density_of_simple_orbit():
    H = 200
    x = TruncatedSeq.from_values([0, 0.5, 0.25, 0.125], H)
    res = orbit_hit_density(W2, x, Poly({1: 1.0}), [Ball(TruncatedSeq.zeros(H), 0.5, 1, "near0")], 20, LP1)
    t = res["targets"]["near0"]
    # ||B^p x|| = 0.875, 1.75, 1.5, 1 for p < 4 and B^p x = 0 afterwards
    assert t["hits"] == list(range(4, 21))
    assert len(res["rows"]) == 21


@given(r1=st.floats(0.01, 3.0), r2=st.floats(0.01, 3.0), stride=st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_hit_density_grows_with_radius(r1, r2, stride):
    lo, hi = sorted((r1, r2))
    H = 120
    rng = np.random.default_rng(0)
    x = TruncatedSeq.from_values(list(rng.uniform(-1, 1, 40) * 2.0 ** -np.arange(40)), H)
    w = WeightSeq.rolewicz(2.0, H)
    balls = [Ball(TruncatedSeq.basis(0, H), lo, 1, "small"), Ball(TruncatedSeq.basis(0, H), hi, 1, "big")]
    res = orbit_hit_density(w, x, Poly({1: 1.0}), balls, 60, LP1, stride=stride)
    small, big = res["targets"]["small"], res["targets"]["big"]
    assert set(small["hits"]) <= set(big["hits"])
    assert small["lower"][0] <= big["lower"][0] and small["upper"][1] <= big["upper"][1]


def test_tail_bound_makes_hits_conservative():
    H = 50
    x = TruncatedSeq.from_values({0: 0.0, 5: 1e-3}, H).with_tail(1e-3)
    ball = [Ball(TruncatedSeq.zeros(H), 0.5, 1, "zero")]
    free = orbit_hit_density(W2, x, Poly({1: 1.0}), ball, 10, LP1, tail_fn=lambda p, label: 0.0)
    heavy = orbit_hit_density(W2, x, Poly({1: 1.0}), ball, 10, LP1, tail_fn=lambda p, label: 1.0)
    assert free["targets"]["zero"]["count"] > 0
    assert heavy["targets"]["zero"]["count"] == 0


# output -----------------------------------------------------------------------------


def test_dumps_is_sorted_and_stable():
    a = dumps({"b": 1, "a": [1.5, {"z": 2, "y": 3}]})
    assert a == dumps({"a": [1.5, {"y": 3, "z": 2}], "b": 1})
    assert list(json.loads(a)) == ["a", "b"]


def test_emit_report_and_csv(tmp_path):
    rows = [[p, int(p % 2 == 0)] for p in range(11)]
    path = emit_report({"status": "pass", "seed": 3}, tmp_path / "r" / "out.json", rows)
    data = json.loads(path.read_text())
    assert data["schema_version"] and data["seed"] == 3
    with path.with_suffix(".csv").open() as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["p", "hit"] and len(got) == 12
    again = emit_report({"seed": 3, "status": "pass"}, tmp_path / "r" / "again.json")
    assert again.read_bytes() == path.read_bytes()
