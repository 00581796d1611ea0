"""The acceptance battery: fourteen numbered checks with runtime limits.

Each check returns a :class:`CriterionResult`.  Checks that build shift
witnesses also run the brute-force oracle on them; check 13 only collects
those comparisons, so its cost is carried by the checks that produced them.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import Poly, free_generators, generator_power_distance, monomial, vandermonde_certificate
from .convolution import (
    PhiSpec,
    SearchGrid,
    eigen_residual,
    revalidate,
    search_condition_e,
    wellbehaved_search,
)
from .densitysets import build_family, compute_Mk, gap_violations
from .errors import BudgetExhausted
from .seq import TruncatedSeq
from .shifts import WeightSeq, apply_shift, check_inverse_example, check_mk_weight, derivative_weight
from .spaces import SpaceSpec, seminorm
from .verify import Ball, oracle_compare, orbit_hit_density
from .witnesses import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    build_c0_fhc,
    build_ufhc_cauchy,
    check_condition_b,
    dense_targets,
    search_cauchy_witness,
    search_coordwise_witness,
    search_ufhc_coordwise,
    ufhc_q,
)

LOG2 = math.log(2.0)


@dataclass
class CriterionResult:
    number: int
    title: str
    status: str
    elapsed: float
    limit: float | None
    details: dict = field(default_factory=dict)
    oracle: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def line(self) -> str:
        lim = f"/{self.limit:g}s" if self.limit else ""
        return f"criterion {self.number:2d} {self.status.upper():12s} {self.title} ({self.elapsed:.2f}s{lim})"

    def to_json(self) -> dict:
        return {"number": self.number, "title": self.title, "status": self.status, "elapsed": round(self.elapsed, 3),
                "limit": self.limit, "details": self.details,
                "oracle": [{k: v for k, v in o.items() if k != "rows"} for o in self.oracle]}


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


def _oracle_row(name: str, wit, w: WeightSeq) -> dict:
    res = oracle_compare(wit, w)
    return {"witness": name, "kind": wit.kind, "count": res["count"], "max_rel": res["max_rel"],
            "rel_tol": res["rel_tol"], "pass": bool(res["pass"] and res["count"] > 0)}


def _random_seq(rng: np.random.Generator, horizon: int, max_support: int = 3, zero_ok: bool = True) -> TruncatedSeq:
    size = int(rng.integers(1, max_support + 1))
    vals = rng.uniform(0.1, 1.0, size) * np.exp(2j * np.pi * rng.uniform(0, 1, size))
    if zero_ok:
        vals = np.where(rng.uniform(0, 1, size) < 0.25, 0.0, vals)
    return TruncatedSeq.from_values(list(vals), horizon)


# 1-2: explicit weights -------------------------------------------------------------------


def criterion_1(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    H = 2 * 50 + 1
    w = WeightSeq.counterexample_odd(H)
    spec = SpaceSpec.weighted_c0("counterexample_odd")
    n = np.arange(0, 51)
    odd = 2 * n + 1
    log_odd = -0.5 * w.logW(odd) + spec.log_gamma(odd)
    err_odd = float(np.max(np.abs(log_odd)))
    even_err = {}
    m = np.arange(1, 51)
    for g in (0.25, 0.5, 1.0):
        lv = -g * w.logW(2 * m) + spec.log_gamma(2 * m)
        even_err[str(g)] = float(np.max(np.abs(lv + g * (m - 1) * LOG2)))
    ok = err_odd < 1e-12 and all(v < 1e-12 for v in even_err.values())
    return ok, {"odd_max_log_error": err_odd, "even_max_log_error": even_err, "n_max": 50}, []


def criterion_2(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    rep = check_inverse_example(1000)
    ok = (rep.forward_exact and rep.backward_exact and rep.max_log_error_forward < 1e-12
          and rep.max_log_error_backward < 1e-12)
    d = {k: v for k, v in rep.to_json().items() if k not in ("n", "forward_ratio", "backward_value")}
    d["n_max"] = 1000
    return ok, d, []


# 3-4: witnesses of the general criterion ---------------------------------------------------


def criterion_3(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    H = 400
    w = WeightSeq.rolewicz(2.0, H)
    sp = SpaceSpec.lp(1)
    rng = np.random.default_rng(seed)
    families = [[(1,), (2,)], [(1,), (2,), (3,)], [(1, 0), (0, 1), (1, 1)]]
    per_family = 20
    rows, oracle = [], []
    ok = True
    for case in range(per_family * len(families)):
        A = families[case // per_family]
        d = len(A[0])
        x = [_random_seq(rng, H) for _ in range(d)]
        y = _random_seq(rng, H, zero_ok=False)
        wit = search_coordwise_witness(A, x, y, w, sp, seed=seed + case)
        beta = tuple(wit.params["beta"])
        worst_other = 0.0
        for alpha in A:
            img = apply_shift(w, monomial(wit.u, alpha, "coordinatewise"), wit.N)
            if alpha == beta:
                dist = seminorm(img - y, sp) + img.tail_bound
            else:
                worst_other = max(worst_other, seminorm(img, sp) + img.tail_bound)
        good = dist < 1e-9 and worst_other < 1e-6 and wit.status == PASS
        ok &= good
        rows.append({"case": case, "A": [list(a) for a in A], "beta": list(beta), "n_k": wit.N,
                     "target_distance": dist, "max_other_norm": worst_other, "pass": good})
        oracle.append(_oracle_row(f"coordwise case {case}", wit, w))
    return ok, {"cases": rows}, oracle


def criterion_4(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    H = 3000
    w = WeightSeq.rolewicz(2.0, H)
    sp = SpaceSpec.lp(1)
    setups = [
        ("d=1", [(1,), (2,)], [TruncatedSeq.zeros(H)], TruncatedSeq.basis(1, H)),
        ("d=2", [(1, 1), (1, 0), (0, 1)],
         [TruncatedSeq.from_values([0.3, 0.2j], H), TruncatedSeq.from_values([0.1, 0, 0.5], H)],
         TruncatedSeq.from_values([1, -0.5, 0.25j], H)),
    ]
    out, oracle = {}, []
    ok = True
    for name, A, x, y in setups:
        wit = search_cauchy_witness(A, x, y, w, sp)
        beta = tuple(wit.params["beta"])
        zeros = {}
        for alpha in A:
            if tuple(alpha) == beta:
                continue
            img = apply_shift(w, monomial(wit.u, alpha, "cauchy"), wit.N)
            zeros[",".join(map(str, alpha))] = bool(img.nnz == 0 and img.tail_bound == 0.0)
        samples = [s["residual"] for s in wit.extra["residual_samples"]]
        # strictly decreasing, except that an exactly zero residual stays zero
        monotone = len(samples) == 3 and all(b < a or a == b == 0.0 for a, b in zip(samples, samples[1:]))
        good = (all(zeros.values()) and wit.extra["residual_norm"] < 1e-3 and monotone and wit.status == PASS)
        ok &= good
        out[name] = {"beta": list(beta), "J": wit.params["J"], "N": wit.N, "exact_zero": zeros,
                     "residual": wit.extra["residual_norm"], "residual_samples": wit.extra["residual_samples"],
                     "pass": good}
        oracle.append(_oracle_row(f"cauchy {name}", wit, w))
    return ok, out, oracle


# 5: density sets ------------------------------------------------------------------------------


def criterion_5(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    a = [1, 2, 3]
    fam = build_family(3, 100_000, a=a, kappa_C=[1, 10, 100])
    viol = gap_violations(fam.sets, a)
    dens = fam.lower_densities()
    ok = not viol and fam.disjoint() and all(d >= 1e-3 for d in dens) and all(C in fam.kappa_table for C in (1, 10, 100))
    return ok, {"violations": viol, "disjoint": fam.disjoint(), "lower_densities": dens,
                "kappa": {str(C): fam.kappa_table[C] for C in (1, 10, 100)},
                "sizes": [int(s.size) for s in fam.sets]}, []


# 6-8: upper frequent constructions ----------------------------------------------------------


def criterion_6(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    window = 10_000
    w = WeightSeq.rolewicz(2.0, 12_500)
    sp = SpaceSpec.lp(1)
    v = TruncatedSeq.basis(0, 10)
    wit = search_ufhc_coordwise(1, 3, v, TruncatedSeq.zeros(10), w, sp, 0.1, window=window)
    N, N1 = wit.N, wit.params["N1"]
    u = wit.u[0]
    dens = orbit_hit_density(w, u, Poly({1: 1.0}), [Ball(v.with_horizon(u.horizon), 0.2, 1, "B(v,2eps)")], window, sp,
                             tail_fn=wit.tail_fn, burn_in=N * N1, label=1)
    t = dens["targets"]["B(v,2eps)"]
    expected = set(range(N * N1, window + 1, N))
    covered = expected <= set(t["hits"])
    ok = wit.status == PASS and N == 5 and covered and t["lower"][0] >= 1 / (2 * N)
    return ok, {"N": N, "N1": N1, "hits": t["count"], "expected_hits": len(expected), "covered": covered,
                "lower_density": t["lower"], "bound": 1 / (2 * N)}, [_oracle_row("ufhc-coord", wit, w)]


def criterion_7(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    sp = SpaceSpec.lp(1)
    sigmas = [10, 20, 40, 60]
    rep = check_condition_b(WeightSeq.rolewicz(2.0, 1000), sp, 2, 0.5, sigmas)
    vals = rep.values[1]
    exact = [2.0 ** (1 - s / 2) for s in sigmas]
    geo_err = max(abs(a - b) / b for a, b in zip(vals, exact))
    below = vals[-1] < 1e-4
    y = TruncatedSeq.basis(0, 10)
    x = TruncatedSeq.zeros(10)
    runs = [1000] if quick else [1000, 10_000]
    out = {"condition_b": {"sigmas": sigmas, "values": vals, "max_rel_error_vs_geometric": geo_err,
                           "decreasing": rep.decreasing(), "below_1e-4": below}}
    ok = rep.decreasing() and below and geo_err < 1e-12
    oracle = []
    for sigma in runs:
        q = None
        w = WeightSeq.rolewicz(2.0, 12 * sigma)
        q = ufhc_q(y, w, sp, 0.05).N
        w = WeightSeq.rolewicz(2.0, 2 * q * sigma)
        wit = build_ufhc_cauchy(2, y, x, w, sp, 0.5, 0.625, q, sigma)
        rel = abs(wit.extra["ratio"] / wit.extra["ratio_limit"] - 1)
        u = wit.u[0]
        zeros = all(apply_shift(w, u, s).nnz == 0 for s in wit.extra["orbit_times"])
        good = wit.status == PASS and rel <= 0.1 and zeros
        ok &= good
        out[f"sigma={sigma}"] = {"q": q, "ratio": wit.extra["ratio"], "limit": wit.extra["ratio_limit"],
                                 "relative_gap": rel, "orbit_times": len(wit.extra["orbit_times"]), "exact_zeros_below_m": zeros,
                                 "status": wit.status}
        if sigma == 1000:
            oracle.append(_oracle_row(f"ufhc-cauchy sigma={sigma}", wit, w))
    return ok, out, oracle


def criterion_8(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    w = derivative_weight(3000)
    sp = SpaceSpec.entire(Q=4)
    sigmas = [20, 40, 60, 100, 150, 200]
    out = {}
    ok = True
    for m in (2, 3):
        rep = check_condition_b(w, sp, m, 0.5, sigmas, qs=(1, 2, 4))
        good = rep.decreasing() and all(v[-1] < 1e-6 for v in rep.values.values())
        ok &= good
        out[f"m={m}"] = {"values": {str(k): v for k, v in rep.values.items()}, "decreasing": rep.decreasing(),
                         "pass": good}
    out["sigmas"] = sigmas
    return ok, out, []


# 9-10: the block weight and the c0 pipeline -----------------------------------------------------


def _family_weight():
    fam = build_family(3, 100_000, a=[1, 2, 3])
    M = compute_Mk(fam, 7)
    return fam, M


def criterion_9(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    _, M = _family_weight()
    at_m6 = check_mk_weight(M[:6], ks=[3, 4, 5])
    full = check_mk_weight(M, ks=[3, 4, 5])
    ok = at_m6.passed and full.passed
    return ok, {"M": M, "horizon_M6": at_m6.to_json(), "horizon_full": full.to_json()}, []


def criterion_10(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    fam, M = _family_weight()
    w = WeightSeq.mk_weight(M)
    wit = build_c0_fhc(dense_targets(3, seed=seed), fam, w)
    per_p = wit.extra["per_p"]
    failed = [k for k, c in wit.checks.items() if not c["pass"]]
    small = all(per_p.get(p, {}).get("status") == PASS for p in (1, 2))
    larger = {p: d["status"] for p, d in per_p.items() if p > 2}
    ok = not failed and small and all(s in (PASS, INCONCLUSIVE) for s in larger.values())
    summary = {str(p): {k: v for k, v in d.items() if k in ("N", "status", "reason")} for p, d in per_p.items()}
    for p, d in per_p.items():
        if "B" in d:
            summary[str(p)]["B_size"] = len(d["B"])
    return ok, {"M": M, "per_p": summary, "failed_checks": failed, "inconclusive": wit.inconclusive,
                "status": wit.status}, [_oracle_row("c0-fhc", wit, w)]


# 11-12: convolution operators -------------------------------------------------------------------


def criterion_11(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    rng = np.random.default_rng(seed)
    r = 2.0 * np.sqrt(rng.uniform(0, 1, 10))
    lams = r * np.exp(2j * np.pi * rng.uniform(0, 1, 10))
    phis = {"D": PhiSpec.polynomial([0, 1]), "z e^z": PhiSpec.poly_times_exp([0, 1]),
            "1/2 e^z + e^iz - 1/4": PhiSpec.half_exp_plus_exp_i_minus_quarter()}
    out = {}
    ok = True
    for name, phi in phis.items():
        vals = [eigen_residual(phi, lam, 60)["value"] for lam in lams]
        out[name] = {"max": max(vals), "values": vals}
        ok &= max(vals) < 1e-8
    out["max_abs_lambda"] = float(np.max(np.abs(lams)))
    return ok, out, []


def criterion_12(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    phi = PhiSpec.half_exp_plus_exp_i_minus_quarter()
    cert = search_condition_e(phi, [1, 2, 3], SearchGrid(k_max=3))
    val = revalidate(cert)
    example_ok = cert.m == 3 and cert.extra["k"] <= 3 and cert.holds() and val["pass"]
    wb = wellbehaved_search(PhiSpec.poly_times_exp([2, 1]), -1, [1, 2, 3])
    val_wb = revalidate(wb)
    wb_ok = wb.holds() and val_wb["pass"]
    try:
        search_condition_e(PhiSpec.exp(), [1, 2], SearchGrid(kind="box", steps=5))
        exp_status = "certified"
    except BudgetExhausted as exc:
        exp_status = f"inconclusive: {exc}"
    return example_ok and wb_ok, {
        "worked_example": {"k": cert.extra["k"], "m": cert.m, "min_margin": cert.min_margin,
                           "margins": [{"n": r["n"], "d": r["d"], "margin": r["margin"]} for r in cert.rows],
                           "revalidation": val},
        "wellbehaved": {"t0": wb.extra["t0"], "t1": wb.extra["t1"], "m": wb.m, "a": [wb.a.real, wb.a.imag], "b": [wb.b.real, wb.b.imag],
                        "min_margin": wb.min_margin, "revalidation": val_wb},
        "exp": exp_status,
    }, []


# 14: free generators ----------------------------------------------------------------------------


def criterion_14(quick: bool = True, seed: int = 0) -> tuple[bool, dict, list]:
    sp = SpaceSpec.lp(1)
    fg = free_generators(sp, 4, 60, seed=seed)
    found = {}
    for n, g in enumerate(fg.gens):
        hit = None
        for p in range(1, 201):
            d = generator_power_distance(g, n, p, sp)
            if d < 1e-6:
                hit = {"p": p, "distance": d}
                break
        found[str(n)] = hit
    cert = vandermonde_certificate(fg.lambdas)
    ok = all(v is not None for v in found.values()) and cert.ok
    return ok, {"lambdas": fg.lambdas, "powers": found, "vandermonde": cert.to_json()}, []


# the battery ------------------------------------------------------------------------------------

CRITERIA: dict[int, tuple[str, float, Callable]] = {
    1: ("counterexample weight identities", 1.0, criterion_1),
    2: ("invertible bilateral example", 1.0, criterion_2),
    3: ("coordinatewise witnesses", 5.0, criterion_3),
    4: ("Cauchy witnesses", 10.0, criterion_4),
    5: ("density-set pipeline", 10.0, criterion_5),
    6: ("upper-frequent coordinatewise witness", 5.0, criterion_6),
    7: ("upper-frequent Cauchy witness", 30.0, criterion_7),
    8: ("condition (b) for differentiation", 10.0, criterion_8),
    9: ("block weight properties", 5.0, criterion_9),
    10: ("c0 frequent pipeline", 60.0, criterion_10),
    11: ("convolution eigen-relation", 5.0, criterion_11),
    12: ("condition (e) certificates", 10.0, criterion_12),
    14: ("free generators", 5.0, criterion_14),
}
ORACLE_SOURCES = (3, 4, 5, 6, 7, 10)


def run_criterion(number: int, quick: bool = True, seed: int = 0) -> CriterionResult:
    title, limit, fn = CRITERIA[number]
    start = time.perf_counter()
    try:
        ok, details, oracle = fn(quick=quick, seed=seed)
        status = _status(ok)
    except Exception as exc:  # recorded as a failure with the reason
        ok, details, oracle = False, {"error": f"{type(exc).__name__}: {exc}"}, []
        status = FAIL
    elapsed = time.perf_counter() - start
    if quick and elapsed >= limit and status == PASS:
        status = FAIL
        details["runtime_exceeded"] = True
    if any(not o["pass"] for o in oracle) and status == PASS:
        status = FAIL
    return CriterionResult(number, title, status, elapsed, limit if quick else None, details, oracle)


def oracle_criterion(results: dict[int, CriterionResult]) -> CriterionResult:
    """Criterion 13: every oracle comparison made by the witness checks agrees."""
    rows = []
    for n in ORACLE_SOURCES:
        r = results.get(n)
        if r is None:
            continue
        rows.extend(dict(o, criterion=n) for o in r.oracle)
    sources = [n for n in ORACLE_SOURCES if n in results and results[n].oracle]
    within = all(results[n].details.get("runtime_exceeded") is not True for n in sources)
    needed = {3, 4, 6, 7, 10}
    ok = bool(rows) and all(o["pass"] for o in rows) and within and needed <= set(sources)
    worst = max((o["max_rel"] for o in rows), default=math.inf)
    return CriterionResult(13, "oracle equivalence", _status(ok), 0.0, None,
                           {"comparisons": len(rows), "max_rel": worst, "sources": sources,
                            "rows": rows})


def run_suite(quick: bool = True, seed: int = 0, jobs: int | None = None,
              only: list[int] | None = None) -> list[CriterionResult]:
    """Run the battery; results come back ordered by criterion number whatever ``jobs`` is."""
    numbers = sorted(CRITERIA) if only is None else sorted(n for n in only if n in CRITERIA)
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(numbers) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {n: pool.submit(run_criterion, n, quick, seed) for n in numbers}
            results = {n: f.result() for n, f in futs.items()}
    else:
        results = {n: run_criterion(n, quick, seed) for n in numbers}
    if only is None or 13 in only:
        if only is not None:
            for n in ORACLE_SOURCES:
                if n not in results:
                    results[n] = run_criterion(n, quick, seed)
        results[13] = oracle_criterion(results)
    keep = set(numbers) | ({13} if only is None or 13 in (only or []) else set())
    return [results[n] for n in sorted(results) if n in keep]
