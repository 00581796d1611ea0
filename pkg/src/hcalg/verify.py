"""Orbit evaluation, criterion checks, hitting-time densities and report output.

Two evaluation paths are kept apart on purpose.  The fast path uses the
vectorised products of :mod:`hcalg.algebra` and one call to
:func:`hcalg.shifts.apply_shift`.  The brute-force oracle expands powers by
repeated pairwise products on plain dictionaries and shifts one step at a
time on a dense log-magnitude array with compensated summation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from . import SCHEMA_VERSION
from .algebra import Poly, eval_poly, monomial
from .densitysets import density_estimate
from .errors import HorizonError, SpecError
from .seq import TruncatedSeq
from .shifts import WeightSeq, apply_shift, backward_shift_arrays
from .logmath import safe_exp
from .spaces import SpaceSpec, log_seminorm_arrays, seminorm
from .witnesses.base import FAIL, INCONCLUSIVE, PASS, Witness, _jsonable

REL_TOL = 1e-9

# brute-force oracle -----------------------------------------------------------------

_Coeffs = dict  # index -> (log modulus, unit phase)


def _to_dict(x: TruncatedSeq) -> _Coeffs:
    return {int(i): (float(a), complex(p)) for i, a, p in zip(x.idx, x.logabs, x.phase)}


def _combine(terms: dict[int, list]) -> _Coeffs:
    out = {}
    for i, lst in terms.items():
        top = max(a for a, _ in lst)
        s = sum(p * math.exp(a - top) for a, p in lst)
        if s != 0:
            out[i] = (top + math.log(abs(s)), s / abs(s))
    return out


def brute_product(x: _Coeffs, y: _Coeffs, kind: str, horizon: int) -> _Coeffs:
    """Pairwise product on dictionaries; Cauchy terms past ``horizon`` are dropped."""
    if kind == "coordinatewise":
        return {i: (x[i][0] + y[i][0], x[i][1] * y[i][1]) for i in x.keys() & y.keys()}
    if kind != "cauchy":
        raise SpecError(f"unknown product {kind!r}")
    terms: dict[int, list] = {}
    for i, (a, p) in x.items():
        for j, (b, q) in y.items():
            k = i + j
            if k <= horizon:
                terms.setdefault(k, []).append((a + b, p * q))
    return _combine(terms)


def brute_monomial(u: Sequence[TruncatedSeq], alpha: Sequence[int], kind: str) -> _Coeffs:
    """``u^alpha`` by one pairwise product per factor."""
    H = u[0].horizon
    out = None
    for uj, aj in zip(u, alpha):
        d = _to_dict(uj)
        for _ in range(int(aj)):
            out = d if out is None else brute_product(out, d, kind, H)
    if out is None:
        raise SpecError("zero multi-index")
    return out


def brute_poly(P: Poly, u: Sequence[TruncatedSeq], kind: str) -> _Coeffs:
    terms: dict[int, list] = {}
    for alpha, c in P.terms.items():
        for i, (a, p) in brute_monomial(u, alpha, kind).items():
            terms.setdefault(i, []).append((a + math.log(abs(c)), p * c / abs(c)))
    return _combine(terms)


def brute_shift_orbit(w: WeightSeq, x: _Coeffs, horizon: int, checkpoints: Iterable[int], bilateral: bool = False) -> dict[int, TruncatedSeq]:
    """``B_w^s x`` for each checkpoint ``s``, one backward step at a time.

    Each stored coefficient keeps its own log modulus; every step adds the
    weight at its current position with Kahan compensation.  Unilateral mass
    reaching index ``-1`` is discarded.
    """
    cps = sorted({int(s) for s in checkpoints})
    off = horizon if bilateral else 0
    keys = np.array(sorted(x), dtype=np.int64)
    L = np.array([x[int(k)][0] for k in keys], dtype=float)
    PH = np.array([x[int(k)][1] for k in keys], dtype=complex)
    comp = np.zeros(keys.size)
    n = np.arange(-off, horizon + 1)
    lw = np.zeros(n.size)
    lw[1:] = w.log_w(n[1:])
    out = {}
    step = 0
    for s in cps:
        while step < s:
            cur = keys - step
            if bilateral:
                if np.any((cur - 1 < -horizon) & np.isfinite(L)):
                    raise HorizonError("mass shifted past -horizon")
            elif cur.size and cur[0] < 1:
                live = cur >= 1
                keys, L, PH, comp, cur = keys[live], L[live], PH[live], comp[live], cur[live]
            # e_k -> w_k e_{k-1}
            y = lw[cur + off] - comp
            t = L + y
            with np.errstate(invalid="ignore"):
                c = (t - L) - y
            comp = np.where(np.isfinite(t), c, 0.0)
            L = t
            step += 1
        keep = np.isfinite(L)
        out[s] = TruncatedSeq(keys[keep] - s, L[keep], PH[keep], horizon, bilateral)
    return out


def relative_mismatch(a: TruncatedSeq, b: TruncatedSeq, window: tuple[int, int] | None = None) -> dict:
    """Support equality and the largest ``|1 - b_i/a_i|`` over the common support."""
    if window is not None:
        a, b = a.restrict(*window), b.restrict(*window)
    same = a.support == b.support
    worst = 0.0
    if same and a.nnz:
        ratio = np.exp(b.logabs - a.logabs) * (b.phase / a.phase)
        worst = float(np.max(np.abs(1.0 - ratio)))
    return {"same_support": bool(same), "max_rel": worst if same else math.inf, "nnz": a.nnz,
            "exact_zero": a.nnz == 0 and b.nnz == 0}


@dataclass
class OracleJob:
    label: Any
    u: list[TruncatedSeq]
    alpha: tuple[int, ...] | None
    steps: int
    product: str
    poly: Poly | None = None
    window: tuple[int, int] | None = None
    group: Any = None


def oracle_jobs(wit: Witness) -> list[OracleJob]:
    """Translate each prediction of a witness into the orbit it describes."""
    kind = wit.kind
    windows = wit.extra.get("compare_window", {})
    prod = wit.extra.get("product", "coordinatewise")
    jobs = []
    for label in wit.predicted:
        if kind in ("coordwise", "cauchy"):
            jobs.append(OracleJob(label, wit.u, tuple(label), wit.N, prod, group=tuple(label)))
        elif kind == "bilateral":
            jobs.append(OracleJob(label, wit.u, tuple(label), wit.N, prod, group=tuple(label)))
        elif kind in ("ufhc-coord", "ufhc-cauchy"):
            m, s = label
            jobs.append(OracleJob(label, wit.u, (m,), s, prod, group=(m,)))
        elif kind == "omega-fhc":
            P = Poly.from_json(wit.params["P"])
            p, n = label
            jobs.append(OracleJob(label, wit.u, None, n, prod, P, tuple(windows[label]), group="P"))
        elif kind == "omega-mixed":
            P = Poly.from_json(wit.params["P"])
            jobs.append(OracleJob(label, wit.u, None, label, prod, P, tuple(windows[label]), group="P"))
        elif kind == "c0-fhc":
            parts = wit.extra["parts"]
            tg = wit.extra["targets"]
            if label[0] == "5.1":
                _, p, n = label
                src, m = p, tg[p - 1]["m"]
            elif label[0] == "5.2":
                _, p, n, m = label
                src = p
            else:
                _, p, q, n = label
                src, m = q, tg[p - 1]["m"]
            jobs.append(OracleJob(label, [parts[src]], (m,), n, prod, group=(src, m)))
        else:
            raise SpecError(f"no oracle for witness kind {kind!r}")
    return jobs


def oracle_compare(wit: Witness, w: WeightSeq, rel: float = REL_TOL) -> dict:
    """Brute-force orbit against every prediction; also the fast path for reference."""
    jobs = oracle_jobs(wit)
    groups: dict = {}
    for j in jobs:
        groups.setdefault(j.group, []).append(j)
    rows = {}
    for group, js in groups.items():
        first = js[0]
        if first.poly is not None:
            base = brute_poly(first.poly, first.u, first.product)
            fast_base = eval_poly(first.poly, first.u, first.product)
        else:
            base = brute_monomial(first.u, first.alpha, first.product)
            fast_base = monomial(first.u, first.alpha, first.product)
        H = first.u[0].horizon
        orbit = brute_shift_orbit(w, base, H, [j.steps for j in js], first.u[0].bilateral)
        fast_base = fast_base.with_tail(0.0)
        for j in js:
            pred = wit.predicted[j.label]
            brute = orbit[j.steps]
            fast = apply_shift(w, fast_base, j.steps)
            r_b = relative_mismatch(pred, brute, j.window)
            r_f = relative_mismatch(pred, fast, j.window)
            rows[j.label] = {
                "steps": j.steps,
                "brute": r_b,
                "fast": r_f,
                "pass": bool(r_b["same_support"] and r_b["max_rel"] <= rel and r_f["same_support"] and r_f["max_rel"] <= rel),
            }
    worst = max((max(r["brute"]["max_rel"], r["fast"]["max_rel"]) for r in rows.values()), default=0.0)
    return {"rel_tol": rel, "count": len(rows), "max_rel": worst, "pass": all(r["pass"] for r in rows.values()), "rows": rows}


# criterion instances ------------------------------------------------------------------


@dataclass
class CriterionInstance:
    """``T^N(u^beta)`` should land in ``V`` and every other ``T^N(u^alpha)`` in the ball ``W`` at 0."""

    A: list[tuple[int, ...]]
    beta: tuple[int, ...]
    u: list[TruncatedSeq]
    N: int
    V: tuple[TruncatedSeq, float, float]
    W: float
    product: str
    space: SpaceSpec
    operator: WeightSeq | Callable[[TruncatedSeq, int], TruncatedSeq]
    direction: str = "backward"
    tails: Mapping = field(default_factory=dict)

    def __post_init__(self):
        self.A = [tuple(a) if not isinstance(a, int) else (a,) for a in self.A]
        self.beta = tuple(self.beta) if not isinstance(self.beta, int) else (self.beta,)
        if self.beta not in self.A:
            raise SpecError("beta must belong to A")
        if not (self.V[1] > 0 and self.W > 0):
            raise SpecError("radii must be positive")

    def apply(self, x: TruncatedSeq) -> TruncatedSeq:
        if isinstance(self.operator, WeightSeq):
            return apply_shift(self.operator, x, self.N, self.direction)
        return self.operator(x, self.N)


@dataclass
class WitnessReport:
    kind: str
    status: str
    instance: dict = field(default_factory=dict)
    per_alpha: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    tails: dict = field(default_factory=dict)
    densities: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    inconclusive: list = field(default_factory=list)
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "status": self.status,
            "seed": self.seed,
            "instance": _jsonable(self.instance),
            "per_alpha": _jsonable(self.per_alpha),
            "checks": _jsonable(self.checks),
            "tails": _jsonable(self.tails),
            "densities": _jsonable(self.densities),
            "oracle": _jsonable(self.oracle),
            "params": _jsonable(self.params),
            "inconclusive": list(self.inconclusive),
        }

    @property
    def exit_code(self) -> int:
        return {PASS: 0, FAIL: 1, INCONCLUSIVE: 2}[self.status]


def merge_status(*statuses: str) -> str:
    if FAIL in statuses:
        return FAIL
    if INCONCLUSIVE in statuses:
        return INCONCLUSIVE
    return PASS


def check_instance(inst: CriterionInstance) -> WitnessReport:
    """Evaluate ``T^N(u^alpha)`` for every ``alpha`` and test ball membership conservatively."""
    centre, radius, q = inst.V
    per_alpha, tails = {}, {}
    try:
        for alpha in inst.A:
            img = inst.apply(monomial(inst.u, alpha, inst.product))
            tail = img.tail_bound + float(inst.tails.get(alpha, 0.0))
            if alpha == inst.beta:
                dist = seminorm(img - centre.with_horizon(img.horizon).with_tail(0.0), inst.space, q)
                ok = dist + tail < radius
                per_alpha[alpha] = {"role": "V", "distance": dist, "tail": tail, "radius": radius, "pass": ok,
                                    "exact_zero": False}
            else:
                nrm = seminorm(img, inst.space, q) if img.nnz else 0.0
                ok = nrm + tail < inst.W
                per_alpha[alpha] = {"role": "W", "norm": nrm, "tail": tail, "radius": inst.W, "pass": ok,
                                    "exact_zero": img.nnz == 0 and tail == 0.0}
            tails[alpha] = tail
    except HorizonError as exc:
        return WitnessReport("instance", INCONCLUSIVE, _instance_summary(inst), per_alpha, tails=tails,
                             inconclusive=[str(exc)])
    status = PASS if all(r["pass"] for r in per_alpha.values()) else FAIL
    return WitnessReport("instance", status, _instance_summary(inst), per_alpha, tails=tails)


def _instance_summary(inst: CriterionInstance) -> dict:
    op = inst.operator.to_json() if isinstance(inst.operator, WeightSeq) else "callable"
    return {"A": [list(a) for a in inst.A], "beta": list(inst.beta), "N": inst.N, "product": inst.product,
            "V_radius": inst.V[1], "q": inst.V[2], "W_radius": inst.W, "operator": op,
            "direction": inst.direction, "space": inst.space.to_json()}


def instance_from_witness(wit: Witness, w: WeightSeq, space: SpaceSpec, V_radius: float, W_radius: float, q: float = 1) -> CriterionInstance:
    """The criterion instance a coordinatewise or Cauchy witness is built to satisfy."""
    A = [tuple(a) for a in wit.params["A"]]
    beta = tuple(wit.params["beta"])
    return CriterionInstance(A, beta, wit.u, int(wit.N), (wit.extra["target"], V_radius, q), W_radius,
                             wit.extra["product"], space, w)


def report_from_witness(wit: Witness, seed: int | None = None, oracle: dict | None = None, densities: dict | None = None,
                        instance: WitnessReport | None = None) -> WitnessReport:
    """Fold a witness, its oracle comparison and optional measurements into one report."""
    statuses = [wit.status]
    if oracle is not None:
        statuses.append(PASS if oracle["pass"] else FAIL)
    if instance is not None:
        statuses.append(instance.status)
    if densities:
        statuses.extend(d.get("status", PASS) for d in densities.values())
    rep = WitnessReport(
        kind=wit.kind,
        status=merge_status(*statuses),
        instance=instance.instance if instance else {"N": wit.N},
        per_alpha=instance.per_alpha if instance else {},
        checks=wit.checks,
        tails=instance.tails if instance else {},
        densities=densities or {},
        oracle=_oracle_summary(oracle) if oracle else {},
        params=wit.params,
        inconclusive=list(wit.inconclusive) + (instance.inconclusive if instance else []),
        seed=seed,
    )
    return rep


def _oracle_summary(oracle: dict) -> dict:
    rows = {(",".join(str(v) for v in k) if isinstance(k, tuple) else str(k)): r for k, r in oracle["rows"].items()}
    return {"rel_tol": oracle["rel_tol"], "count": oracle["count"], "max_rel": oracle["max_rel"], "pass": oracle["pass"],
            "rows": rows}


# hitting-time densities ---------------------------------------------------------------


@dataclass
class Ball:
    center: TruncatedSeq
    radius: float
    q: float = 1
    name: str = ""


def _distance(idx: np.ndarray, la: np.ndarray, ph: np.ndarray, c: TruncatedSeq, space: SpaceSpec, q: float) -> float:
    """``||y - c||_q`` for ``y`` given as arrays, without building the difference."""
    if c.nnz == 0 or idx.size == 0:
        if c.nnz == 0:
            return safe_exp(log_seminorm_arrays(idx, la, space, q))
        return safe_exp(log_seminorm_arrays(c.idx, c.logabs, space, q))
    pos = np.minimum(np.searchsorted(idx, c.idx), idx.size - 1)
    present = idx[pos] == c.idx
    yv = np.where(present, np.exp(la[pos]) * ph[pos], 0.0)
    with np.errstate(divide="ignore"):
        la_on = np.log(np.abs(yv - np.exp(c.logabs) * c.phase))
    off = np.ones(idx.size, dtype=bool)
    off[pos[present]] = False
    return safe_exp(log_seminorm_arrays(np.concatenate([idx[off], c.idx]), np.concatenate([la[off], la_on]), space, q))


def orbit_hit_density(
    w: WeightSeq,
    x: TruncatedSeq,
    P: Poly,
    targets: Sequence[Ball],
    horizon_N: int,
    space: SpaceSpec,
    stride: int = 1,
    product: str = "coordinatewise",
    tail_fn: Callable[[int, Any], float] | None = None,
    burn_in: int = 1,
    label=None,
) -> dict:
    """Hit times ``p <= horizon_N`` with ``T^p(P(x))`` inside each target ball.

    ``P(x)`` is formed once and then shifted ``stride`` steps at a time.  A
    nonzero stored tail of ``P(x)`` is replaced by ``tail_fn(p, label)`` when
    given.  With ``stride > 1`` the density is a bracket: unsampled times
    count as misses for the lower end and as hits for the upper end.
    """
    if stride < 1 or horizon_N < 1:
        raise SpecError("stride and horizon must be positive")
    base = eval_poly(P, x, product)
    if base.tail_bound and tail_fn is None:
        raise HorizonError("P(x) has an unbounded orbit tail; supply tail_fn")
    idx, la, ph = base.idx, base.logabs, base.phase
    times = list(range(0, horizon_N + 1, stride))
    hits = {i: [] for i in range(len(targets))}
    rows = []
    prev = 0
    for p in times:
        if p:
            idx, la, ph = backward_shift_arrays(w, idx, la, ph, p - prev, base.horizon, base.bilateral)
            prev = p
        tail = None
        row = [p]
        for i, t in enumerate(targets):
            d = _distance(idx, la, ph, t.center, space, t.q)
            # the tail bound is only needed once the stored part is inside the ball
            if d < t.radius and tail is None:
                tail = tail_fn(p, label) if tail_fn is not None else 0.0
            hit = bool(d < t.radius and d + tail < t.radius)
            if hit:
                hits[i].append(p)
            row.append(int(hit))
        rows.append(row)
    out = {}
    for i, t in enumerate(targets):
        H = hits[i]
        pos = [h for h in H if h >= 1]
        lower = density_estimate(pos, horizon_N, burn_in, "lower") if pos else 0.0
        upper = density_estimate(pos, horizon_N, burn_in, "upper") if pos else 0.0
        if stride > 1:
            unsampled = [p for p in range(1, horizon_N + 1) if p % stride]
            lower_hi = density_estimate(sorted(pos + unsampled), horizon_N, burn_in, "lower")
            upper_hi = density_estimate(sorted(pos + unsampled), horizon_N, burn_in, "upper")
            lo_b, up_b = [lower, lower_hi], [upper, upper_hi]
        else:
            lo_b, up_b = [lower, lower], [upper, upper]
        out[t.name or str(i)] = {"hits": H, "count": len(H), "lower": lo_b, "upper": up_b,
                                 "radius": t.radius, "q": t.q, "burn_in": burn_in, "stride": stride}
    return {"targets": out, "rows": rows, "horizon_N": horizon_N, "stride": stride}


# output --------------------------------------------------------------------------------


def dumps(obj: Any) -> str:
    """Deterministic JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_report(report: WitnessReport | Mapping, path: str | Path, csv_rows: Sequence[Sequence] | None = None,
                csv_header: Sequence[str] = ("p", "hit")) -> Path:
    """Write ``report`` as JSON to ``path`` and optional rows to the sibling ``.csv``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = report.to_json() if hasattr(report, "to_json") else dict(report)
    data.setdefault("schema_version", SCHEMA_VERSION)
    path.write_text(dumps(data))
    if csv_rows is not None:
        with path.with_suffix(".csv").open("w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(csv_header)
            wr.writerows(csv_rows)
    return path
