"""Upper-frequent witnesses: tail thresholds, block sums and the Cauchy construction.

Most bounds here are worst cases over coefficient vectors with a given
modulus profile.  In every supported space the seminorms are lattice norms,
so the worst case is the seminorm of the vector of moduli.  Past the weight
horizon the moduli are continued geometrically with the largest ratio seen on
the final stretch; a non-decreasing final stretch gives an infinite bound.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..algebra import power
from ..errors import HorizonError, SpecError
from ..logmath import NEG_INF, logsumexp, principal_power, safe_exp
from ..seq import TruncatedSeq
from ..shifts import WeightSeq, apply_shift
from ..spaces import P_MAX, SpaceSpec, f_norm
from .base import Witness, check_entry, exact_entry, support_max
from .coordwise import _back, _block

_WINDOW_FRACTION = 0.1
_WINDOW_MIN = 10
_TAIL_BUCKET = 64


# worst-case series norms ----------------------------------------------------------


def _geometric_remainder(t: np.ndarray) -> float:
    """Log of ``sum_{k>=1} exp(t_last + k*rho)`` with ``rho`` the largest final-stretch step."""
    if t.size < 2:
        return math.inf
    width = max(_WINDOW_MIN, int(_WINDOW_FRACTION * t.size))
    rho = float(np.max(np.diff(t[-width - 1 :])))
    if not rho < 0:
        return math.inf
    return float(t[-1] + rho - math.log(-math.expm1(rho)))


def log_abs_series_seminorm(
    start: int,
    log_c: np.ndarray,
    space: SpaceSpec,
    q: float = 1,
    extrapolate: bool = True,
) -> tuple[float, bool]:
    """Log ``q``-seminorm of ``sum_i c_i e_i`` for moduli ``c_i = exp(log_c[i - start])``.

    With ``extrapolate`` the series is continued past its last index using the
    geometric rule.  Returns ``(log value, extrapolated)``; the value is
    ``inf`` when the continuation cannot be bounded.
    """
    log_c = np.asarray(log_c, dtype=float)
    idx = np.arange(start, start + log_c.size, dtype=np.int64)
    if space.kind == "omega":
        keep = idx <= q
        if not extrapolate or idx.size == 0 or idx[-1] >= q:
            return logsumexp(log_c[keep]), False
        return math.inf, True
    if space.kind == "lp":
        t = space.p * log_c
        main = logsumexp(t)
        if not extrapolate:
            return main / space.p, False
        return logsumexp([main, _geometric_remainder(t)]) / space.p, True
    if space.kind == "entire":
        t = log_c + idx * math.log(q)
        if not extrapolate:
            return logsumexp(t), False
        return logsumexp([logsumexp(t), _geometric_remainder(t)]), True
    # c0 and weighted c0: a sup, unaffected by a non-increasing continuation
    t = log_c if space.kind == "c0" else log_c + space.log_gamma(idx)
    main = float(t.max()) if t.size else NEG_INF
    if not extrapolate:
        return main, False
    width = max(_WINDOW_MIN, int(_WINDOW_FRACTION * t.size))
    if t.size < 2 or np.any(np.diff(t[-width - 1 :]) > 0):
        return math.inf, True
    return main, True


def abs_series_f_norm(start: int, log_c: np.ndarray, space: SpaceSpec, extrapolate: bool = True) -> float:
    """F-norm bound for every vector whose moduli are at most ``exp(log_c)``."""
    if len(log_c) == 0:
        return 0.0
    if space.single_norm:
        return min(1.0, safe_exp(log_abs_series_seminorm(start, log_c, space, 1, extrapolate)[0]))
    total = []
    for q in range(1, P_MAX + 1):
        v = safe_exp(log_abs_series_seminorm(start, log_c, space, q, extrapolate)[0])
        total.append(2.0**-q * min(1.0, v))
    total.append(2.0**-P_MAX)
    return math.fsum(total)


def _worst_block_profile(w: WeightSeq, p: int, n_lo: int, log_M: float) -> np.ndarray:
    """Log moduli of ``sum_{n>=n_lo} sum_{l<=p} M (w_{l+1} ... w_{n+l})**-1 e_{n+l}``.

    Entry ``k`` belongs to index ``n_lo + k`` and collects every ``l <= p``
    with ``n = i - l >= n_lo``, up to the weight horizon.
    """
    i = np.arange(n_lo, w.horizon + 1, dtype=np.int64)
    terms = []
    for l in range(p + 1):
        ok = i - l >= n_lo
        val = np.full(i.size, NEG_INF)
        val[ok] = -w.log_prod(l + 1, i[ok])
        terms.append(val)
    stack = np.vstack(terms)
    top = stack.max(axis=0)
    with np.errstate(invalid="ignore"):
        out = top + np.log(np.sum(np.exp(stack - top), axis=0))
    return log_M + out


def worst_case_tail(w: WeightSeq, space: SpaceSpec, n_lo: int, p: int, M: float) -> float:
    """F-norm bound on ``sum_{n>=n_lo} sum_l y(n,l) (w_{l+1} ... w_{n+l})**-1 e_{n+l}`` with ``|y| <= M``."""
    if M == 0:
        return 0.0
    n_lo = max(int(n_lo), 0)
    if n_lo > w.horizon - 2:
        raise HorizonError(f"tail start {n_lo} too close to the weight horizon {w.horizon}")
    return abs_series_f_norm(n_lo, _worst_block_profile(w, p, n_lo, math.log(M)), space)


@dataclass(frozen=True)
class TailThreshold:
    N: int
    bound: float
    eps: float
    p: int
    M: float

    def to_json(self) -> dict:
        return {"N": self.N, "bound": self.bound, "eps": self.eps, "p": self.p, "M": self.M}


def find_tail_threshold(w: WeightSeq, space: SpaceSpec, eps: float, p: int, M: float, n_max: int | None = None) -> TailThreshold:
    """Smallest ``N >= p`` whose worst-case block tail has F-norm below ``eps``.

    The bound is non-increasing in ``N``, so the scan doubles and then bisects.

    >>> find_tail_threshold(WeightSeq.rolewicz(2.0, 200), SpaceSpec.lp(1), 0.1, 0, 1.0).N
    5
    """
    if not eps > 0:
        raise SpecError("eps must be positive")
    p = int(p)
    stop = (w.horizon - 2 * _WINDOW_MIN - 2) if n_max is None else min(int(n_max), w.horizon - 2)

    def bound(N):
        return worst_case_tail(w, space, N, p, M)

    lo = p
    b = bound(lo)
    if b < eps:
        return TailThreshold(lo, b, eps, p, M)
    step = 1
    hi = lo + step
    while True:
        if hi > stop:
            hi = stop
            if not bound(hi) < eps:
                raise HorizonError(f"tail bound stays >= {eps} up to N = {stop}")
            break
        if bound(hi) < eps:
            break
        lo = hi
        step *= 2
        hi = lo + step
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if bound(mid) < eps:
            hi = mid
        else:
            lo = mid
    return TailThreshold(hi, bound(hi), eps, p, M)


# upper-frequent coordinatewise witness ---------------------------------------------


def build_ufhc_coordwise(
    m0: int,
    m1: int,
    v: TruncatedSeq,
    x: TruncatedSeq,
    w: WeightSeq,
    space: SpaceSpec,
    N: int,
    N1: int,
    terms: int,
    eps: float = 0.1,
) -> Witness:
    """``u = x + sum_{k>=N1} v(Nk)`` with ``v(k) = sum_l v_l**(1/m0) (w_{l+1} ... w_{k+l})**(-1/m0) e_{k+l}``.

    Only ``terms`` blocks are stored.  For each ``j`` with a stored block the
    prediction ``B^{Nj}(u^m)`` is ``v**(m/m0)`` scaled back to ``e_0..e_p``
    plus the later blocks brought forward; it is exact on the stored part.
    ``tail_fn(s, m)`` bounds what the dropped blocks contribute to
    ``B^s(u^m)`` (moduli ``|v|**(m/m0)/W`` with ``W >= 1`` are at most ``M``).
    """
    if not 1 <= m0 <= m1:
        raise SpecError("need 1 <= m0 <= m1")
    if v.bilateral or x.bilateral or space.bilateral:
        raise SpecError("unilateral construction")
    p = max(support_max(v), 0)
    N, N1, terms = int(N), int(N1), int(terms)
    if N <= p:
        raise SpecError(f"blocks collide: N = {N} <= p = {p}")
    if N * N1 <= support_max(x):
        raise SpecError(f"N*N1 = {N * N1} does not clear supp(x)")
    last = N * (N1 + terms - 1) + p
    H = max(last, v.horizon, x.horizon)
    if last > w.horizon:
        raise HorizonError(f"block end {last} exceeds the weight horizon {w.horizon}")
    v = v.with_horizon(H)
    u = x.with_horizon(H)
    for k in range(N1, N1 + terms):
        u = u + _block(v, w, N * k, 1.0 / m0, H)
    log_w_max = max(0.0, float(np.max(w.log_w(np.arange(1, p + 1))))) if p else 0.0
    M = max(1.0, safe_exp(float(v.logabs.max()) if v.nnz else 0.0)) ** (m1 / m0) * math.exp((p + 1) * log_w_max)
    cut = N * (N1 + terms)
    tail_u = worst_case_tail(w, space, cut, p, M)
    u = u.with_tail(tail_u)

    @functools.lru_cache(maxsize=None)
    def tail_from(n_lo: int) -> float:
        return worst_case_tail(w, space, n_lo, p, M)

    def tail_fn(steps: int, label=None) -> float:
        n_lo = max(cut - steps, 0)
        # the bound only grows as its start moves down, so rounding down is safe
        if n_lo >= 2 * _TAIL_BUCKET:
            n_lo -= n_lo % _TAIL_BUCKET
        return tail_from(n_lo)

    last_k = N1 + terms - 1
    times = sorted({N * j for j in list(range(N1, min(N1 + 4, last_k + 1))) + [last_k - 1, last_k] if j >= N1})
    predicted = {}
    checks = {
        "u in U": check_entry(f_norm(u - x.with_horizon(H), space), eps, tail_u),
    }
    for m in range(m0, m1 + 1):
        worst = 0.0
        for j in range(N1, last_k + 1):
            lead = _back(v, w, N * j, m / m0, H)
            if m > m0:
                worst = max(worst, f_norm(lead, space))
            if N * j in times:
                predicted[(m, N * j)] = _ufhc_coord_prediction(v, w, N, j, last_k, m / m0, H)
        if m > m0:
            checks[f"m={m} lead in B(0,eps)"] = check_entry(worst, eps)
    for (m, s), pred in predicted.items():
        centre = v.with_horizon(H) if m == m0 else TruncatedSeq.zeros(H)
        checks[f"m={m} s={s} in B(target,2eps)"] = check_entry(f_norm(pred - centre, space), 2 * eps, tail_fn(s, m))
    checks["blocks disjoint"] = exact_entry(N > p)
    return Witness(
        kind="ufhc-coord",
        u=[u],
        N=N,
        params={"m0": m0, "m1": m1, "N": N, "N1": N1, "terms": terms, "eps": eps, "M": M,
                "space": space.to_json(), "weight": w.to_json()},
        predicted=predicted,
        checks=checks,
        extra={"target": v, "x": [x], "product": "coordinatewise", "orbit_times": [N * j for j in range(N1, N1 + terms)]},
        tail_fn=tail_fn,
    )


def _ufhc_coord_prediction(v: TruncatedSeq, w: WeightSeq, N: int, j: int, last_k: int, a: float, H: int) -> TruncatedSeq:
    """Closed form of ``B^{Nj}`` applied to ``(sum_{k=j}^{last_k} v(Nk))**(a m0)``, ``a = m/m0``."""
    ks = np.arange(j, last_k + 1, dtype=np.int64)
    kk, ll = np.meshgrid(ks, v.idx, indexing="ij")
    kk, ll = kk.ravel(), ll.ravel()
    la, ph = principal_power(np.tile(v.logabs, ks.size), np.tile(v.phase, ks.size), a)
    shift = (kk - j) * N
    la = la - a * w.log_prod(ll + 1, kk * N + ll) + w.log_prod(shift + ll + 1, kk * N + ll)
    return TruncatedSeq.from_log(shift + ll, la, ph, H)


def search_ufhc_coordwise(
    m0: int,
    m1: int,
    v: TruncatedSeq,
    x: TruncatedSeq,
    w: WeightSeq,
    space: SpaceSpec,
    eps: float = 0.1,
    window: int = 10_000,
    n1_max: int = 10_000,
) -> Witness:
    """Take ``N`` from the tail threshold, then the first ``N1`` whose witness passes."""
    p = max(support_max(v), 0)
    log_w_max = max(0.0, float(np.max(w.log_w(np.arange(1, p + 1))))) if p else 0.0
    M = max(1.0, safe_exp(float(v.logabs.max()) if v.nnz else 0.0)) ** (m1 / m0) * math.exp((p + 1) * log_w_max)
    thr = find_tail_threshold(w, space, eps, p, M)
    N = max(thr.N, p + 1)
    first = support_max(x) // N + 1
    terms = window // N + 2
    for N1 in range(max(first, 1), n1_max + 1):
        wit = build_ufhc_coordwise(m0, m1, v, x, w, space, N, N1, terms, eps)
        if wit.status == "pass":
            wit.extra["tail_threshold"] = thr.to_json()
            return wit
    raise HorizonError(f"no N1 <= {n1_max} passes")


# condition (b) ---------------------------------------------------------------------


@dataclass
class ConditionBReport:
    m: int
    c: float
    sigmas: list[int]
    values: dict[float, list[float]]
    extrapolated: bool
    f_norms: list[float] = field(default_factory=list)

    def decreasing(self, q=None) -> bool:
        keys = [q] if q is not None else list(self.values)
        return all(np.all(np.diff(self.values[k]) <= 0) for k in keys)

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "c": self.c,
            "sigmas": self.sigmas,
            "values": {str(k): v for k, v in self.values.items()},
            "f_norms": self.f_norms,
            "extrapolated": self.extrapolated,
        }


def condition_b_profile(w: WeightSeq, m: int, c: float, sigma: int) -> tuple[int, np.ndarray]:
    """Start index and log moduli of ``(W_{m sigma})**((m-1)/m) / W_{(m-1)sigma+n}`` for ``n >= c sigma``."""
    n0 = math.ceil(c * sigma)
    top = w.horizon - (m - 1) * sigma
    if top < n0 + 2 * _WINDOW_MIN or m * sigma > w.horizon:
        raise HorizonError(f"sigma = {sigma} needs a weight horizon beyond {m * sigma}")
    n = np.arange(n0, top + 1, dtype=np.int64)
    return n0, (m - 1) / m * w.logW(m * sigma) - w.logW((m - 1) * sigma + n)


def check_condition_b(
    w: WeightSeq,
    space: SpaceSpec,
    m: int,
    c: float,
    sigmas: Sequence[int],
    qs: Sequence[float] = (1,),
) -> ConditionBReport:
    """Worst-case ``|z_n| <= 1`` values of the condition-(b) sums, one list per seminorm.

    >>> r = check_condition_b(WeightSeq.rolewicz(2.0, 400), SpaceSpec.lp(1), 2, 0.5, [40])
    >>> abs(r.values[1][0] - 2.0**-19) < 1e-15
    True
    """
    if m < 2 or not 0 < c < 1:
        raise SpecError("need m >= 2 and 0 < c < 1")
    values = {q: [] for q in qs}
    fn = []
    for s in sigmas:
        n0, log_c = condition_b_profile(w, m, c, int(s))
        for q in qs:
            values[q].append(safe_exp(log_abs_series_seminorm(n0, log_c, space, q)[0]))
        fn.append(abs_series_f_norm(n0, log_c, space))
    return ConditionBReport(m, c, [int(s) for s in sigmas], values, True, fn)


# upper-frequent Cauchy witness ------------------------------------------------------


def ufhc_q(y: TruncatedSeq, w: WeightSeq, space: SpaceSpec, eta: float) -> TailThreshold:
    """``q`` from the tail threshold with ``M = ||y||_inf max(1, w_1..w_p)**(p+1)``."""
    p = max(support_max(y), 0)
    log_w_max = max(0.0, float(np.max(w.log_w(np.arange(1, p + 1))))) if p else 0.0
    M = safe_exp(float(y.logabs.max()) if y.nnz else 0.0) * math.exp((p + 1) * log_w_max)
    thr = find_tail_threshold(w, space, eta, 0, max(M, 1e-300))
    return TailThreshold(max(thr.N, p + 1), thr.bound, eta, p, M)


def _cauchy_residual(y: TruncatedSeq, w: WeightSeq, q: int, k: int, jhi: int, sigma: int, H: int) -> TruncatedSeq:
    """``sum_{j=k+1}^{jhi} sum_l y_l/(w_{l+1} ... w_{q(j-k)+l}) e_{q(j-k)+l} + e_{q sigma - q k}/W_{q sigma - q k}``."""
    parts_i, parts_la, parts_ph = [], [], []
    l = y.idx
    for j in range(k + 1, jhi + 1):
        off = q * (j - k)
        parts_i.append(l + off)
        parts_la.append(y.logabs - w.log_prod(l + 1, off + l))
        parts_ph.append(y.phase)
    far = q * sigma - q * k
    parts_i.append(np.array([far]))
    parts_la.append(np.array([-w.logW(far)]))
    parts_ph.append(np.array([1.0 + 0j]))
    return TruncatedSeq.from_log(np.concatenate(parts_i), np.concatenate(parts_la), np.concatenate(parts_ph), H)


def build_ufhc_cauchy(
    m: int,
    y: TruncatedSeq,
    x: TruncatedSeq,
    w: WeightSeq,
    space: SpaceSpec,
    c: float,
    d: float,
    q: int,
    sigma: int,
    eta: float = 0.05,
    ratio_tol: float = 0.1,
) -> Witness:
    """``u = x + sum_{c sigma <= j < d sigma} sum_l d_{j,l} e_{qj+l} + eps e_{q sigma}`` (Cauchy product).

    Here ``eps = W_{mq sigma}**(-1/m)`` and
    ``d_{j,l} = y_l / (m eps**(m-1) w_{l+1} ... w_{(m-1)q sigma+qj+l})``.  The
    orbit times are ``E = {(m-1)q sigma + qj}``.  For each ``s`` in ``E`` the
    prediction of ``B^s(u^m)`` is ``y`` plus the two residual series, and
    ``B^s(u^n) = 0`` for ``n < m``.
    """
    if m < 2:
        raise SpecError("need m >= 2")
    if not 0 < c < d < (1 + c) / 2:
        raise SpecError("need 0 < c < d < (1 + c)/2")
    if space.bilateral:
        raise SpecError("unilateral construction")
    p = max(support_max(y), 0)
    px = support_max(x)
    q, sigma = int(q), int(sigma)
    if q <= p:
        raise SpecError(f"q = {q} must exceed p = {p}")
    jlo = math.ceil(c * sigma)
    jhi = math.ceil(d * sigma) - 1
    if jhi < jlo:
        raise SpecError("sigma too small: no j with c sigma <= j < d sigma")
    if px >= jlo:
        raise SpecError(f"supp(x) reaches {px}, not below c sigma = {jlo}")
    H = m * q * sigma
    if H > w.horizon:
        raise HorizonError(f"need weights up to {H}, have {w.horizon}")
    log_eps = -w.logW(m * q * sigma) / m
    js = np.arange(jlo, jhi + 1, dtype=np.int64)
    l = y.idx
    jj, ll = np.meshgrid(js, l, indexing="ij")
    jj, ll = jj.ravel(), ll.ravel()
    yl = np.tile(y.logabs, js.size)
    yp = np.tile(y.phase, js.size)
    la_d = yl - math.log(m) - (m - 1) * log_eps - w.log_prod(ll + 1, (m - 1) * q * sigma + q * jj + ll)
    blocks = TruncatedSeq(q * jj + ll, la_d, yp, H)
    spike = TruncatedSeq(np.array([q * sigma]), np.array([log_eps]), np.array([1.0 + 0j]), H)
    xh = x.with_horizon(H)
    u = xh + blocks + spike
    E = [(m - 1) * q * sigma + q * int(j) for j in js]

    # everything of u**m other than the single cross term m eps**(m-1) d and eps**m e_{mq sigma}
    # has support at most max(z); it must stay below min(E)
    top_block = q * jhi + p
    cand = [(m - 2) * q * sigma + 2 * top_block]
    if px >= 0:
        cand.append((m - 1) * q * sigma + px)
    z_max = max(cand)
    separated = z_max < E[0]
    predicted: dict = {}
    checks = {
        "support separation": exact_entry(separated, f"max supp(z) = {z_max}, min E = {E[0]}"),
        "u in U": check_entry(f_norm(u - xh, space), eta),
    }
    worst_res = 0.0
    for k, s in zip(js, E):
        res = _cauchy_residual(y, w, q, int(k), jhi, sigma, H)
        predicted[(m, s)] = y.with_horizon(H) + res
        for n in range(1, m):
            predicted[(n, s)] = TruncatedSeq.zeros(H)
        worst_res = max(worst_res, f_norm(res, space))
    checks["residual in B(0, 2 eta)"] = check_entry(worst_res, 2 * eta)
    ratio = len(E) / E[-1]
    limit = (d - c) / ((m - 1) * q + q * d)
    checks["density ratio"] = check_entry(abs(ratio - limit) / limit, ratio_tol, note=f"{ratio} vs {limit}")
    return Witness(
        kind="ufhc-cauchy",
        u=[u],
        N=E[0],
        params={"m": m, "c": c, "d": d, "q": q, "sigma": sigma, "eta": eta,
                "log_eps": log_eps, "space": space.to_json(), "weight": w.to_json()},
        predicted=predicted,
        checks=checks,
        extra={"target": y, "x": [x], "product": "cauchy", "orbit_times": E,
               "ratio": ratio, "ratio_limit": limit, "z_max": z_max},
    )


def predicted_cauchy_power(wit: Witness, w: WeightSeq, m: int, s: int) -> TruncatedSeq:
    """``B^s(u^m)`` computed by the fast path (closed power then one shift)."""
    return apply_shift(w, power(wit.u[0], m, "cauchy"), s)
