"""Frequently hypercyclic constructions on omega and c0 (coordinatewise product).

Targets ``(v(p), m(p))`` come from a seeded enumeration: ``v(p)`` has support
in ``[0, p]`` with dyadic real and imaginary parts on a grid whose radius and
resolution both grow with ``p``, and ``m(p)`` runs through ``1; 1, 2; 1, 2, 3; ...``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..algebra import Poly
from ..densitysets import DensityFamily, thin_separate
from ..errors import HorizonError, SpecError
from ..logmath import NEG_INF, log_unit_arrays, principal_power
from ..seq import TruncatedSeq
from ..shifts import WeightSeq, tends_to_zero
from .base import Witness, check_entry, exact_entry, support_max

_ALPHA_SAMPLES = (0.5, 1.0, 1.5, 2.0, 3.0)


# dense targets -------------------------------------------------------------------


@dataclass(frozen=True)
class Target:
    values: tuple[complex, ...]
    m: int

    @property
    def p(self) -> int:
        return len(self.values) - 1

    def seq(self, horizon: int) -> TruncatedSeq:
        return TruncatedSeq.from_values({l: v for l, v in enumerate(self.values) if v != 0}, horizon)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(l, log|v_l|, phase)`` over the nonzero coordinates."""
        la, ph = log_unit_arrays(self.values)
        keep = la > NEG_INF
        return np.nonzero(keep)[0].astype(np.int64), la[keep], ph[keep]

    def log_max(self) -> float:
        la = self.arrays()[1]
        return float(la.max()) if la.size else NEG_INF

    def to_json(self) -> dict:
        return {"m": self.m, "v": [{"re": v.real, "im": v.imag} for v in self.values]}


def degree_sequence(count: int) -> list[int]:
    """``1; 1, 2; 1, 2, 3; ...`` truncated to ``count`` terms.

    >>> degree_sequence(6)
    [1, 1, 2, 1, 2, 3]
    """
    out: list[int] = []
    top = 1
    while len(out) < count:
        out.extend(range(1, top + 1))
        top += 1
    return out[:count]


def _dyadic(rng: np.random.Generator, level: int, size) -> np.ndarray:
    """Dyadic numbers in ``[-level, level]`` with denominator ``2**level``."""
    scale = 2**level
    return rng.integers(-level * scale, level * scale + 1, size=size) / scale


def dense_targets(count: int, seed: int = 0) -> list[Target]:
    """The first ``count`` targets; ``v(p)`` lives on ``[0, p]``."""
    rng = np.random.default_rng(seed)
    ms = degree_sequence(count)
    out = []
    for p in range(1, count + 1):
        level = max(1, int(math.log2(p + 1)))
        re = _dyadic(rng, level, p + 1)
        im = _dyadic(rng, level, p + 1)
        out.append(Target(tuple(complex(a, b) for a, b in zip(re, im)), ms[p - 1]))
    return out


def dense_scalars(count: int, size: int, seed: int = 0, nonzero: bool = False) -> list[np.ndarray]:
    """Seeded dense enumeration of vectors in ``C**size``."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(count):
        level = max(1, int(math.log2(k + 2)))
        z = _dyadic(rng, level, size) + 1j * _dyadic(rng, level, size)
        if nonzero:
            z = np.where(z == 0, 2.0**-level, z)
        out.append(z)
    return out


# block helpers --------------------------------------------------------------------


def _rooted(t: Target, root: int, power: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(l, log|v_l|**(power/root), phase of (v_l**(1/root))**power)``."""
    l, la, ph = t.arrays()
    la_r, ph_r = principal_power(la, ph, 1.0 / root)
    return l, la_r * power, ph_r**power


def _blocks(S: np.ndarray, t: Target, root: int, w: WeightSeq, H: int) -> TruncatedSeq:
    """``sum_{n in S} sum_l v_l**(1/root) (w_{l+1} ... w_{n+l})**(-1/root) e_{n+l}``."""
    l, la, ph = _rooted(t, root, 1)
    if S.size == 0 or l.size == 0:
        return TruncatedSeq.zeros(H)
    nn, ll = np.meshgrid(S, l, indexing="ij")
    nn, ll = nn.ravel(), ll.ravel()
    logc = np.tile(la, S.size) - w.log_prod(ll + 1, nn + ll) / root
    return TruncatedSeq(nn + ll, logc, np.tile(ph, S.size), H)


def shifted_block_power(S: np.ndarray, t: Target, root: int, m: int, n: int, w: WeightSeq, H: int) -> TruncatedSeq:
    """Closed form of ``B^n`` applied to the ``m``-th power of :func:`_blocks`.

    The entry from ``e_{n'+l}`` lands on ``e_{n'+l-n}`` with modulus
    ``|v_l|**(m/root) w_{n'+l-n+1} ... w_{n'+l} / (w_{l+1} ... w_{n'+l})**(m/root)``.
    """
    l, la, ph = _rooted(t, root, m)
    if S.size == 0 or l.size == 0:
        return TruncatedSeq.zeros(H)
    nn, ll = np.meshgrid(S, l, indexing="ij")
    nn, ll = nn.ravel(), ll.ravel()
    i = nn + ll
    keep = i >= n
    i, ll = i[keep], ll[keep]
    a = m / root
    logc = np.tile(la, S.size)[keep] - a * w.log_prod(ll + 1, i) + w.log_prod(i - n + 1, i)
    return TruncatedSeq(i - n, logc, np.tile(ph, S.size)[keep], H)


def _settles(values: Sequence[float], tol: float, floor: float = 1e-12) -> bool:
    """:func:`tends_to_zero` after treating values below the rounding floor as 0."""
    v = np.asarray(values, dtype=float)
    return tends_to_zero(np.where(v < floor, 0.0, v), tol)


def _branch(w: WeightSeq) -> str:
    """``infinity`` when ``w_1 ... w_n`` ends above 1, else ``zero``."""
    return "infinity" if w.logW(w.horizon) > 0 else "zero"


# frequently hypercyclic vector on omega -----------------------------------------


def build_omega_fhc(
    targets: Sequence[Target],
    fam: DensityFamily,
    w: WeightSeq,
    horizon: int | None = None,
    P: Poly | None = None,
    tol: float = 1e-3,
) -> Witness:
    """``u = sum_p sum_{n in A(p)} y(n, p)`` with ``y(n,p) = sum_l v_l(p)**(1/m(p)) (w_{l+1} ... w_{n+l})**(-1/m(p)) e_{n+l}``.

    With a polynomial ``P`` the coordinates ``0..p`` of ``B^n P(u)`` are
    predicted for every stored ``n`` in ``A(p)`` with ``m(p)`` the dominant
    degree (the lowest when ``w_1 ... w_n -> inf``, the highest when it tends
    to 0), and the distance to ``P(dominant) v(p)`` is tracked along ``A(p)``.
    """
    H = min(fam.horizon, w.horizon) if horizon is None else int(horizon)
    if H > w.horizon:
        raise HorizonError("horizon beyond the weight table")
    count = min(len(targets), fam.count)
    parts, placed = [], {}
    for p in range(1, count + 1):
        t = targets[p - 1]
        if t.p > p:
            raise SpecError(f"target {p} has support beyond {p}")
        S = fam.sets[p - 1]
        S = S[S + p <= H]
        placed[p] = S
        parts.append(_blocks(S, t, t.m, w, H))
    idx = np.concatenate([x.idx for x in parts]) if parts else np.zeros(0, dtype=np.int64)
    disjoint = idx.size == np.unique(idx).size
    u = TruncatedSeq.zeros(H)
    for x in parts:
        u = u + x
    checks = {"blocks disjoint": exact_entry(disjoint)}
    predicted, windows, errors = {}, {}, {}
    inconclusive = []
    branch = _branch(w)
    if P is not None:
        degs = [sum(a) for a in P.support]
        dom = min(degs) if branch == "infinity" else max(degs)
        lead = P.coeff_of_degree(dom)
        for p in range(1, count + 1):
            t = targets[p - 1]
            if t.m != dom:
                continue
            errs = []
            for n in placed[p]:
                coords = TruncatedSeq.zeros(H)
                for (m,), c in P.terms.items():
                    coords = coords + shifted_block_power(np.array([n]), t, t.m, m, int(n), w, H).scale(c)
                predicted[(p, int(n))] = coords
                windows[(p, int(n))] = (0, p)
                diff = coords - t.seq(H).scale(lead)
                errs.append(float(np.exp(diff.logabs).max()) if diff.nnz else 0.0)
            errors[p] = errs
            if len(errs) < 2:
                inconclusive.append(f"p={p}: fewer than two times of A(p) inside the horizon")
            else:
                checks[f"p={p} correction tends to zero"] = exact_entry(_settles(errs, tol), f"last {errs[-1]:.3g}")
    return Witness(
        kind="omega-fhc",
        u=[u],
        N=None,
        params={"horizon": H, "branch": branch, "count": count, "tol": tol,
                "P": P.to_json() if P is not None else None, "weight": w.to_json()},
        predicted=predicted,
        checks=checks,
        inconclusive=inconclusive,
        extra={"targets": [t.to_json() for t in targets[:count]],
               "times": {p: S.tolist() for p, S in placed.items()},
               "errors": errors, "compare_window": windows, "product": "coordinatewise"},
    )


# hypercyclic vector on omega, offset by offset -----------------------------------


@dataclass
class RegimeReport:
    regimes: dict[int, str]
    last_logs: dict[int, float]
    times: list[int]

    @property
    def ambiguous(self) -> list[int]:
        return [l for l, r in self.regimes.items() if r == "ambiguous"]

    def to_json(self) -> dict:
        return {"regimes": self.regimes, "last_logs": self.last_logs, "times": self.times,
                "ambiguous": self.ambiguous}


def classify_regimes(w: WeightSeq, p: int, times: np.ndarray, big: float = math.log(1e8), small: float = math.log(1e3)) -> RegimeReport:
    """Label each offset ``l <= p`` by the behaviour of ``log(w_{l+1} ... w_{n_k+l})`` on the last third of ``n_k``.

    ``A1``: every value above ``big``; ``A2``: every value below ``-big``;
    ``A3``: every value within ``small`` of 0 with spread below ``log 2``;
    anything else is ``ambiguous``.
    """
    third = times[-max(2, math.ceil(times.size / 3)) :]
    regimes, last = {}, {}
    for l in range(p + 1):
        L = w.log_prod(l + 1, third + l)
        last[l] = float(L[-1])
        if L.min() > big:
            regimes[l] = "A1"
        elif L.max() < -big:
            regimes[l] = "A2"
        elif np.abs(L).max() <= small and L.max() - L.min() < math.log(2.0):
            regimes[l] = "A3"
        else:
            regimes[l] = "ambiguous"
    return RegimeReport(regimes, last, [int(n) for n in times])


def build_omega_hc_mixed(
    u_target: TruncatedSeq,
    v_target: TruncatedSeq,
    w: WeightSeq,
    horizon: int | None = None,
    seed: int = 0,
    P: Poly | None = None,
    alpha: Sequence[complex] | None = None,
    beta: Sequence[complex] | None = None,
    z: Sequence[Sequence[complex]] | None = None,
    tol: float = 1e-3,
) -> Witness:
    """``x = u + sum_k y(k)`` with the block ``y(k)`` at ``n_k = (p+1)(k+1)`` chosen per offset regime.

    ``P`` (default ``z + z**2``) fixes ``m0 = min deg`` and ``m1 = max deg``.
    Offsets in ``A1`` get ``v_l**(1/m0) / (alpha(k) W)**(1/m0)``, offsets in
    ``A2`` get ``v_l**(1/m1) / (beta(k) W)**(1/m1)`` and the rest get
    ``z_l(k)``.  The scalars are drawn from a seeded dense enumeration unless
    supplied.  Coordinates ``0..p`` of ``B^{n_k} P(x)`` are predicted exactly
    and compared with the leading term of their regime.
    """
    P = Poly({1: 1.0, 2: 1.0}) if P is None else P
    H = min(w.horizon, max(u_target.horizon, v_target.horizon)) if horizon is None else int(horizon)
    if H > w.horizon:
        raise HorizonError("horizon beyond the weight table")
    p = max(support_max(u_target, v_target), 0)
    times = np.arange(p + 1, H - p + 1, p + 1, dtype=np.int64)
    if times.size < 3:
        raise HorizonError("too few block positions inside the horizon")
    K = times.size
    rep = classify_regimes(w, p, times)
    degs = [sum(a) for a in P.support]
    m0, m1 = min(degs), max(degs)
    alpha = np.asarray(alpha if alpha is not None else [s[0] for s in dense_scalars(K, 1, seed, True)], dtype=complex)
    beta = np.asarray(beta if beta is not None else [s[0] for s in dense_scalars(K, 1, seed + 1, True)], dtype=complex)
    zs = np.asarray(z if z is not None else dense_scalars(K, p + 1, seed + 2), dtype=complex)
    if alpha.size < K or beta.size < K or zs.shape[0] < K:
        raise SpecError(f"need {K} values of alpha, beta and z")
    if np.any(alpha[:K] == 0) or np.any(beta[:K] == 0):
        raise SpecError("alpha and beta must be nonzero")
    v = np.array([v_target.coeff(l) for l in range(p + 1)], dtype=complex)
    vals = {}
    for k, n in enumerate(times):
        for l in range(p + 1):
            r = rep.regimes[l]
            logW = w.log_prod(l + 1, int(n) + l)
            if r == "A1":
                deg, s = m0, alpha[k]
            elif r == "A2":
                deg, s = m1, beta[k]
            else:
                vals[int(n) + l] = complex(zs[k][l])
                continue
            if v[l] == 0:
                continue
            la, ph = principal_power(np.array([math.log(abs(v[l] / s))]), np.array([(v[l] / s) / abs(v[l] / s)]), 1.0 / deg)
            vals[int(n) + l] = complex(math.exp(la[0] - logW / deg) * ph[0])
    blocks = TruncatedSeq.from_values({i: c for i, c in vals.items() if c != 0}, H)
    x = u_target.with_horizon(H) + blocks

    predicted, windows, devs = {}, {}, {l: [] for l in range(p + 1)}
    for k, n in enumerate(times):
        coords = {}
        for l in range(p + 1):
            y = blocks.coeff(int(n) + l)
            logW = w.log_prod(l + 1, int(n) + l)
            val = sum(c * y ** m for (m,), c in P.terms.items())
            coords[l] = val * math.exp(logW) if val != 0 else 0j
            r = rep.regimes[l]
            if r == "A1":
                lead = P.coeff_of_degree(m0) * v[l] / alpha[k]
            elif r == "A2":
                lead = P.coeff_of_degree(m1) * v[l] / beta[k]
            else:
                lead = coords[l]
            devs[l].append(abs(coords[l] - lead))
        predicted[int(n)] = TruncatedSeq.from_values({l: c for l, c in coords.items() if c != 0}, H)
        windows[int(n)] = (0, p)
    checks = {"x in U": exact_entry(all(x.coeff(l) == u_target.coeff(l) for l in range(p + 1)))}
    for l, r in rep.regimes.items():
        if r in ("A1", "A2"):
            checks[f"l={l} ({r}) leading term dominates"] = exact_entry(_settles(devs[l], tol), f"last {devs[l][-1]:.3g}")
    inconclusive = [f"offset {l}: regime ambiguous at horizon {H}" for l in rep.ambiguous]
    return Witness(
        kind="omega-mixed",
        u=[x],
        N=None,
        params={"horizon": H, "seed": seed, "P": P.to_json(), "m0": m0, "m1": m1, "tol": tol, "weight": w.to_json()},
        predicted=predicted,
        checks=checks,
        inconclusive=inconclusive,
        extra={"regimes": rep.to_json(), "deviations": devs, "compare_window": windows,
               "alpha": alpha[:K].tolist(), "beta": beta[:K].tolist(), "product": "coordinatewise",
               "target": v_target},
    )


# N(r) on the block weight -----------------------------------------------------------


@dataclass
class NrReport:
    r: int
    N: int
    N_i: int
    per_s: dict[int, dict] = field(default_factory=dict)
    checked_i: int = 0
    checked_ii: int = 0
    violations: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"r": self.r, "N": self.N, "N_i": self.N_i, "per_s": self.per_s,
                "checked_i": self.checked_i, "checked_ii": self.checked_ii,
                "violations": self.violations[:20]}


def _first_suffix_below(vals: np.ndarray, bound: float) -> int | None:
    """Smallest position from which every later value is below ``bound``."""
    bad = np.nonzero(~(vals < bound))[0]
    if bad.size == 0:
        return 0
    if bad[-1] == vals.size - 1:
        return None
    return int(bad[-1]) + 1


def compute_Nr(r: int, w: WeightSeq, targets: Sequence[Target], fam: DensityFamily | None = None) -> NrReport:
    """``N(r) = max(N_i, N_0, M_{k0+1}, M_{k1})`` over ``s < r``, from log-domain scans.

    ``N_i`` makes ``|v_l(r) / (w_{l+1} ... w_{n+l})**(1/(m(r)+1))|**(1/m(r)) < 1/r``
    for every stored ``n >= N_i``.  For each ``s < r`` with
    ``alpha0 = min(1/m(r), 1/m(s))`` and ``C = max(1, |v(r)|, |v(s)|)``:
    ``N_0`` and ``k0`` bound ``C**2/W_n < 1/r`` and ``k1`` is the first block
    index from which ``w_{M_{k-1}+1} ... w_{M_{k+1}} C / W_{M_{k+1}}**alpha0 < 1/r``
    at every stored ``k``.  With a family the two inequalities of the lemma
    are re-checked on every stored pair ``(j, j')`` with ``j >= N(r)``.
    """
    if w.kind != "mk_weight":
        raise SpecError("N(r) is defined for the block weight")
    M = [int(v) for v in w.params["M"]]
    H = w.horizon
    r = int(r)
    if not 1 <= r <= len(targets):
        raise SpecError("r outside the target list")
    t = targets[r - 1]
    log_r = math.log(r)
    l, la, _ = t.arrays()
    ns = np.arange(1, H - r + 1, dtype=np.int64)
    if l.size:
        worst = np.max([(la[i] - w.log_prod(l[i] + 1, ns + l[i]) / (t.m + 1)) / t.m for i in range(l.size)], axis=0)
        pos = _first_suffix_below(worst, -log_r)
        if pos is None:
            raise HorizonError(f"condition (i) for r={r} unmet within horizon {H}")
        N_i = int(ns[pos])
    else:
        N_i = 1
    N = N_i
    per_s = {}
    logW = w.logW(np.arange(0, H + 1))
    for s in range(1, r):
        ts = targets[s - 1]
        a0 = min(1.0 / t.m, 1.0 / ts.m)
        logC = max(0.0, t.log_max(), ts.log_max())
        pos = _first_suffix_below(2 * logC - logW[1:], -log_r)
        if pos is None:
            raise HorizonError(f"N_0 for r={r}, s={s} beyond horizon {H}")
        N0 = pos + 1
        k0 = next((k for k, Mk in enumerate(M, start=1) if Mk >= N0), None)
        if k0 is None or k0 + 1 > len(M):
            raise HorizonError(f"M_(k0+1) for r={r}, s={s} not available")
        ks = list(range(2, len(M)))
        vals = np.array([w.log_prod(M[k - 2] + 1, M[k]) + logC - a0 * logW[M[k]] for k in ks])
        pos = _first_suffix_below(vals, -log_r)
        if pos is None:
            raise HorizonError(f"k1 for r={r}, s={s} not reached by M_{len(M)}")
        k1 = ks[pos]
        Ns = max(N0, M[k0], M[k1 - 1])
        per_s[s] = {"alpha0": a0, "logC": logC, "N0": N0, "k0": k0, "k1": k1, "N": Ns}
        N = max(N, Ns)
    rep = NrReport(r, int(N), N_i, per_s, checked_i=int(ns.size))
    if fam is not None and r >= 2:
        _recheck_ii(rep, w, targets, fam)
    return rep


def _recheck_ii(rep: NrReport, w: WeightSeq, targets: Sequence[Target], fam: DensityFamily) -> None:
    r, H = rep.r, w.horizon
    t = targets[r - 1]
    A_r = fam.sets[r - 1]
    A_r = A_r[(A_r >= rep.N) & (A_r + r <= H)]
    bound = -math.log(r)
    count = 0
    for s in range(1, r):
        ts = targets[s - 1]
        a0 = min(1.0 / t.m, 1.0 / ts.m)
        alphas = sorted({a0, *(a for a in _ALPHA_SAMPLES if a >= a0)})
        A_s = fam.sets[s - 1]
        A_s = A_s[A_s + r <= H]
        if A_r.size == 0 or A_s.size == 0:
            continue
        jj, jp = np.meshgrid(A_r, A_s, indexing="ij")
        jj, jp = jj.ravel(), jp.ravel()
        for l in range(r + 1):
            for tgt, big, small in ((t, jj, jp), (ts, jp, jj)):
                sel = big > small
                if not np.any(sel):
                    continue
                b, sm = big[sel], small[sel]
                lv = tgt.arrays()
                la_l = dict(zip(lv[0].tolist(), lv[1].tolist())).get(l, NEG_INF)
                if la_l == NEG_INF:
                    continue
                num = w.log_prod(l + (b - sm) + 1, b + l)
                den = w.log_prod(l + 1, b + l)
                for a in alphas:
                    val = num + a * la_l - a * den
                    count += val.size
                    bad = np.nonzero(~(val < bound))[0]
                    for i in bad[:5]:
                        rep.violations.append({"s": s, "l": l, "alpha": a, "j": int(b[i]), "j_prime": int(sm[i]),
                                               "log_value": float(val[i])})
    rep.checked_ii = count


# frequently hypercyclic algebra on c0 ----------------------------------------------


def _log_window(w: WeightSeq, s0: int, n: int) -> float:
    """``log`` of the product of ``n`` weights from ``s0``, continuing with ``w_H`` past the horizon."""
    H = w.horizon
    s0 = max(1, int(s0))
    if s0 > H:
        return n * float(w.log_w(H))
    end = s0 + n - 1
    if end <= H:
        return float(w.log_prod(s0, end))
    return float(w.log_prod(s0, H)) + (end - H) * float(w.log_w(H))


def build_c0_fhc(
    targets: Sequence[Target],
    fam: DensityFamily,
    w: WeightSeq,
    count: int | None = None,
) -> Witness:
    """``u = sum_p u(p)`` with ``u(p)`` built on ``B(p)``, every ``N(p)``-th element of ``A(p)``.

    For every stored ``n`` in ``B(p)`` the three families of inequalities are
    tested as ``value + tail < 1/p`` in the sup norm:
    ``B^n u(p)**m(p)`` near ``v(p)``, ``B^n u(p)**(m(p)+1)`` small, and
    ``B^n u(q)**m(p)`` small for every other constructed ``q``.  Checking the
    single exponent is enough because every coordinate of ``u(q)`` is below 1
    in modulus, so the moduli decrease with the exponent.  Tails cover the
    elements of ``B(q)`` past the horizon using ``w >= 1`` and a
    non-increasing continuation of ``w``.
    """
    H = w.horizon
    count = min(len(targets), fam.count) if count is None else min(int(count), len(targets), fam.count)
    per_p, parts, Bs = {}, {}, {}
    inconclusive = []
    for p in range(1, count + 1):
        try:
            nr = compute_Nr(p, w, targets, fam)
        except HorizonError as exc:
            per_p[p] = {"status": "inconclusive", "reason": str(exc)}
            inconclusive.append(f"p={p}: {exc}")
            continue
        B = thin_separate(fam.sets[p - 1], nr.N)
        B = B[B + p <= H]
        per_p[p] = {"N": nr.N, "Nr": nr.to_json(), "B": B.tolist()}
        if B.size == 0:
            per_p[p].update(status="inconclusive", reason="no element of B(p) inside the horizon")
            inconclusive.append(f"p={p}: no element of B(p) inside the horizon {H}")
            continue
        if nr.violations:
            per_p[p].update(status="fail", reason="lemma inequality violated on a stored pair")
        Bs[p] = B
        parts[p] = _blocks(B, targets[p - 1], targets[p - 1].m, w, H)
    u = TruncatedSeq.zeros(H)
    for x in parts.values():
        u = u + x

    checks: dict = {}
    predicted: dict = {}
    tails: dict = {}

    def lp(a, b):
        return float(w.log_prod(a, min(b, H))) if b > H else float(w.log_prod(a, b))

    for p, B in Bs.items():
        t = targets[p - 1]
        l, la, _ = t.arrays()
        bound = 1.0 / p
        a_p = H - p + 1
        # u(p) itself
        tail_u = max((math.exp((la[i] - lp(l[i] + 1, a_p + l[i])) / t.m) for i in range(l.size)), default=0.0)
        norm_u = float(np.exp(parts[p].logabs).max()) if parts[p].nnz else 0.0
        checks[f"p={p} ||u(p)|| < 1/p"] = check_entry(norm_u, bound, tail_u)
        if l.size and not norm_u + tail_u < 1.0:
            inconclusive.append(f"p={p}: coordinates of u(p) not below 1, single-exponent reduction unavailable")
        worst = {"5.1": 0.0, "5.2": 0.0, "5.3": 0.0}
        ok = {"5.1": True, "5.2": True, "5.3": True}
        for n in B:
            n = int(n)
            # first inequality
            pred = shifted_block_power(B, t, t.m, t.m, n, w, H)
            label = ("5.1", p, n)
            predicted[label] = pred
            diff = pred - t.seq(H)
            val = float(np.exp(diff.logabs).max()) if diff.nnz else 0.0
            tail = max((math.exp(la[i] - lp(l[i] + 1, (a_p - n) + l[i])) for i in range(l.size)), default=0.0)
            tails[label] = tail
            worst["5.1"] = max(worst["5.1"], val + tail)
            ok["5.1"] &= val + tail < bound
            # second inequality at m = m(p) + 1
            m = t.m + 1
            a = m / t.m
            pred = shifted_block_power(B, t, t.m, m, n, w, H)
            label = ("5.2", p, n, m)
            predicted[label] = pred
            val = float(np.exp(pred.logabs).max()) if pred.nnz else 0.0
            tail = max(
                (math.exp(a * la[i] - lp(l[i] + 1, (a_p - n) + l[i]) - (a - 1) * lp(l[i] + 1, a_p + l[i])) for i in range(l.size)),
                default=0.0,
            )
            tails[label] = tail
            worst["5.2"] = max(worst["5.2"], val + tail)
            ok["5.2"] &= val + tail < bound
            # third inequality against every other constructed q
            for q, Bq in Bs.items():
                if q == p:
                    continue
                tq = targets[q - 1]
                lq, laq, _ = tq.arrays()
                alpha = t.m / tq.m
                pred = shifted_block_power(Bq, tq, tq.m, t.m, n, w, H)
                label = ("5.3", p, q, n)
                predicted[label] = pred
                val = float(np.exp(pred.logabs).max()) if pred.nnz else 0.0
                a_q = H - q
                tail = max(
                    (
                        math.exp(alpha * laq[i] + _log_window(w, a_q - n + lq[i] + 2, n) - alpha * lp(lq[i] + 1, a_q + lq[i]))
                        for i in range(lq.size)
                    ),
                    default=0.0,
                )
                tails[label] = tail
                worst["5.3"] = max(worst["5.3"], val + tail)
                ok["5.3"] &= val + tail < bound
        for key in ("5.1", "5.2", "5.3"):
            checks[f"p={p} ({key}) over B(p)"] = {"value": worst[key], "tail": 0.0, "bound": bound, "pass": bool(ok[key]),
                                                  "note": "value includes the tail bound"}
        per_p[p].setdefault("status", "pass" if all(ok.values()) else "fail")
        missing = [q for q in range(1, count + 1) if q not in Bs and q != p]
        if missing:
            per_p[p]["unchecked_q"] = missing
        if per_p[p].get("status") == "fail" and "reason" in per_p[p]:
            checks[f"p={p} lemma re-check"] = exact_entry(False, per_p[p]["reason"])

    def tail_fn(steps: int, label=None) -> float:
        return tails.get(label, math.inf)

    return Witness(
        kind="c0-fhc",
        u=[u],
        N=None,
        params={"count": count, "horizon": H, "weight": w.to_json()},
        predicted=predicted,
        checks=checks,
        inconclusive=inconclusive,
        extra={"per_p": per_p, "targets": [t.to_json() for t in targets[:count]],
               "parts": {p: x for p, x in parts.items()}, "product": "coordinatewise"},
        tail_fn=tail_fn,
    )
