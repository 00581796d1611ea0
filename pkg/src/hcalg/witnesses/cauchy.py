"""Witnesses for weighted shifts under the Cauchy product.

Here supports move right when multiplying, so the construction arranges a
shift count ``N`` that sends every monomial other than the lexicographic
maximum ``u^beta`` to exactly zero, while ``B^N(u^beta)`` lands on ``y`` plus a
single small residual term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..errors import HorizonError, SpecError
from ..logmath import NEG_INF, safe_exp
from ..seq import TruncatedSeq
from ..shifts import WeightSeq, check_gamma_condition
from ..spaces import SpaceSpec, log_seminorm
from .base import Witness, check_entry, exact_entry, support_max
from .coordwise import _normalise_A


def lex_max(A: Iterable) -> tuple[int, ...]:
    return max(_normalise_A(A))


def choose_shift_amounts(A: Iterable, beta: Sequence[int], p: int) -> list[int]:
    """Integers ``s_i > 4p`` with ``sum_i (beta_i - alpha_i) s_i > 3p`` for ``alpha != beta``.

    Backward induction from the last coordinate: ``s_i`` is the least value
    beating ``3p`` against every ``alpha_i < beta_i`` taken from the projection
    of ``A`` on coordinate ``i``, assuming the later coordinates are as
    unfavourable as their projections allow.

    >>> choose_shift_amounts([1, 2], (2,), 1)
    [5]
    """
    A = _normalise_A(A)
    beta = tuple(int(b) for b in beta)
    if beta != max(A):
        raise SpecError("beta must be the lexicographic maximum of A")
    d = len(beta)
    proj = [sorted({a[i] for a in A}) for i in range(d)]
    s = [0] * d
    for i in range(d - 1, -1, -1):
        rest = sum((beta[t] - proj[t][-1]) * s[t] for t in range(i + 1, d))
        lower = [a for a in proj[i] if a < beta[i]]
        si = 4 * p + 1
        if lower:
            gap = beta[i] - max(lower)
            si = max(si, (3 * p - rest) // gap + 1)
        s[i] = int(si)
    return s


@dataclass
class WitnessSpecCauchy:
    """Inputs of the Cauchy witness after normalisation.

    ``lead`` is the first coordinate where ``beta`` is positive; coordinates
    before it never occur in ``A`` and are left untouched.
    """

    A: list[tuple[int, ...]]
    beta: tuple[int, ...]
    x: list[TruncatedSeq]
    y: TruncatedSeq
    p: int
    s: list[int]
    lead: int
    log_eta: dict[int, float]
    r: float = 1.0
    delta: float = 0.1
    padded: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def m(self) -> int:
        return self.beta[self.lead]

    @property
    def rho(self) -> int:
        return sum(self.beta[i] * self.s[i] for i in range(self.lead + 1, len(self.beta)))

    @property
    def J_min(self) -> int:
        return max(self.s[self.lead], 5 * self.p + 1)


def prepare_cauchy(
    A: Iterable,
    x: Sequence[TruncatedSeq],
    y: TruncatedSeq,
    space: SpaceSpec,
    r: float = 1.0,
    delta: float = 0.1,
) -> WitnessSpecCauchy:
    """Lexicographic maximum, the padded ``p``, the ``s_i`` and ``eta_i = delta / (2 ||e_{s_i}||_r)``.

    ``p`` is the largest index carrying data in ``y`` or any ``x_i``, raised to
    at least 1.
    """
    A = _normalise_A(A)
    d = len(A[0])
    if len(x) != d:
        raise SpecError("need one x per variable")
    if space.bilateral or y.bilateral:
        raise SpecError("the Cauchy product lives on unilateral sequences")
    beta = max(A)
    lead = next(i for i, b in enumerate(beta) if b > 0)
    raw_p = max(support_max(y, *x), 0)
    p = max(raw_p, 1)
    notes = []
    if raw_p == 0:
        notes.append("p = 0 padded to p = 1")
    s_sub = choose_shift_amounts([a[lead:] for a in A], beta[lead:], p)
    s = [0] * lead + s_sub
    log_eta = {}
    for i in range(lead + 1, d):
        log_eta[i] = math.log(delta / 2.0) - float(space.log_basis_norm(s[i], r))
    return WitnessSpecCauchy(A, beta, list(x), y, p, s, lead, log_eta, r, delta, raw_p == 0, notes)


def _log_eta_beta(spec: WitnessSpecCauchy) -> float:
    return math.fsum(spec.beta[i] * le for i, le in spec.log_eta.items())


def cauchy_parameters(spec: WitnessSpecCauchy, w: WeightSeq, space: SpaceSpec, J: int) -> dict:
    """Log-domain ``epsilon``, ``d_j``, ``N`` and the residual for a given ``J``."""
    m, p, rho, r = spec.m, spec.p, spec.rho, spec.r
    y = spec.y
    ls = np.arange(p + 1)
    yla = np.full(p + 1, NEG_INF)
    yph = np.ones(p + 1, dtype=complex)
    yla[y.idx] = y.logabs
    yph[y.idx] = y.phase
    lEb = _log_eta_beta(spec)
    if m >= 2:
        N = m * J - 3 * p + rho
        first = np.max(space.log_basis_norm(J - 3 * p + ls, r) - w.logW(N + ls)) / (2 * (m - 1))
        second = 0.5 * min(-float(space.log_basis_norm(J, r)), -float(w.logW(m * J + rho)) / m)
        log_eps = float(first + second)
        log_d = w.logW(ls) + yla - lEb - math.log(m) - (m - 1) * log_eps - w.logW(N + ls)
        pos = J - 3 * p + ls
        log_res = m * log_eps + lEb + float(w.logW(m * J + rho)) - float(w.logW(3 * p))
        res_index = 3 * p
    else:
        N = J + rho
        log_eps = NEG_INF
        log_d = yla + w.logW(ls) - lEb - w.logW(N + ls)
        pos = J + ls
        log_res, res_index = NEG_INF, None
    return {
        "J": int(J),
        "N": int(N),
        "log_eps": log_eps,
        "log_d": log_d,
        "phase_d": yph,
        "pos": pos,
        "log_residual": log_res,
        "residual_index": res_index,
    }


def _perturbation(spec, prm, H) -> TruncatedSeq:
    keep = prm["log_d"] > NEG_INF
    idx = list(prm["pos"][keep])
    la = list(prm["log_d"][keep])
    ph = list(prm["phase_d"][keep])
    if prm["log_eps"] > NEG_INF:
        idx.append(prm["J"])
        la.append(prm["log_eps"])
        ph.append(1.0 + 0j)
    return TruncatedSeq.from_log(np.array(idx, dtype=np.int64), np.array(la), np.array(ph), H)


def _required_horizon(spec, u_max: list[int]) -> int:
    return max(sum(a * mx for a, mx in zip(alpha, u_max)) for alpha in spec.A)


def build_cauchy_witness(spec: WitnessSpecCauchy, w: WeightSeq, space: SpaceSpec, J: int) -> Witness:
    """The witness for a fixed ``J``.

    With ``m = beta_lead``: for ``m >= 2``, ``u_lead = x_lead + sum_j d_j e_{J-3p+j} + eps e_J``
    and ``N = mJ - 3p + rho``; for ``m = 1``, ``u_lead = x_lead + sum_j d_j e_{J+j}``
    and ``N = J + rho``.  The later coordinates are ``u_i = x_i + eta_i e_{s_i}``.
    Every ``u^alpha`` with ``alpha != beta`` has support below ``N``, and
    ``B^N(u^beta) = y + residual`` where the residual is a single multiple of
    ``e_{3p}`` (zero when ``m = 1``).
    """
    if J < spec.J_min:
        raise SpecError(f"J = {J} is below the separation threshold {spec.J_min}")
    prm = cauchy_parameters(spec, w, space, J)
    d = len(spec.beta)
    supp = [support_max(xi) for xi in spec.x]
    pert_max = J if spec.m >= 2 else J + spec.p
    u_max = []
    for i in range(d):
        if i == spec.lead:
            u_max.append(max(supp[i], pert_max))
        elif i > spec.lead:
            u_max.append(max(supp[i], spec.s[i]))
        else:
            u_max.append(max(supp[i], 0))
    H = max(_required_horizon(spec, u_max), prm["N"] + spec.p, spec.y.horizon)
    if H > w.horizon:
        raise HorizonError(f"weight known up to {w.horizon}, witness needs {H}")
    x = [xi.with_horizon(H) for xi in spec.x]
    y = spec.y.with_horizon(H)
    u = []
    for i in range(d):
        if i == spec.lead:
            u.append(x[i] + _perturbation(spec, prm, H))
        elif i > spec.lead:
            bump = TruncatedSeq(np.array([spec.s[i]]), np.array([spec.log_eta[i]]), np.array([1.0 + 0j]), H)
            u.append(x[i] + bump)
        else:
            u.append(x[i])
    N = prm["N"]
    predicted, checks = {}, {}
    for alpha in spec.A:
        if alpha == spec.beta:
            continue
        bound = sum(a * mx for a, mx in zip(alpha, u_max))
        predicted[alpha] = TruncatedSeq.zeros(H)
        checks[f"alpha={alpha} support below N"] = exact_entry(bound < N, f"max supp <= {bound}, N = {N}")
    if prm["residual_index"] is not None:
        res = TruncatedSeq(np.array([prm["residual_index"]]), np.array([prm["log_residual"]]), np.array([1.0 + 0j]), H)
    else:
        res = TruncatedSeq.zeros(H)
    predicted[spec.beta] = y + res
    r = spec.r
    pert = u[spec.lead] - x[spec.lead]
    lead_norm = safe_exp(log_seminorm(pert, space, r))
    checks["u_lead in U"] = check_entry(lead_norm, spec.delta)
    for i, le in spec.log_eta.items():
        checks[f"u_{i + 1} in U"] = check_entry(safe_exp(le + float(space.log_basis_norm(spec.s[i], r))), spec.delta)
    res_norm = safe_exp(log_seminorm(res, space, r))
    checks["beta residual in V"] = check_entry(res_norm, spec.delta)
    return Witness(
        kind="cauchy",
        u=u,
        N=N,
        params={
            "A": [list(a) for a in spec.A],
            "beta": list(spec.beta),
            "m": spec.m,
            "p": spec.p,
            "p_padded": spec.padded,
            "s": list(spec.s),
            "rho": spec.rho,
            "lead": spec.lead,
            "log_eta": {str(i + 1): v for i, v in spec.log_eta.items()},
            "J": int(J),
            "log_eps": prm["log_eps"],
            "r": r,
            "delta": spec.delta,
            "branch": "m>=2" if spec.m >= 2 else "m=1",
            "space": space.to_json(),
            "weight": w.to_json(),
        },
        predicted=predicted,
        checks=checks,
        inconclusive=[],
        extra={
            "target": y,
            "x": x,
            "residual": res,
            "residual_norm": res_norm,
            "log_residual": prm["log_residual"],
            "product": "cauchy",
            "notes": list(spec.notes),
        },
    )


def gamma_candidates(spec: WitnessSpecCauchy, w: WeightSeq, space: SpaceSpec, horizon: int) -> list[int]:
    """``J`` values derived from the record-minimum subsequence of ``||e_n|| / (w_1 ... w_n)``.

    Each ``m_k`` of the subsequence gives the unique ``J`` with
    ``m_k - m < mJ - 2p + rho <= m_k``.
    """
    rep = check_gamma_condition(w, space, 1.0, [0], horizon, q=spec.r)
    m, p, rho = spec.m, spec.p, spec.rho
    out = []
    for mk in rep.offsets[0]["subsequence"]:
        if m >= 2:
            J = (mk + 2 * p - rho) // m
        else:
            J = mk - rho
        if J >= spec.J_min:
            out.append(int(J))
    return sorted(set(out))


def search_cauchy_witness(
    A: Iterable,
    x: Sequence[TruncatedSeq],
    y: TruncatedSeq,
    w: WeightSeq,
    space: SpaceSpec,
    r: float = 1.0,
    delta: float = 0.1,
    residual_tol: float = 1e-3,
    samples: int = 3,
    sample_step: int | None = None,
) -> Witness:
    """First ``J`` from the gamma subsequence with a residual below ``residual_tol``.

    ``samples`` further witnesses at ``J, J + step, ...`` are recorded so the
    decay of the residual can be inspected.
    """
    spec = prepare_cauchy(A, x, y, space, r, delta)
    m, p, rho = spec.m, spec.p, spec.rho
    limit = (w.horizon - rho - p) // max(m, 1)
    cands = gamma_candidates(spec, w, space, min(w.horizon, m * limit + rho))
    chosen = None
    for J in cands:
        if J > limit:
            break
        wit = build_cauchy_witness(spec, w, space, J)
        if wit.status == "pass" and wit.extra["residual_norm"] < residual_tol:
            chosen = wit
            break
    if chosen is None:
        raise HorizonError(f"no J <= {limit} meets the residual tolerance {residual_tol}")
    step = sample_step or max(1, spec.p)
    trail = []
    for k in range(samples):
        J = chosen.params["J"] + k * step
        if J > limit:
            chosen.inconclusive.append(f"residual sample at J={J} beyond the horizon")
            break
        wk = chosen if k == 0 else build_cauchy_witness(spec, w, space, J)
        trail.append({"J": J, "N": wk.N, "residual": wk.extra["residual_norm"]})
    vals = [t["residual"] for t in trail]
    non_increasing = all(b <= a for a, b in zip(vals, vals[1:]))
    chosen.extra["residual_samples"] = trail
    chosen.checks["residual non-increasing over samples"] = exact_entry(non_increasing)
    chosen.checks["residual below tolerance"] = check_entry(chosen.extra["residual_norm"], residual_tol)
    chosen.params["residual_tol"] = residual_tol
    return chosen
