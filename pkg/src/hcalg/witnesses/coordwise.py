"""Witnesses for weighted shifts under the coordinatewise product.

The unilateral construction places a scaled copy of the target ``y`` far out,
with exponents ``kappa_j`` chosen so that exactly one monomial ``u^beta`` is
brought back to ``y`` and every other monomial is damped.  The bilateral
variant additionally tracks what the shift drags to negative indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import BudgetExhausted, HorizonError, SpecError
from ..logmath import principal_power
from ..seq import TruncatedSeq
from ..shifts import WeightSeq
from ..spaces import SpaceSpec, f_norm
from .base import Witness, check_entry, exact_entry, support_max


def _normalise_A(A: Iterable) -> list[tuple[int, ...]]:
    out = []
    for a in A:
        t = (int(a),) if isinstance(a, (int, np.integer)) else tuple(int(v) for v in a)
        if any(v < 0 for v in t) or not any(t):
            raise SpecError(f"multi-index {t} must be nonzero with nonnegative entries")
        out.append(t)
    if not out:
        raise SpecError("A must be nonempty")
    d = len(out[0])
    if any(len(t) != d for t in out):
        raise SpecError("multi-indices of different lengths")
    return sorted(set(out))


@dataclass(frozen=True)
class KappaBeta:
    kappa: tuple[float, ...]
    beta: tuple[int, ...]
    attempts: int
    relative_gap: float

    def L(self, alpha: Sequence[int]) -> float:
        """``L_alpha(kappa) = sum_j alpha_j kappa_j``, exactly 1 at ``beta``."""
        if tuple(alpha) == self.beta:
            return 1.0
        return math.fsum(a * k for a, k in zip(alpha, self.kappa))

    def to_json(self) -> dict:
        return {
            "kappa": list(self.kappa),
            "beta": list(self.beta),
            "attempts": self.attempts,
            "relative_gap": self.relative_gap,
        }


def select_kappa_beta(
    A: Iterable,
    seed: int = 0,
    kappa0: Sequence[float] | None = None,
    min_gap: float = 0.1,
    budget: int = 1000,
) -> KappaBeta:
    """Pick positive ``kappa`` and ``beta`` in ``A`` with ``L_beta = 1 < L_alpha``.

    Directions ``kappa0`` are drawn uniformly from ``[0.5, 2]**d`` until the
    minimiser of ``L_alpha(kappa0)`` is unique with a relative gap of at least
    ``min_gap``; then ``kappa = kappa0 / L_beta(kappa0)``.  A fixed ``kappa0``
    may be supplied, in which case only uniqueness is required.

    >>> select_kappa_beta([1, 2, 3]).kappa
    (1.0,)
    """
    A = _normalise_A(A)
    d = len(A[0])
    rng = np.random.default_rng(seed)

    def evaluate(k0):
        L = np.array([math.fsum(a * k for a, k in zip(alpha, k0)) for alpha in A])
        order = np.argsort(L, kind="stable")
        best = int(order[0])
        gap = math.inf if len(A) == 1 else float((L[order[1]] - L[best]) / L[best])
        return best, gap, L[best]

    if kappa0 is not None:
        k0 = np.asarray(kappa0, dtype=float)
        if k0.shape != (d,) or np.any(k0 <= 0):
            raise SpecError("kappa0 must be a positive vector of length d")
        best, gap, Lb = evaluate(k0)
        if not gap > 0:
            raise SpecError("kappa0 does not single out a unique minimiser")
        return KappaBeta(tuple(float(v) for v in k0 / Lb), A[best], 0, gap)
    if d == 1:
        best, gap, Lb = evaluate(np.ones(1))
        return KappaBeta((1.0 / Lb,), A[best], 0, gap)
    for attempt in range(1, budget + 1):
        k0 = rng.uniform(0.5, 2.0, size=d)
        best, gap, Lb = evaluate(k0)
        if gap >= min_gap:
            return KappaBeta(tuple(float(v) for v in k0 / Lb), A[best], attempt, gap)
    raise BudgetExhausted(f"no direction with relative gap {min_gap} in {budget} draws")


@dataclass
class WitnessSpecCoord:
    """Inputs of the unilateral coordinatewise witness."""

    A: list[tuple[int, ...]]
    x: list[TruncatedSeq]
    y: TruncatedSeq
    n_k: int
    kb: KappaBeta

    def __post_init__(self):
        self.A = _normalise_A(self.A)
        if self.kb.beta not in self.A:
            raise SpecError("beta must belong to A")
        if len(self.x) != len(self.A[0]):
            raise SpecError("need one x per variable")
        for alpha in self.A:
            if alpha != self.kb.beta and not self.kb.L(alpha) > 1.0:
                raise SpecError(f"L_alpha(kappa) <= 1 for alpha={alpha}")


def _block(y: TruncatedSeq, w: WeightSeq, n: int, exponent: float, horizon: int, bilateral=False) -> TruncatedSeq:
    """``sum_l y_l**e (w_{l+1} ... w_{n+l})**-e e_{n+l}`` over the support of ``y``."""
    l = y.idx
    logW = w.log_prod(l + 1, n + l) if l.size else np.zeros(0)
    la, ph = principal_power(y.logabs, y.phase, exponent)
    return TruncatedSeq(l + n, la - exponent * logW, ph, horizon, bilateral)


def _back(y: TruncatedSeq, w: WeightSeq, n: int, L: float, horizon: int, bilateral=False) -> TruncatedSeq:
    """``sum_l y_l**L (w_{l+1} ... w_{n+l})**(1-L) e_l``."""
    l = y.idx
    logW = w.log_prod(l + 1, n + l) if l.size else np.zeros(0)
    la, ph = principal_power(y.logabs, y.phase, L)
    return TruncatedSeq(l, la + (1.0 - L) * logW, ph, horizon, bilateral)


def build_coordwise_witness(
    spec: WitnessSpecCoord,
    w: WeightSeq,
    space: SpaceSpec,
    delta: float = 0.1,
    w_radius: float = 1e-6,
) -> Witness:
    """``u_j = x_j + sum_l y_l**kappa_j (w_{l+1} ... w_{n+l})**-kappa_j e_{n+l}``.

    The prediction for every ``alpha`` in ``A`` is
    ``B^n(u^alpha) = sum_l y_l**L_alpha (w_{l+1} ... w_{n+l})**(1 - L_alpha) e_l``,
    which is ``y`` itself for ``alpha = beta``.
    """
    x, y, n, kb = spec.x, spec.y, int(spec.n_k), spec.kb
    H = y.horizon
    if space.bilateral or y.bilateral:
        raise SpecError("use the bilateral construction for sequences on Z")
    p = support_max(y)
    if n <= support_max(*x):
        raise SpecError(f"n_k = {n} does not clear the support of x")
    if n + max(p, 0) > min(H, w.horizon):
        raise HorizonError(f"n_k + p = {n + p} exceeds the horizon")
    u = [xj + _block(y, w, n, kj, H) for xj, kj in zip(x, kb.kappa)]
    predicted = {alpha: _back(y, w, n, kb.L(alpha), H) for alpha in spec.A}
    checks = {"n_k clears supp(x)": exact_entry(True)}
    for j, (uj, xj) in enumerate(zip(u, x)):
        checks[f"u_{j + 1} in U"] = check_entry(f_norm(uj - xj, space), delta)
    for alpha in spec.A:
        if alpha == kb.beta:
            continue
        checks[f"alpha={alpha} in W"] = check_entry(f_norm(predicted[alpha], space), w_radius)
    return Witness(
        kind="coordwise",
        u=u,
        N=n,
        params={
            "A": [list(a) for a in spec.A],
            "kappa": list(kb.kappa),
            "beta": list(kb.beta),
            "n_k": n,
            "delta": delta,
            "w_radius": w_radius,
            "branch": "principal",
            "space": space.to_json(),
            "weight": w.to_json(),
        },
        predicted=predicted,
        checks=checks,
        extra={"target": y, "x": list(x), "product": "coordinatewise"},
    )


def _quick_norms(y: TruncatedSeq, w: WeightSeq, n: int, kb: KappaBeta, A, space: SpaceSpec) -> tuple[float, float]:
    """Largest F-norm among the damped monomials and among the perturbations."""
    worst_alpha = 0.0
    for alpha in A:
        if alpha != kb.beta:
            worst_alpha = max(worst_alpha, f_norm(_back(y, w, n, kb.L(alpha), y.horizon), space))
    worst_u = max(f_norm(_block(y, w, n, k, y.horizon), space) for k in kb.kappa)
    return worst_alpha, worst_u


def search_coordwise_witness(
    A: Iterable,
    x: Sequence[TruncatedSeq],
    y: TruncatedSeq,
    w: WeightSeq,
    space: SpaceSpec,
    seed: int = 0,
    delta: float = 0.1,
    w_radius: float = 1e-6,
    kappa0: Sequence[float] | None = None,
    n_max: int | None = None,
) -> Witness:
    """Select ``(kappa, beta)`` and return the witness at the first passing ``n_k``."""
    A = _normalise_A(A)
    kb = select_kappa_beta(A, seed=seed, kappa0=kappa0)
    p = max(support_max(y), 0)
    start = support_max(*x) + 1
    stop = min(y.horizon, w.horizon) - p if n_max is None else int(n_max)
    for n in range(max(start, 1), stop + 1):
        wa, wu = _quick_norms(y, w, n, kb, A, space)
        if wa < w_radius and wu < delta:
            wit = build_coordwise_witness(WitnessSpecCoord(A, list(x), y, n, kb), w, space, delta, w_radius)
            wit.params["seed"] = seed
            wit.extra["kappa_beta"] = kb.to_json()
            return wit
    raise HorizonError(f"no n_k <= {stop} brings every other monomial inside W")


def build_bilateral_witness(
    m0: int,
    m1: int,
    x: TruncatedSeq,
    y: TruncatedSeq,
    w: WeightSeq,
    n_k: int,
    space: SpaceSpec,
    delta: float = 0.1,
    w_radius: float = 1e-3,
) -> Witness:
    """``u = x + sum_{l=-p}^{p} y_l**(1/m0) (w_{l+1} ... w_{n+l})**(-1/m0) e_{n+l}`` on Z.

    For ``m0 <= m <= m1`` the prediction is the sum of the spill
    ``sum_i (w_{i-n+1} ... w_i) x_i**m e_{i-n}`` and
    ``sum_l y_l**(m/m0) (w_{l+1} ... w_{n+l})**(1-m/m0) e_l``.  The spill is
    stored separately in ``extra["spill"]``.
    """
    if not (x.bilateral and y.bilateral and space.bilateral and w.bilateral):
        raise SpecError("bilateral construction needs bilateral x, y, space and weight")
    if not 1 <= m0 < m1:
        raise SpecError("need 1 <= m0 < m1")
    H = y.horizon
    n = int(n_k)
    radius = max([abs(v) for v in x.support + y.support] or [0])
    p = max([abs(v) for v in y.support] or [0])
    if n <= radius + p:
        raise SpecError(f"n_k = {n} must exceed p + max|supp x| = {radius + p}")
    if n + p > min(H, w.horizon) or n + radius > min(H, w.neg):
        raise HorizonError("horizon too small for the block or for the spill")
    u = x + _block(y, w, n, 1.0 / m0, H, bilateral=True)
    predicted, spill = {}, {}
    checks = {"u in U": check_entry(f_norm(u - x, space), delta)}
    for m in range(m0, m1 + 1):
        i = x.idx
        la = m * x.logabs + w.log_prod(i - n + 1, i)
        sp = TruncatedSeq(i - n, la, x.phase**m, H, True)
        main = _back(y, w, n, m / m0, H, bilateral=True)
        spill[m] = sp
        predicted[(m,)] = sp + main
        if m == m0:
            checks[f"m={m} in V"] = check_entry(f_norm(sp, space), delta)
        else:
            checks[f"m={m} in W"] = check_entry(f_norm(predicted[(m,)], space), w_radius)
    return Witness(
        kind="bilateral",
        u=[u],
        N=n,
        params={"m0": m0, "m1": m1, "n_k": n, "delta": delta, "w_radius": w_radius, "branch": "principal"},
        predicted=predicted,
        checks=checks,
        extra={"spill": spill, "target": y, "x": [x], "product": "coordinatewise"},
    )

