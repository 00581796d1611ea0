"""Disjoint subsets of the positive integers with positive lower density.

All sets are stored as sorted ``int64`` arrays truncated at a horizon.
Separation properties are checked with exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import HorizonError, InconclusiveError, SpecError

#: kappa(C) counts as certified only if the clean stretch after it is at least
#: this fraction of the horizon
EVIDENCE_FRACTION = 0.5


def _as_array(A) -> np.ndarray:
    arr = np.asarray(list(A) if not isinstance(A, np.ndarray) else A, dtype=np.int64)
    if arr.ndim != 1:
        raise SpecError("sets must be one-dimensional")
    if arr.size > 1 and np.any(np.diff(arr) <= 0):
        raise SpecError("sets must be strictly increasing")
    return arr


def split_two(E) -> tuple[np.ndarray, np.ndarray]:
    """Split ``E = {n_1 < n_2 < ...}`` into two far-apart subsets of positive density.

    With ``u_k = k``, ``v_k = floor(sqrt k)``, ``M_1 = 1``, ``N_k = M_k + u_k``,
    ``P_k = N_k + v_k``, ``Q_k = P_k + u_k`` and ``M_{k+1} = Q_k + v_k``, the
    first set takes ``n_j`` for ``j`` in the union of ``[M_k, N_k)`` and the
    second for ``j`` in the union of ``[P_k, Q_k)``.

    >>> [list(s[:3]) for s in split_two(range(1, 30))]
    [[1, 5, 6], [3, 8, 9]]
    """
    E = _as_array(E)
    if E.size < 4:
        raise HorizonError("need at least four elements to split")
    size = E.size
    ia, ib = [], []
    M, k = 1, 1
    while M <= size:
        u, v = k, math.isqrt(k)
        N = M + u
        P = N + v
        Q = P + u
        ia.append(np.arange(M, min(N, size + 1)))
        if P <= size:
            ib.append(np.arange(P, min(Q, size + 1)))
        M = Q + v
        k += 1
    ja = np.concatenate(ia) - 1
    jb = np.concatenate(ib) - 1 if ib else np.zeros(0, dtype=np.int64)
    return E[ja], E[jb]


def thin_separate(A, a: int) -> np.ndarray:
    """Every ``a``-th element ``{n_a, n_2a, ...}`` of ``A`` (1-based)."""
    if a < 1 or int(a) != a:
        raise SpecError("thinning factor must be a positive integer")
    A = _as_array(A)
    return A[int(a) - 1 :: int(a)]


def counts_upto(A, horizon: int) -> np.ndarray:
    """``out[N] = card(A ∩ [1, N])`` for ``N = 0..horizon``."""
    A = _as_array(A)
    A = A[(A >= 1) & (A <= horizon)]
    hist = np.bincount(A, minlength=horizon + 1)
    return np.cumsum(hist)


def density_estimate(A, horizon: int, burn_in: int, mode: str = "lower") -> float:
    """Extreme value of ``card(A ∩ [1, N]) / N`` over ``N`` in ``[burn_in, horizon]``."""
    if not 1 <= burn_in < horizon:
        raise SpecError("need 1 <= burn_in < horizon")
    c = counts_upto(A, horizon)
    N = np.arange(burn_in, horizon + 1)
    ratio = c[burn_in:] / N
    if mode == "lower":
        return float(ratio.min())
    if mode == "upper":
        return float(ratio.max())
    raise SpecError(f"unknown mode {mode!r}")


# separation scans -------------------------------------------------------------------


def _merged(sets: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    vals = np.concatenate(sets) if sets else np.zeros(0, dtype=np.int64)
    labels = np.concatenate([np.full(len(s), p, dtype=np.int64) for p, s in enumerate(sets)]) if sets else vals
    order = np.argsort(vals, kind="stable")
    return vals[order], labels[order]


def scan_kappa(sets: Sequence, C: int) -> int:
    """Smallest ``kappa >= 1`` such that, for elements of different sets,
    ``max(n, n') >= kappa`` implies ``|n - n'| >= C`` (within the stored prefixes)."""
    sets = [_as_array(s) for s in sets]
    vals, labels = _merged(sets)
    kappa = 1
    t = 1
    while t < vals.size:
        gap = vals[t:] - vals[:-t]
        close = gap < C
        if not close.any():
            break
        bad = close & (labels[t:] != labels[:-t])
        if bad.any():
            kappa = max(kappa, int(vals[t:][bad].max()) + 1)
        t += 1
    return kappa


def gap_violations(sets: Sequence, a: Sequence[int], limit: int = 10) -> list[tuple[int, int, int, int]]:
    """Pairs breaking ``min A(p) >= a(p)`` or ``|n - n'| >= a(p) + a(q)``.

    Returned as ``(n, p, n', q)`` with 0-based set labels; ``n' = -1`` marks a
    minimum violation.
    """
    sets = [_as_array(s) for s in sets]
    a = np.asarray(a, dtype=np.int64)
    out = []
    for p, s in enumerate(sets):
        if s.size and s[0] < a[p]:
            out.append((int(s[0]), p, -1, p))
    vals, labels = _merged(sets)
    need_max = 2 * int(a.max()) if a.size else 0
    t = 1
    while t < vals.size and len(out) < limit:
        gap = vals[t:] - vals[:-t]
        if gap.min() >= need_max:
            break
        need = a[labels[t:]] + a[labels[:-t]]
        bad = np.nonzero(gap < need)[0]
        for i in bad[: limit - len(out)]:
            out.append((int(vals[i]), int(labels[i]), int(vals[i + t]), int(labels[i + t])))
        t += 1
    return out


# families ---------------------------------------------------------------------------


@dataclass
class DensityFamily:
    """Prefixes of disjoint sets ``A(1), A(2), ...`` up to ``horizon``."""

    sets: list[np.ndarray]
    horizon: int
    a: list[int] | None = None
    kappa_table: dict[int, int] = field(default_factory=dict)
    densities: list[float] = field(default_factory=list)
    burn_in: int = 1000
    thinning_factors: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sets = [_as_array(s) for s in self.sets]
        for s in self.sets:
            if s.size and (s[0] < 1 or s[-1] > self.horizon):
                raise SpecError("set elements must lie in [1, horizon]")
        if not self.densities:
            self.densities = self.lower_densities()

    @property
    def count(self) -> int:
        return len(self.sets)

    def lower_densities(self) -> list[float]:
        b = min(self.burn_in, max(1, self.horizon // 10))
        return [density_estimate(s, self.horizon, b, "lower") for s in self.sets]

    def kappa(self, C: int) -> int:
        if C not in self.kappa_table:
            self.kappa_table[int(C)] = scan_kappa(self.sets, int(C))
        return self.kappa_table[int(C)]

    def kappa_certified(self, C: int) -> bool:
        """Whether the clean stretch past ``kappa(C)`` covers enough of the horizon."""
        return self.kappa(C) <= (1.0 - EVIDENCE_FRACTION) * self.horizon

    def disjoint(self) -> bool:
        vals, _ = _merged(self.sets)
        return bool(vals.size < 2 or np.all(np.diff(vals) > 0))

    def to_json(self) -> dict:
        return {
            "a": list(self.a) if self.a is not None else None,
            "sets": [[int(v) for v in s] for s in self.sets],
            "kappa": {str(C): int(k) for C, k in sorted(self.kappa_table.items())},
            "horizon": self.horizon,
            "burn_in": self.burn_in,
            "lower_densities": self.densities,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "DensityFamily":
        fam = cls(
            sets=[np.asarray(s, dtype=np.int64) for s in data["sets"]],
            horizon=int(data["horizon"]),
            a=list(data["a"]) if data.get("a") is not None else None,
            burn_in=int(data.get("burn_in", 1000)),
        )
        fam.kappa_table = {int(C): int(k) for C, k in data.get("kappa", {}).items()}
        return fam


def build_family_far(count: int, horizon: int, kappa_C: Iterable[int] = (), burn_in: int = 1000) -> DensityFamily:
    """Disjoint sets of positive lower density whose mutual gaps grow.

    Starting from ``split_two`` of ``{1..horizon}``, each step thins the current
    reservoir so consecutive elements are at least ``r + 1`` apart and splits it
    again.  The result is ``A(1), ..., A(count-1)`` together with the last
    reservoir.
    """
    if count < 1:
        raise SpecError("count must be positive")
    E = np.arange(1, horizon + 1, dtype=np.int64)
    if count == 1:
        fam = DensityFamily([E], horizon, burn_in=burn_in)
    else:
        sets = []
        A, B = split_two(E)
        sets.append(A)
        for r in range(1, count - 1):
            E = thin_separate(B, r + 1)
            if E.size < 4:
                raise HorizonError(f"horizon {horizon} too small for {count} sets")
            A, B = split_two(E)
            sets.append(A)
        sets.append(B)
        if any(s.size == 0 for s in sets):
            raise HorizonError(f"horizon {horizon} too small for {count} sets")
        fam = DensityFamily(sets, horizon, burn_in=burn_in)
    for C in kappa_C:
        fam.kappa(int(C))
    return fam


def _cover(T: np.ndarray, g: int, horizon: int) -> np.ndarray:
    """Boolean mask of ``T + [-g, g]`` on ``0..horizon``."""
    mark = np.zeros(horizon + 2, dtype=np.int64)
    np.add.at(mark, np.clip(T - g, 0, horizon + 1), 1)
    np.add.at(mark, np.clip(T + g + 1, 0, horizon + 1), -1)
    return np.cumsum(mark)[: horizon + 1] > 0


def _removed_density_max(A: np.ndarray, covered: np.ndarray, burn_in: int) -> float:
    """``max_{n >= burn_in} card(A ∩ covered ∩ [0, n]) / (n + 1)``."""
    H = covered.size - 1
    hit = np.zeros(H + 1, dtype=np.int64)
    hit[A[covered[A]]] = 1
    c = np.cumsum(hit)
    n = np.arange(burn_in, H + 1)
    return float((c[burn_in:] / (n + 1)).max())


def enforce_pairwise_gap(fam: DensityFamily, a: Sequence[int], max_factor: int = 1 << 20) -> DensityFamily:
    """Shrink each set so ``min A(p) >= a(p)`` and ``|n - n'| >= a(p) + a(q)``.

    First every set is thinned by ``2 a(p)`` (gaps inside one set).  Then, for
    ``r = 1, 2, ...``, each later set ``A(p)`` is thinned by the smallest power
    of two such that the elements of ``A(r)`` lying within ``a(r) + a(p)`` of
    it make up a fraction ``< delta_r / 2**(p - r + 1)`` of every initial
    segment ``[0, n]`` with ``n >= burn_in``; those elements are then removed
    from ``A(r)``.  ``delta_r`` is the measured lower density of ``A(r)`` on
    ``[burn_in, horizon]``, so ``A(r)`` keeps at least half of it.
    """
    a = [int(v) for v in a]
    if len(a) < fam.count or any(v < 0 for v in a):
        raise SpecError("need one nonnegative gap parameter per set")
    a = a[: fam.count]
    H = fam.horizon
    if not any(a):
        return DensityFamily([s.copy() for s in fam.sets], H, a=a, burn_in=fam.burn_in)
    sets = [thin_separate(s, 2 * ap) if ap > 0 else s.copy() for s, ap in zip(fam.sets, a)]
    burn = min(fam.burn_in, max(1, H // 10))
    factors = {}
    for r in range(fam.count - 1):
        delta = density_estimate(sets[r], H, burn, "lower")
        if delta <= 0:
            raise InconclusiveError(f"set {r + 1} has no certified density at horizon {H}")
        removed = np.zeros(H + 1, dtype=bool)
        for p in range(r + 1, fam.count):
            g = a[r] + a[p]
            budget = delta / 2.0 ** (p - r + 1)
            t = 1
            while True:
                T = thin_separate(sets[p], t)
                if T.size == 0:
                    raise InconclusiveError(f"set {p + 1} emptied while thinning at horizon {H}")
                cov = _cover(T, g, H)
                if _removed_density_max(sets[r], cov, burn) < budget:
                    break
                t *= 2
                if t > max_factor:
                    raise InconclusiveError("thinning factor exceeded its budget")
            factors[(r + 1, p + 1)] = t
            sets[p] = T
            removed |= cov
        sets[r] = sets[r][~removed[sets[r]]]
    out = DensityFamily(sets, H, a=a, burn_in=fam.burn_in)
    out.thinning_factors = factors
    if any(d <= 0 for d in out.densities):
        raise InconclusiveError("a set lost its positive density at the horizon")
    return out


def build_family(count: int, horizon: int, a: Sequence[int] | None = None, kappa_C: Iterable[int] = (), burn_in: int = 1000) -> DensityFamily:
    """Far-separated family followed by the pairwise gap enforcement."""
    fam = build_family_far(count, horizon, burn_in=burn_in)
    if a is not None:
        fam = enforce_pairwise_gap(fam, a)
    for C in kappa_C:
        fam.kappa(int(C))
    return fam


def compute_Mk(fam: DensityFamily, count: int, min_step: int = 1) -> list[int]:
    """``M_1 = 1`` and ``M_{k+1} = max(kappa(M_k), M_k + max(min_step, M_k - M_{k-1}))``.

    Any value at least ``kappa(M_k)`` keeps the implication
    ``max(n, n') >= M_{k+1} => |n - n'| >= M_k``; the second term makes the
    increments non-decreasing.  Raises :class:`HorizonError` when ``kappa`` can
    no longer be certified inside the horizon.
    """
    M = [1]
    prev_step = min_step
    while len(M) < count:
        C = M[-1]
        if not fam.kappa_certified(C):
            raise HorizonError(
                f"kappa({C}) = {fam.kappa(C)} not certified within horizon {fam.horizon}; "
                f"got {len(M)} of {count} values"
            )
        nxt = max(fam.kappa(C), C + prev_step)
        prev_step = nxt - C
        M.append(int(nxt))
    return M


def check_Mk(fam: DensityFamily, M: Sequence[int]) -> bool:
    """Exhaustive check of ``max(n, n') >= M_{k+1} => |n - n'| >= M_k`` and monotone increments."""
    steps = np.diff(M)
    if np.any(steps <= 0) or np.any(np.diff(steps) < 0):
        return False
    return all(fam.kappa(M[k]) <= M[k + 1] for k in range(len(M) - 1))
