"""Sequence spaces, their seminorms and the induced F-norm."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import SpecError
from .logmath import NEG_INF, logsumexp, safe_exp
from .seq import TruncatedSeq

KINDS = ("lp", "c0", "omega", "entire", "weighted_c0")
GAMMA_RULES = ("counterexample_odd", "abs_plus_one")
P_MAX = 30


@dataclass(frozen=True)
class SpaceSpec:
    """Description of a Fréchet sequence space.

    kind
        ``lp`` (needs ``p >= 1``), ``c0``, ``omega`` (seminorms
        ``sum_{n<=q} |x_n|``), ``entire`` (Taylor coefficients with seminorms
        ``sum |a_n| q**n``) or ``weighted_c0`` (norm ``sup gamma_n |x_n|``).
    gamma
        For ``weighted_c0``: an explicit tuple of weights (index 0 first, or
        ``-L..L`` when bilateral) or the name of a built-in rule.
    Q
        Number of seminorms that may be requested.  Single-norm kinds use 1.
    """

    kind: str
    p: float = 1.0
    gamma: tuple[float, ...] | str | None = None
    Q: int = 1
    bilateral: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown space kind {self.kind!r}")
        if self.kind == "lp" and not (self.p >= 1.0):
            raise SpecError("lp needs p >= 1")
        if self.Q < 1:
            raise SpecError("Q must be at least 1")
        if self.kind in ("omega", "entire") and self.bilateral:
            raise SpecError(f"{self.kind} has no bilateral variant")
        if self.kind == "weighted_c0":
            if self.gamma is None:
                raise SpecError("weighted_c0 needs gamma")
            if isinstance(self.gamma, str):
                if self.gamma not in GAMMA_RULES:
                    raise SpecError(f"unknown gamma rule {self.gamma!r}")
            else:
                g = tuple(float(v) for v in self.gamma)
                if any(not (v >= 1.0) for v in g):
                    raise SpecError("weights gamma_n must be >= 1")
                object.__setattr__(self, "gamma", g)

    # constructors -------------------------------------------------------------

    @classmethod
    def lp(cls, p: float = 1.0, bilateral: bool = False) -> "SpaceSpec":
        return cls("lp", p=p, bilateral=bilateral)

    @classmethod
    def c0(cls, bilateral: bool = False) -> "SpaceSpec":
        return cls("c0", bilateral=bilateral)

    @classmethod
    def omega(cls, Q: int = 30) -> "SpaceSpec":
        return cls("omega", Q=Q)

    @classmethod
    def entire(cls, Q: int = 30) -> "SpaceSpec":
        return cls("entire", Q=Q)

    @classmethod
    def weighted_c0(cls, gamma, bilateral: bool = False) -> "SpaceSpec":
        if not isinstance(gamma, str):
            gamma = tuple(gamma)
        return cls("weighted_c0", gamma=gamma, bilateral=bilateral)

    @property
    def single_norm(self) -> bool:
        return self.kind in ("lp", "c0", "weighted_c0")

    # JSON -----------------------------------------------------------------------

    def to_json(self) -> dict:
        out = {"kind": self.kind, "p": self.p, "Q": self.Q, "bilateral": self.bilateral}
        if self.gamma is not None:
            out["gamma"] = self.gamma if isinstance(self.gamma, str) else list(self.gamma)
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "SpaceSpec":
        gamma = data.get("gamma")
        if isinstance(gamma, Sequence) and not isinstance(gamma, str):
            gamma = tuple(float(v) for v in gamma)
        return cls(
            kind=str(data["kind"]),
            p=float(data.get("p", 1.0)),
            gamma=gamma,
            Q=int(data.get("Q", 1)),
            bilateral=bool(data.get("bilateral", False)),
        )

    # weights ----------------------------------------------------------------------

    def log_gamma(self, n) -> np.ndarray:
        """``log gamma_n`` for ``weighted_c0`` (vectorised over ``n``)."""
        n = np.asarray(n, dtype=np.int64)
        g = self.gamma
        if g == "counterexample_odd":
            # gamma_{2k} = 1, gamma_{2k+1} = 2**k
            return np.where(n % 2 == 1, (n // 2) * math.log(2.0), 0.0)
        if g == "abs_plus_one":
            return np.log(np.abs(n) + 1.0)
        arr = np.asarray(g, dtype=float)
        off = (len(arr) - 1) // 2 if self.bilateral else 0
        pos = n + off
        if np.any(pos < 0) or np.any(pos >= len(arr)):
            raise SpecError("index outside the explicit gamma table")
        return np.log(arr[pos])

    def _check_q(self, q: float) -> None:
        if self.kind in ("omega", "entire"):
            if not (1 <= q <= self.Q):
                raise SpecError(f"seminorm index {q} outside 1..{self.Q}")
        elif q < 1:
            raise SpecError("seminorm index must be >= 1")

    def log_basis_norm(self, n, q: float = 1) -> np.ndarray:
        """``log ||e_n||_q`` for an array of indices."""
        self._check_q(q)
        return self._log_basis_norm(np.asarray(n, dtype=np.int64), q)

    def _log_basis_norm(self, n: np.ndarray, q: float) -> np.ndarray:
        if self.kind in ("lp", "c0"):
            return np.zeros(n.shape)
        if self.kind == "weighted_c0":
            return self.log_gamma(n)
        if self.kind == "omega":
            return np.where((n >= 0) & (n <= q), 0.0, NEG_INF)
        return n * math.log(q)


def _unchecked_log_seminorm(x: TruncatedSeq, spec: SpaceSpec, q: float) -> float:
    return log_seminorm_arrays(x.idx, x.logabs, spec, q)


def log_seminorm_arrays(idx: np.ndarray, la: np.ndarray, spec: SpaceSpec, q: float = 1) -> float:
    """Log seminorm of the vector with log moduli ``la`` at indices ``idx`` (no validation)."""
    if la.size == 0:
        return NEG_INF
    if spec.kind == "lp":
        if spec.p == 1.0:
            return logsumexp(la)
        return logsumexp(spec.p * la) / spec.p
    if spec.kind == "c0":
        return float(la.max())
    if spec.kind == "weighted_c0":
        return float((la + spec.log_gamma(idx)).max())
    if spec.kind == "omega":
        m = (idx >= 0) & (idx <= q)
        return logsumexp(la[m])
    return logsumexp(la + idx * math.log(q))


def log_seminorm(x: TruncatedSeq, spec: SpaceSpec, q: float = 1) -> float:
    """Natural log of the ``q``-th seminorm of the stored part of ``x``."""
    if x.bilateral != spec.bilateral:
        raise SpecError("sequence and space disagree on bilaterality")
    spec._check_q(q)
    return _unchecked_log_seminorm(x, spec, q)


def seminorm(x: TruncatedSeq, spec: SpaceSpec, q: float = 1) -> float:
    """The ``q``-th seminorm of the stored part of ``x``.

    >>> seminorm(TruncatedSeq.basis(3, 10), SpaceSpec.entire(Q=5), 2)
    8.0
    """
    return safe_exp(log_seminorm(x, spec, q))


def f_norm(x: TruncatedSeq, spec: SpaceSpec, p_max: int = P_MAX) -> float:
    """``sum_{p<=p_max} 2**-p min(1, ||x||_p)`` plus a bound on the omitted terms.

    For single-norm spaces and for ``omega`` when the support lies in
    ``[0, p_max]`` the omitted part is computed exactly; otherwise it is bounded
    by ``2**-p_max``.
    """
    if x.bilateral != spec.bilateral:
        raise SpecError("sequence and space disagree on bilaterality")
    if x.nnz == 0:
        return 0.0
    if spec.single_norm:
        # every seminorm is the same norm and the weights sum to one
        return min(1.0, safe_exp(_unchecked_log_seminorm(x, spec, 1)))
    total = []
    for p in range(1, p_max + 1):
        total.append(2.0**-p * min(1.0, safe_exp(_unchecked_log_seminorm(x, spec, p))))
    exact_tail = spec.single_norm or (spec.kind == "omega" and x.max_support() <= p_max)
    if exact_tail:
        total.append(2.0**-p_max * min(1.0, safe_exp(_unchecked_log_seminorm(x, spec, p_max))))
    else:
        total.append(2.0**-p_max)
    return math.fsum(total)


def in_ball(x: TruncatedSeq, center: TruncatedSeq, radius: float, spec: SpaceSpec, q: float = 1) -> bool:
    """Conservative membership test ``||x - center||_q + tails < radius``."""
    diff = x - center  # carries the sum of both tail bounds
    return seminorm(diff, spec, q) + diff.tail_bound < radius
