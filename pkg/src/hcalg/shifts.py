"""Weighted shifts, a catalogue of weights and the condition checkers.

Every product ``w_a ... w_b`` is taken from cumulative log sums, never by
multiplying weights one at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import HorizonError, NumericalError, SpecError
from .seq import TruncatedSeq
from .spaces import SpaceSpec

LOG2 = math.log(2.0)

WEIGHT_KINDS = (
    "rolewicz",
    "one_plus_lambda_over_n",
    "exp_n_alpha",
    "counterexample_odd",
    "mk_weight",
    "bilateral_inverse_example",
    "explicit",
)


@dataclass(frozen=True, eq=False)
class WeightSeq:
    """A positive weight sequence with cached cumulative log sums.

    ``cum[n + neg]`` stores ``C_n`` where ``C_0 = 0`` and
    ``C_b - C_{a-1} = log(w_a ... w_b)``.  For ``n > 0`` this is ``log W_n``
    with ``W_n = w_1 ... w_n``.  Bilateral weights also cover ``-neg..0``.
    """

    kind: str
    params: Mapping
    cum: np.ndarray
    horizon: int
    neg: int = 0
    _meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        cum = np.asarray(self.cum, dtype=float)
        if cum.shape != (self.horizon + self.neg + 1,):
            raise SpecError("cumulative table has the wrong length")
        if not np.all(np.isfinite(cum)):
            raise NumericalError("non-finite weight product")
        if cum[self.neg] != 0.0:
            raise SpecError("C_0 must be 0")
        cum.setflags(write=False)
        object.__setattr__(self, "cum", cum)

    @property
    def bilateral(self) -> bool:
        return self.neg > 0

    # lookups ----------------------------------------------------------------------

    def _C(self, n):
        n = np.asarray(n, dtype=np.int64)
        if n.size and (n.min() < -self.neg or n.max() > self.horizon):
            raise HorizonError(
                f"weights known on [{-self.neg}, {self.horizon}], asked for "
                f"[{int(n.min())}, {int(n.max())}]"
            )
        return self.cum[n + self.neg]

    def log_prod(self, a, b):
        """``log(w_a ... w_b)``, the empty product (b < a) being 0.  Vectorised."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = self._C(np.maximum(b, a - 1)) - self._C(a - 1)
        return out if out.ndim else float(out)

    def logW(self, n):
        """``log(w_1 ... w_n)`` for ``n >= 0``."""
        return self.log_prod(1, n)

    def log_w(self, n):
        n = np.asarray(n, dtype=np.int64)
        return self.log_prod(n, n)

    def w(self, n):
        return np.exp(self.log_w(n))

    # catalogue --------------------------------------------------------------------

    @classmethod
    def _from_log_w(cls, kind, params, log_w_pos, log_w_neg=None):
        """``log_w_pos[k]`` is ``log w_{k+1}``; ``log_w_neg[k]`` is ``log w_{-k}`` (k >= 0)."""
        log_w_pos = np.asarray(log_w_pos, dtype=float)
        pos = np.concatenate([[0.0], np.cumsum(log_w_pos)])
        if log_w_neg is None:
            return cls(kind, dict(params), pos, len(log_w_pos), 0)
        log_w_neg = np.asarray(log_w_neg, dtype=float)
        # C_{-n} = -(log w_{-n+1} + ... + log w_0)
        negc = -np.cumsum(log_w_neg[: len(log_w_neg)])
        neg = len(log_w_neg)
        cum = np.concatenate([negc[::-1], [0.0], pos[1:]])
        return cls(kind, dict(params), cum, len(log_w_pos), neg)

    @classmethod
    def rolewicz(cls, lam: float, horizon: int) -> "WeightSeq":
        if not lam > 0:
            raise SpecError("lambda must be positive")
        cum = np.arange(horizon + 1) * math.log(lam)
        return cls("rolewicz", {"lam": lam}, cum, horizon)

    @classmethod
    def one_plus_lambda_over_n(cls, lam: float, horizon: int) -> "WeightSeq":
        if not lam > 0:
            raise SpecError("lambda must be positive")
        n = np.arange(1, horizon + 1)
        return cls._from_log_w("one_plus_lambda_over_n", {"lam": lam}, np.log1p(lam / n))

    @classmethod
    def exp_n_alpha(cls, alpha: float, horizon: int) -> "WeightSeq":
        """``w_1 ... w_n = exp(n**alpha)``."""
        if not 0 < alpha < 1:
            raise SpecError("alpha must lie in (0, 1)")
        cum = np.arange(horizon + 1, dtype=float) ** alpha
        return cls("exp_n_alpha", {"alpha": alpha}, cum, horizon)

    @classmethod
    def counterexample_odd(cls, horizon: int) -> "WeightSeq":
        """``w_1 ... w_{2n} = 2**(n-1)`` (n >= 1) and ``w_1 ... w_{2n+1} = 2**(2n)``."""
        n = np.arange(horizon + 1)
        cum = np.where(n % 2 == 1, 2 * (n // 2), n // 2 - 1) * LOG2
        cum[0] = 0.0
        return cls("counterexample_odd", {}, cum, horizon)

    @classmethod
    def mk_weight(cls, M: Sequence[int], horizon: int | None = None) -> "WeightSeq":
        """Block weight attached to an increasing sequence ``M = (M_1, M_2, ...)``.

        ``w_n = 2`` for ``n <= M_2`` and, for ``n`` in ``(M_k, M_{k+1}]``,
        ``w_n = (w_1 ... w_{M_k}) ** (1 / (k (M_{k+1} - M_k)))``.
        """
        M = [int(v) for v in M]
        if len(M) < 2 or any(b <= a for a, b in zip(M, M[1:])) or M[0] < 1:
            raise SpecError("M must be a strictly increasing sequence of positive integers")
        horizon = M[-1] if horizon is None else int(horizon)
        if horizon > M[-1]:
            raise HorizonError(f"MkWeight defined up to M_{len(M)} = {M[-1]}")
        cum = np.zeros(M[-1] + 1)
        cum[: M[1] + 1] = np.arange(M[1] + 1) * LOG2
        block_logs = {2: cum[M[1]]}
        for k in range(2, len(M)):  # block (M_k, M_{k+1}] with 1-based k
            lo, hi = M[k - 1], M[k]
            base = cum[lo]
            step = base / (k * (hi - lo))
            cum[lo + 1 : hi + 1] = base + step * np.arange(1, hi - lo + 1)
            # pin the block end to the exact identity C_{M_{k+1}} = C_{M_k}(1 + 1/k)
            cum[hi] = base * (1.0 + 1.0 / k)
            block_logs[k + 1] = cum[hi]
        out = cls("mk_weight", {"M": M}, cum[: horizon + 1], horizon)
        out._meta["block_logs"] = block_logs
        return out

    @classmethod
    def bilateral_inverse_example(cls, horizon: int) -> "WeightSeq":
        """``w_0 = 1``, ``w_n = 2`` and ``w_{-n} = n**2 / (n+1)**2`` for ``n > 0``."""
        n = np.arange(1, horizon + 1)
        log_pos = np.full(horizon, LOG2)
        log_neg = np.concatenate([[0.0], 2 * (np.log(n) - np.log(n + 1))])[:horizon]
        # log_neg[k] = log w_{-k}; C_{-n} needs w_{-n+1} .. w_0, i.e. k = 0 .. n-1
        return cls._from_log_w("bilateral_inverse_example", {}, log_pos, log_neg)

    @classmethod
    def explicit(cls, weights: Sequence[float], negative: Sequence[float] | None = None) -> "WeightSeq":
        """``weights[k] = w_{k+1}``; optional ``negative[k] = w_{-k}`` (starting at ``w_0``)."""
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0):
            raise SpecError("weights must be positive")
        wn = None
        if negative is not None:
            wn = np.asarray(negative, dtype=float)
            if np.any(wn <= 0):
                raise SpecError("weights must be positive")
            wn = np.log(wn)
        params = {"weights": [float(v) for v in w]}
        if negative is not None:
            params["negative"] = [float(v) for v in negative]
        return cls._from_log_w("explicit", params, np.log(w), wn)

    @classmethod
    def from_log_products(cls, log_W: Sequence[float], kind: str = "explicit", params=None) -> "WeightSeq":
        """Unilateral weight given directly by ``log(w_1 ... w_n)`` for ``n = 0..L``."""
        cum = np.asarray(log_W, dtype=float)
        return cls(kind, dict(params or {}), cum, len(cum) - 1)

    # JSON -------------------------------------------------------------------------

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "horizon": self.horizon}

    @classmethod
    def from_json(cls, data: Mapping, horizon: int | None = None) -> "WeightSeq":
        kind = str(data["kind"]).lower()
        params = dict(data.get("params", {}))
        for k, v in data.items():
            if k not in ("kind", "params", "horizon"):
                params.setdefault(k, v)
        h = int(horizon if horizon is not None else data.get("horizon", 1000))
        if kind == "rolewicz":
            return cls.rolewicz(float(params.get("lam", params.get("lambda", 2.0))), h)
        if kind == "one_plus_lambda_over_n":
            return cls.one_plus_lambda_over_n(float(params.get("lam", params.get("lambda", 1.0))), h)
        if kind == "exp_n_alpha":
            return cls.exp_n_alpha(float(params["alpha"]), h)
        if kind == "counterexample_odd":
            return cls.counterexample_odd(h)
        if kind == "mk_weight":
            return cls.mk_weight(params["M"], params.get("horizon"))
        if kind == "bilateral_inverse_example":
            return cls.bilateral_inverse_example(h)
        if kind == "explicit":
            return cls.explicit(params["weights"], params.get("negative"))
        if kind == "derivative":
            return derivative_weight(h)
        raise SpecError(f"unknown weight kind {kind!r}")


def derivative_weight(horizon: int) -> WeightSeq:
    """``w_n = n``: differentiation acting on Taylor coefficients."""
    out = WeightSeq.explicit(np.arange(1, horizon + 1, dtype=float))
    object.__setattr__(out, "kind", "derivative")
    object.__setattr__(out, "params", {})
    return out


# shifting ---------------------------------------------------------------------------


def backward_shift_arrays(w: WeightSeq, idx: np.ndarray, logabs: np.ndarray, phase: np.ndarray, steps: int,
                          horizon: int, bilateral: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``B_w**steps`` on raw ``(idx, log|c|, phase)`` arrays, dropping what leaves a unilateral range."""
    new = idx - steps
    if bilateral:
        if new.size and new[0] < -horizon:
            raise HorizonError("backward shift moves mass past -horizon")
    elif new.size and new[0] < 0:
        keep = new >= 0
        new, logabs, phase = new[keep], logabs[keep], phase[keep]
    return new, logabs + w.log_prod(new + 1, new + steps), phase


def apply_shift(w: WeightSeq, x: TruncatedSeq, steps: int, direction: str = "backward") -> TruncatedSeq:
    """Apply ``B_w**steps`` (``e_n -> w_n e_{n-1}``) or ``F_w**steps`` (``e_n -> w_{n+1} e_{n+1}``).

    Unilateral backward shifts drop whatever reaches negative indices.
    Bilateral shifts and forward shifts raise :class:`HorizonError` instead of
    truncating.  A nonzero input tail becomes an unknown (infinite) tail since
    the discarded mass may move into view.
    """
    if steps < 0 or int(steps) != steps:
        raise SpecError("steps must be a nonnegative integer")
    if steps == 0:
        return x
    if x.bilateral != w.bilateral and x.bilateral:
        raise SpecError("bilateral sequence needs a bilateral weight")
    tail = math.inf if x.tail_bound else 0.0
    if direction == "backward":
        new, la, ph = backward_shift_arrays(w, x.idx, x.logabs, x.phase, steps, x.horizon, x.bilateral)
        return TruncatedSeq(new, la, ph, x.horizon, x.bilateral, tail)
    if direction == "forward":
        new = x.idx + steps
        if new.size and new[-1] > x.horizon:
            raise HorizonError("forward shift moves mass past the horizon")
        la = x.logabs + w.log_prod(x.idx + 1, new)
        return TruncatedSeq(new, la, x.phase, x.horizon, x.bilateral, tail)
    raise SpecError(f"unknown direction {direction!r}")


# conditions -------------------------------------------------------------------------


@dataclass
class GammaReport:
    """Per-offset values of ``(w_{l+1} ... w_{n+l})**-gamma ||e_{n+l}||_q``."""

    gamma: float
    offsets: dict[int, dict]
    tolerance: float

    @property
    def tends_to_zero(self) -> bool:
        return all(r["tends_to_zero"] for r in self.offsets.values())

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "tolerance": self.tolerance,
            "tends_to_zero": self.tends_to_zero,
            "offsets": {str(k): v for k, v in self.offsets.items()},
        }


def tends_to_zero(values: Sequence[float], tol: float) -> bool:
    """Finite-horizon reading of ``v_k -> 0``.

    The final value must be below ``tol`` and the last third of the samples
    must be non-increasing.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return False
    third = v[-max(2, math.ceil(v.size / 3)) :]
    return bool(v[-1] < tol and np.all(np.diff(third) <= 0))


def gamma_values(w: WeightSeq, spec: SpaceSpec, gamma: float, l: int, ns, q: float = 1) -> np.ndarray:
    """Log of ``(w_{l+1} ... w_{n+l})**-gamma ||e_{n+l}||_q`` for each ``n`` in ``ns``."""
    ns = np.asarray(ns, dtype=np.int64)
    return -gamma * w.log_prod(l + 1, ns + l) + spec.log_basis_norm(ns + l, q)


def check_gamma_condition(
    w: WeightSeq,
    spec: SpaceSpec,
    gamma: float,
    shifts: Iterable[int],
    horizon: int,
    q: float = 1,
    candidates: Iterable[int] | None = None,
    tol: float = 1e-6,
) -> GammaReport:
    """Scan ``n <= horizon`` and extract the record-minimum subsequence per offset.

    The subsequence keeps every ``n`` whose value is below all earlier values,
    which is the greedy choice for a decreasing threshold schedule.
    """
    if not gamma > 0:
        raise SpecError("gamma must be positive")
    out = {}
    for l in shifts:
        if candidates is None:
            ns = np.arange(1, horizon - l + 1)
        else:
            ns = np.array([n for n in candidates if 1 <= n and n + l <= horizon], dtype=np.int64)
        if ns.size == 0:
            out[int(l)] = {"values": [], "subsequence": [], "inf": None, "tends_to_zero": False}
            continue
        logs = gamma_values(w, spec, gamma, l, ns, q)
        running = np.minimum.accumulate(logs)
        is_record = np.concatenate([[True], logs[1:] < running[:-1]])
        sub_n = ns[is_record]
        sub_v = np.exp(logs[is_record])
        out[int(l)] = {
            "values": [[int(n), float(v)] for n, v in zip(ns, np.exp(logs))],
            "log_values": [float(v) for v in logs],
            "subsequence": [int(n) for n in sub_n],
            "subsequence_values": [float(v) for v in sub_v],
            "inf": float(np.exp(logs.min())),
            "tends_to_zero": tends_to_zero(sub_v, tol),
        }
    return GammaReport(float(gamma), out, tol)


@dataclass
class RegularityReport:
    passed: bool
    product_ratio: float
    window_ratio: float | None
    worst_product: tuple[int, int] | None
    worst_window: tuple | None

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "product_ratio": self.product_ratio,
            "window_ratio": self.window_ratio,
            "worst_product": self.worst_product,
            "worst_window": self.worst_window,
        }


def verify_regularity(
    spec: SpaceSpec,
    w: WeightSeq | None,
    r: float,
    q: float,
    C: float,
    M: int,
    rho: int,
    horizon: int,
) -> RegularityReport:
    """Check ``||e_n||_r ||e_k||_r <= C ||e_{n+k}||_q`` and the shifted-window bound.

    The window bound is ``prod_j w_{k_j} ||e_u||_r <= C ||e_v||_q`` for ``n >= M``,
    ``u < v`` in ``{n-M, ..., n}`` and every ``k`` in
    ``{n-M+rho, ..., n+rho}**(v-u)``.  The maximum over the ``k`` tuples is
    ``(max w on the window)**(v-u)``, so the scan over tuples is exact without
    enumerating them.  Ratios are reported as ``left / (C * right)``.
    """
    if r > q:
        raise SpecError("need r <= q")
    logC = math.log(C)
    n = np.arange(horizon + 1)
    le_r = spec.log_basis_norm(n, r)
    le_q = spec.log_basis_norm(n, q)
    nn, kk = np.meshgrid(n, n, indexing="ij")
    valid = nn + kk <= horizon
    lhs = le_r[nn] + le_r[kk]
    rhs = np.where(valid, le_q[np.minimum(nn + kk, horizon)], np.inf)
    ratio = np.where(valid, lhs - rhs - logC, -np.inf)
    pos = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    prod_ratio = float(np.exp(ratio[pos]))
    passed = prod_ratio <= 1.0 + 1e-12
    window_ratio, worst_window = None, None
    if w is not None and M >= 1:
        best = -np.inf
        for c in range(M, horizon + 1):
            ks = np.arange(c - M + rho, c + rho + 1)
            ks = ks[ks >= 1]
            if ks.size == 0 or ks[-1] > w.horizon:
                break
            lw = float(np.max(w.log_w(ks)))
            us = np.arange(c - M, c + 1)
            for u in us[:-1]:
                vs = us[us > u]
                vals = (vs - u) * lw + le_r[u] - le_q[vs] - logC
                j = int(np.argmax(vals))
                if vals[j] > best:
                    best = float(vals[j])
                    worst_window = (int(c), int(u), int(vs[j]))
        window_ratio = float(np.exp(best)) if best > -np.inf else None
        if window_ratio is not None:
            passed = passed and window_ratio <= 1.0 + 1e-12
    return RegularityReport(bool(passed), prod_ratio, window_ratio, (int(pos[0]), int(pos[1])), worst_window)


@dataclass
class InverseExampleReport:
    n: list[int]
    forward_ratio: list[float]
    backward_value: list[float]
    forward_exact: bool
    backward_exact: bool
    max_log_error_forward: float
    max_log_error_backward: float

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "forward_ratio": self.forward_ratio,
            "backward_value": self.backward_value,
            "forward_exact": self.forward_exact,
            "backward_exact": self.backward_exact,
            "max_log_error_forward": self.max_log_error_forward,
            "max_log_error_backward": self.max_log_error_backward,
        }


def check_inverse_example(horizon: int) -> InverseExampleReport:
    """Forward and backward quantities for the invertible bilateral example.

    With ``rho = 1 / w`` the forward quantity is
    ``(rho_{-1} ... rho_{-n})**-1/2 ||e_{-n}||`` (expected 1) and the backward
    one is ``w_{-1} ... w_{-n} ||e_{-n}||`` (expected ``1/(n+1)``).  Both are
    evaluated in floating point through the log tables and exactly in rational
    arithmetic (the forward identity is checked in squared form).
    """
    w = WeightSeq.bilateral_inverse_example(horizon + 1)
    spec = SpaceSpec.weighted_c0("abs_plus_one", bilateral=True)
    n = np.arange(1, horizon + 1)
    log_w_neg = w.log_prod(-n, -1)  # log(w_{-n} ... w_{-1})
    log_norm = spec.log_gamma(-n)
    log_fwd = 0.5 * log_w_neg + log_norm  # rho product is the reciprocal
    log_bwd = log_w_neg + log_norm
    err_f = float(np.max(np.abs(log_fwd)))
    err_b = float(np.max(np.abs(log_bwd + np.log(n + 1.0))))
    prod = Fraction(1)
    fwd_exact = bwd_exact = True
    for k in range(1, horizon + 1):
        prod *= Fraction(k * k, (k + 1) * (k + 1))
        norm = Fraction(k + 1)
        # (rho_{-1}...rho_{-k})**-1 ||e_{-k}||**2 == 1  <=>  forward ratio == 1
        fwd_exact &= prod * norm * norm == 1
        bwd_exact &= prod * norm == Fraction(1, k + 1)
    return InverseExampleReport(
        [int(k) for k in n],
        [float(v) for v in np.exp(log_fwd)],
        [float(v) for v in np.exp(log_bwd)],
        bool(fwd_exact),
        bool(bwd_exact),
        err_f,
        err_b,
    )


# MkWeight properties ----------------------------------------------------------------


@dataclass
class MkWeightReport:
    non_increasing: bool
    block_identity_error: float
    closed_form_error: float
    window_identity_error: float
    ratios: dict[float, list[float]]
    ratio_decreasing: dict[float, bool]
    ks: list[int]

    @property
    def passed(self) -> bool:
        return (
            self.non_increasing
            and self.block_identity_error < 1e-12
            and self.closed_form_error < 1e-12
            and self.window_identity_error < 1e-12
            and all(self.ratio_decreasing.values())
        )

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "non_increasing": self.non_increasing,
            "block_identity_error": self.block_identity_error,
            "closed_form_error": self.closed_form_error,
            "window_identity_error": self.window_identity_error,
            "ratios": {str(a): v for a, v in self.ratios.items()},
            "ratio_decreasing": {str(a): v for a, v in self.ratio_decreasing.items()},
            "ks": self.ks,
        }


def check_mk_weight(M: Sequence[int], alphas: Sequence[float] = (0.25, 0.5, 1.0), ks: Sequence[int] | None = None) -> MkWeightReport:
    """Verify the four structural properties of the block weight on ``[1, M_last]``.

    Relative errors are measured against ``log(w_1 ... w_{M_k})``:

    * the weights are non-increasing;
    * ``C_{M_{k+1}} = C_{M_k} (1 + 1/k)``;
    * ``C_{M_k} = C_{M_2} prod_{j=2}^{k-1} (1 + 1/j)``;
    * ``w_{M_{k-1}+1} ... w_{M_{k+1}} = (w_1 ... w_{M_{k-1}})**(2/(k-1))``;

    and the ratio ``w_{M_{k-1}+1} ... w_{M_{k+1}} / (w_1 ... w_{M_{k+1}})**alpha``
    decreases along ``ks``.
    """
    M = [int(v) for v in M]
    w = WeightSeq.mk_weight(M)
    K = len(M)  # M[k-1] is M_k
    lw = w.log_w(np.arange(1, M[-1] + 1))
    # log w_n is a difference of cumulative sums, so its rounding scales with them
    slack = 8 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(w.logW(np.arange(M[-1] + 1))))))
    non_inc = bool(np.all(np.diff(lw) <= slack))

    def C(k):
        return float(w.logW(M[k - 1]))

    block_err = max((abs(C(k + 1) - C(k) * (1 + 1 / k)) / C(k + 1) for k in range(2, K)), default=0.0)
    closed_err = max(
        (abs(C(k) - C(2) * math.prod(1 + 1 / j for j in range(2, k))) / C(k) for k in range(2, K + 1)),
        default=0.0,
    )
    window_err = 0.0
    for k in range(3, K):
        lhs = float(w.log_prod(M[k - 2] + 1, M[k]))
        rhs = 2.0 / (k - 1) * C(k - 1)
        window_err = max(window_err, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    if ks is None:
        ks = list(range(3, K))
    ratios, dec = {}, {}
    for a in alphas:
        vals = [float(np.exp(w.log_prod(M[k - 2] + 1, M[k]) - a * C(k + 1))) for k in ks]
        ratios[float(a)] = vals
        dec[float(a)] = bool(all(y < x for x, y in zip(vals, vals[1:])))
    return MkWeightReport(non_inc, block_err, closed_err, window_err, ratios, dec, list(ks))
