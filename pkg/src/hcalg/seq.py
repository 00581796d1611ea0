"""Sparse truncated sequences with log-scaled coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import HorizonError, NumericalError, SpecError
from .logmath import NEG_INF, combine_groups, from_log, log_unit_arrays, logsumexp, to_log


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TruncatedSeq:
    """A finitely supported sequence known up to index ``horizon``.

    Only nonzero coefficients are stored, each as ``exp(logabs) * phase``.
    Unilateral sequences live on ``0..horizon``; bilateral ones on
    ``-horizon..horizon``.  ``tail_bound`` is a nonnegative bound on the norm of
    whatever was discarded beyond the horizon.
    """

    idx: np.ndarray
    logabs: np.ndarray
    phase: np.ndarray
    horizon: int
    bilateral: bool = False
    tail_bound: float = 0.0
    _lookup: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        idx = np.asarray(self.idx, dtype=np.int64)
        logabs = np.asarray(self.logabs, dtype=float)
        phase = np.asarray(self.phase, dtype=complex)
        if not (idx.shape == logabs.shape == phase.shape) or idx.ndim != 1:
            raise SpecError("index, magnitude and phase arrays must be 1-d and aligned")
        if self.horizon < 0:
            raise SpecError("horizon must be nonnegative")
        if not (self.tail_bound >= 0.0):
            raise SpecError("tail_bound must be nonnegative")
        if np.any(np.isnan(logabs)) or np.any(logabs == math.inf):
            raise NumericalError("non-finite coefficient")
        if idx.size and (np.any(np.diff(idx) <= 0) or np.any(logabs == NEG_INF)):
            idx, logabs, phase = combine_groups(idx, logabs, phase)
        lo = -self.horizon if self.bilateral else 0
        if idx.size and (idx[0] < lo or idx[-1] > self.horizon):
            raise HorizonError(
                f"support [{idx[0]}, {idx[-1]}] outside [{lo}, {self.horizon}]"
            )
        object.__setattr__(self, "idx", _frozen(idx))
        object.__setattr__(self, "logabs", _frozen(logabs))
        object.__setattr__(self, "phase", _frozen(phase))
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "tail_bound", float(self.tail_bound))

    # construction -----------------------------------------------------------------

    @classmethod
    def zeros(cls, horizon: int, bilateral: bool = False) -> "TruncatedSeq":
        e = np.zeros(0)
        return cls(e.astype(np.int64), e, e.astype(complex), horizon, bilateral)

    @classmethod
    def basis(cls, n: int, horizon: int, bilateral: bool = False) -> "TruncatedSeq":
        return cls(np.array([n]), np.array([0.0]), np.array([1.0 + 0j]), horizon, bilateral)

    @classmethod
    def from_values(
        cls,
        values: Mapping[int, complex] | Iterable[complex],
        horizon: int,
        bilateral: bool = False,
        tail_bound: float = 0.0,
    ) -> "TruncatedSeq":
        """Build from a mapping ``index -> value`` or a list starting at index 0."""
        if isinstance(values, Mapping):
            keys = np.array(sorted(values), dtype=np.int64)
            vals = [complex(values[k]) for k in keys]
        else:
            vals = [complex(v) for v in values]
            keys = np.arange(len(vals), dtype=np.int64)
        logabs, phase = log_unit_arrays(vals)
        return cls(keys, logabs, phase, horizon, bilateral, tail_bound)

    @classmethod
    def from_log(cls, idx, logabs, phase, horizon, bilateral=False, tail_bound=0.0):
        """Build from log-domain triples; repeated indices are summed."""
        idx, logabs, phase = combine_groups(idx, logabs, phase)
        return cls(idx, logabs, phase, horizon, bilateral, tail_bound)

    # inspection -------------------------------------------------------------------

    @property
    def nnz(self) -> int:
        return int(self.idx.size)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in self.idx)

    def max_support(self) -> int | None:
        return int(self.idx[-1]) if self.idx.size else None

    def min_support(self) -> int | None:
        return int(self.idx[0]) if self.idx.size else None

    def is_exact_zero(self) -> bool:
        """True when nothing is stored and nothing was discarded."""
        return self.idx.size == 0 and self.tail_bound == 0.0

    def _index_map(self) -> dict:
        if self._lookup is None:
            object.__setattr__(self, "_lookup", {int(i): k for k, i in enumerate(self.idx)})
        return self._lookup

    def log_coeff(self, n: int) -> tuple[float, complex]:
        k = self._index_map().get(int(n))
        if k is None:
            return NEG_INF, 1.0 + 0j
        return float(self.logabs[k]), complex(self.phase[k])

    def coeff(self, n: int) -> complex:
        return from_log(*self.log_coeff(n))

    def values(self) -> np.ndarray:
        """Coefficients as ordinary complex numbers (tiny ones underflow to 0)."""
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(self.logabs) * self.phase

    def to_dict(self) -> dict[int, complex]:
        return {int(i): complex(v) for i, v in zip(self.idx, self.values())}

    def to_dense(self) -> np.ndarray:
        lo = -self.horizon if self.bilateral else 0
        out = np.zeros(self.horizon - lo + 1, dtype=complex)
        out[self.idx - lo] = self.values()
        return out

    def log_l1(self) -> float:
        return logsumexp(self.logabs)

    def log_sup(self) -> float:
        return float(self.logabs.max()) if self.idx.size else NEG_INF

    # arithmetic -------------------------------------------------------------------

    def _check_compatible(self, other: "TruncatedSeq") -> None:
        if self.horizon != other.horizon or self.bilateral != other.bilateral:
            raise SpecError(
                f"incompatible sequences: horizon {self.horizon}/{other.horizon}, "
                f"bilateral {self.bilateral}/{other.bilateral}"
            )

    def __add__(self, other: "TruncatedSeq") -> "TruncatedSeq":
        if not isinstance(other, TruncatedSeq):
            return NotImplemented
        self._check_compatible(other)
        return TruncatedSeq.from_log(
            np.concatenate([self.idx, other.idx]),
            np.concatenate([self.logabs, other.logabs]),
            np.concatenate([self.phase, other.phase]),
            self.horizon,
            self.bilateral,
            self.tail_bound + other.tail_bound,
        )

    def __neg__(self) -> "TruncatedSeq":
        return self._replace(phase=-self.phase)

    def __sub__(self, other: "TruncatedSeq") -> "TruncatedSeq":
        if not isinstance(other, TruncatedSeq):
            return NotImplemented
        return self + (-other)

    def scale(self, c: complex) -> "TruncatedSeq":
        la, ph = to_log(c)
        return self.scale_log(la, ph)

    def scale_log(self, logc: float, phase: complex = 1.0 + 0j) -> "TruncatedSeq":
        """Multiply by ``exp(logc) * phase``; the tail bound scales by ``exp(logc)``."""
        if logc == NEG_INF:
            return TruncatedSeq.zeros(self.horizon, self.bilateral)
        tail = self.tail_bound * math.exp(logc) if self.tail_bound else 0.0
        return self._replace(logabs=self.logabs + logc, phase=self.phase * phase, tail_bound=tail)

    def __mul__(self, c) -> "TruncatedSeq":
        if isinstance(c, (int, float, complex)):
            return self.scale(c)
        return NotImplemented

    __rmul__ = __mul__

    def with_tail(self, tail_bound: float) -> "TruncatedSeq":
        return self._replace(tail_bound=tail_bound)

    def with_horizon(self, horizon: int) -> "TruncatedSeq":
        return self._replace(horizon=horizon)

    def restrict(self, lo: int, hi: int) -> "TruncatedSeq":
        """Keep only coefficients with ``lo <= index <= hi`` (no tail accounting)."""
        m = (self.idx >= lo) & (self.idx <= hi)
        return self._replace(idx=self.idx[m], logabs=self.logabs[m], phase=self.phase[m])

    def _replace(self, **kw) -> "TruncatedSeq":
        args = dict(
            idx=self.idx,
            logabs=self.logabs,
            phase=self.phase,
            horizon=self.horizon,
            bilateral=self.bilateral,
            tail_bound=self.tail_bound,
        )
        args.update(kw)
        return TruncatedSeq(**args)

    def __repr__(self) -> str:
        head = ", ".join(f"{i}: {v:.3g}" for i, v in list(self.to_dict().items())[:6])
        more = ", ..." if self.nnz > 6 else ""
        return (
            f"TruncatedSeq({{{head}{more}}}, horizon={self.horizon}, "
            f"bilateral={self.bilateral}, tail_bound={self.tail_bound:.3g})"
        )

    # serialisation ----------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "horizon": self.horizon,
            "bilateral": self.bilateral,
            "tail_bound": self.tail_bound,
            "coeffs": [
                {"n": int(i), "logabs": float(la), "arg": float(np.angle(ph))}
                for i, la, ph in zip(self.idx, self.logabs, self.phase)
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "TruncatedSeq":
        horizon = int(data["horizon"])
        bilateral = bool(data.get("bilateral", False))
        tail = float(data.get("tail_bound", 0.0))
        if "values" in data:
            vals = data["values"]
            if isinstance(vals, Mapping):
                vals = {int(k): _parse_complex(v) for k, v in vals.items()}
            else:
                vals = [_parse_complex(v) for v in vals]
            return cls.from_values(vals, horizon, bilateral, tail)
        coeffs = data.get("coeffs", [])
        idx = np.array([int(c["n"]) for c in coeffs], dtype=np.int64)
        la = np.array([float(c["logabs"]) for c in coeffs], dtype=float)
        ph = np.exp(1j * np.array([float(c.get("arg", 0.0)) for c in coeffs], dtype=float))
        return cls.from_log(idx, la, ph, horizon, bilateral, tail)


def _parse_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, Mapping):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)
