"""Result container shared by every witness construction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from ..errors import HorizonError, SpecError
from ..logmath import log_unit_arrays
from ..seq import TruncatedSeq

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"


def check_entry(value: float, bound: float, tail: float = 0.0, note: str | None = None) -> dict:
    """A conservative ``value + tail < bound`` test, stored as plain data."""
    value, tail = float(value), float(tail)
    out = {"value": value, "tail": tail, "bound": float(bound), "pass": bool(value + tail < bound)}
    if note:
        out["note"] = note
    return out


def exact_entry(ok: bool, note: str | None = None) -> dict:
    out = {"exact": True, "pass": bool(ok)}
    if note:
        out["note"] = note
    return out


@dataclass
class Witness:
    """A constructed witness together with what the construction predicts.

    ``predicted`` maps a label (usually a multi-index) to the vector that the
    proof says ``T^N(u^alpha)`` equals.  ``checks`` holds named inequality
    tests run during construction; ``inconclusive`` lists reasons why some
    claim could not be settled at the available horizon.
    """

    kind: str
    u: list[TruncatedSeq]
    N: int | None
    params: dict[str, Any] = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)
    checks: dict[str, dict] = field(default_factory=dict)
    inconclusive: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)
    tail_fn: Callable[[int, Any], float] | None = field(default=None, repr=False)

    def orbit_tail(self, steps: int, label=None) -> float:
        """Bound on the discarded part of ``T^steps(u^label)``; 0 when nothing was discarded."""
        if self.tail_fn is None:
            return math.inf if any(x.tail_bound for x in self.u) else 0.0
        return float(self.tail_fn(int(steps), label))

    @property
    def status(self) -> str:
        if any(not c["pass"] for c in self.checks.values()):
            return FAIL
        if self.inconclusive:
            return INCONCLUSIVE
        return PASS

    def to_json(self) -> dict:
        def key(k):
            return ",".join(str(v) for v in k) if isinstance(k, tuple) else str(k)

        return {
            "kind": self.kind,
            "N": self.N,
            "status": self.status,
            "params": _jsonable(self.params),
            "u": [x.to_json() for x in self.u],
            "predicted": {key(k): v.to_json() for k, v in self.predicted.items()},
            "checks": _jsonable(self.checks),
            "inconclusive": list(self.inconclusive),
            "extra": _jsonable(self.extra),
        }


def _jsonable(obj):
    if isinstance(obj, TruncatedSeq):
        return obj.to_json()
    if isinstance(obj, Mapping):
        return {
            (",".join(str(v) for v in k) if isinstance(k, tuple) else str(k)): _jsonable(v)
            for k, v in obj.items()
        }
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return obj


# small helpers used across the constructions ---------------------------------------


def target_arrays(y: TruncatedSeq) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(l, log|y_l|, phase)`` over the stored support of ``y``."""
    return y.idx.copy(), y.logabs.copy(), y.phase.copy()


def as_seq(v, horizon: int, bilateral: bool = False) -> TruncatedSeq:
    """Accept a ``TruncatedSeq``, a mapping or a list and return a ``TruncatedSeq``."""
    if isinstance(v, TruncatedSeq):
        if v.horizon == horizon and v.bilateral == bilateral:
            return v
        if v.bilateral != bilateral:
            raise SpecError("bilaterality mismatch")
        m = v.max_support()
        if m is not None and m > horizon:
            raise HorizonError(f"support reaches {m}, past horizon {horizon}")
        return v.with_horizon(horizon)
    return TruncatedSeq.from_values(v, horizon, bilateral)


def support_max(*xs: TruncatedSeq) -> int:
    """Largest stored index over several sequences (``-1`` when all are empty)."""
    vals = [x.max_support() for x in xs if x.nnz]
    return max(vals) if vals else -1


__all__ = [
    "PASS",
    "FAIL",
    "INCONCLUSIVE",
    "Witness",
    "check_entry",
    "exact_entry",
    "target_arrays",
    "as_seq",
    "support_max",
    "log_unit_arrays",
]
