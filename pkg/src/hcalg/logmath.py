"""Log-domain arithmetic helpers.

Coefficients are stored as ``(log|c|, c/|c|)`` pairs so that quantities such as
``2**-5000`` survive without underflow.
"""

from __future__ import annotations

import math

import numpy as np

NEG_INF = -math.inf
_EXP_MAX = 709.0


def logsumexp(values) -> float:
    """Return ``log(sum(exp(values)))``.

    Terms are scaled by the maximum, sorted ascending and summed with
    ``math.fsum`` so small contributions are not absorbed early.  Scaled terms
    below ``1e-20 / n`` are skipped: together they move the sum by less than
    one part in ``1e20``, well under double rounding.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        return NEG_INF
    top = float(arr.max())
    if top == NEG_INF or top == math.inf or math.isnan(top):
        return top
    terms = np.exp(arr - top)
    terms = np.sort(terms[terms > 1e-20 / arr.size])
    return top + math.log(math.fsum(terms))


def logmaxexp(values) -> float:
    arr = np.asarray(values, dtype=float).ravel()
    return float(arr.max()) if arr.size else NEG_INF


def safe_exp(x: float) -> float:
    """``exp`` that saturates to ``inf`` instead of raising."""
    if x > _EXP_MAX:
        return math.inf
    return math.exp(x)


def to_log(z) -> tuple[float, complex]:
    """Split a complex scalar into ``(log|z|, unit phase)``; zero maps to ``(-inf, 1)``."""
    z = complex(z)
    a = abs(z)
    if a == 0.0:
        return NEG_INF, 1.0 + 0j
    if not math.isfinite(a):
        raise ArithmeticError(f"non-finite value {z!r}")
    return math.log(a), z / a


def from_log(logabs: float, phase: complex) -> complex:
    if logabs == NEG_INF:
        return 0j
    return safe_exp(logabs) * phase


def log_unit_arrays(values) -> tuple[np.ndarray, np.ndarray]:
    vals = np.asarray(values, dtype=complex)
    mag = np.abs(vals)
    with np.errstate(divide="ignore", invalid="ignore"):
        logabs = np.where(mag > 0, np.log(np.where(mag > 0, mag, 1.0)), NEG_INF)
        phase = np.where(mag > 0, np.exp(1j * np.angle(vals)), 1.0 + 0j)
    return logabs.astype(float), phase.astype(complex)


def principal_power(logabs, phase, exponent):
    """Principal-branch power ``z**exponent`` applied to log-domain arrays.

    ``exponent`` is real.  The argument of ``phase`` is taken in ``(-pi, pi]``.
    """
    logabs = np.asarray(logabs, dtype=float)
    ang = np.angle(np.asarray(phase, dtype=complex))
    return logabs * exponent, np.exp(1j * ang * exponent)


def combine_groups(idx, logabs, phase):
    """Sum log-domain terms that share an index.

    Returns sorted unique indices with the combined ``(logabs, phase)``.  Terms
    that cancel exactly are dropped.
    """
    idx = np.asarray(idx, dtype=np.int64)
    logabs = np.asarray(logabs, dtype=float)
    phase = np.asarray(phase, dtype=complex)
    keep = logabs > NEG_INF
    idx, logabs, phase = idx[keep], logabs[keep], phase[keep]
    if idx.size == 0:
        return idx, logabs, phase
    order = np.argsort(idx, kind="stable")
    idx, logabs, phase = idx[order], logabs[order], phase[order]
    uniq, starts, counts = np.unique(idx, return_index=True, return_counts=True)
    if uniq.size == idx.size:
        return idx, logabs, phase
    top = np.maximum.reduceat(logabs, starts)
    scaled = phase * np.exp(logabs - np.repeat(top, counts))
    sums = np.add.reduceat(scaled, starts)
    mag = np.abs(sums)
    nz = mag > 0
    out_log = top[nz] + np.log(mag[nz])
    out_phase = sums[nz] / mag[nz]
    return uniq[nz], out_log, out_phase
