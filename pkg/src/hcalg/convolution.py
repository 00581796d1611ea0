"""Convolution operators ``phi(D)`` on entire functions.

Entire functions are held as truncated Taylor series together with a majorant
``|a_n| <= C rho**n / n!`` valid for every ``n``.  The majorant is what makes the
dropped tails explicit: for the seminorm ``sum |a_n| q**n`` the part past the
horizon ``L`` is at most ``C (rho q)**(L+1) / (L+1)! * exp(rho q)``.

``phi`` is restricted to exponential polynomials ``sum alpha z**j exp(beta z)``,
which covers polynomials, ``P(z) e**z`` and ``1/2 e**z + e**(iz) - 1/4`` and
gives closed forms for values, Taylor coefficients and majorants.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import mpmath
import numpy as np
from scipy.special import gammaln

from .errors import BudgetExhausted, NumericalError, SpecError
from .shifts import tends_to_zero
from .witnesses.base import FAIL, INCONCLUSIVE, PASS, check_entry, exact_entry

CLOSED_FORMS = ("polynomial", "poly_times_exp", "exp", "half_exp_plus_exp_i_minus_quarter")
DEFAULT_TAYLOR_LEN = 30


# entire functions ------------------------------------------------------------------


@dataclass(frozen=True)
class EntireTrunc:
    """Taylor coefficients ``a_0..a_L`` with an exponential-type majorant.

    ``C, rho`` bound the exact function: ``|a_n| <= C rho**n / n!`` for all ``n``.
    ``err`` bounds the error of the stored coefficients in the same shape:
    ``|stored a_n - a_n| <= err rho**n / n!``.
    """

    taylor: np.ndarray
    C: float = 0.0
    rho: float = 0.0
    err: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.taylor, dtype=complex).ravel()
        if a.size == 0:
            raise SpecError("an entire function needs at least a_0")
        if not np.all(np.isfinite(a)):
            raise NumericalError("non-finite Taylor coefficient")
        a.setflags(write=False)
        object.__setattr__(self, "taylor", a)

    @property
    def L(self) -> int:
        return self.taylor.size - 1

    @classmethod
    def from_coeffs(cls, coeffs: Sequence[complex]) -> "EntireTrunc":
        """A polynomial; the majorant uses ``rho = 1``."""
        a = np.asarray(coeffs, dtype=complex)
        C = max(abs(a[n]) * math.factorial(n) for n in range(a.size)) if a.size else 0.0
        return cls(a, C=float(C), rho=1.0)

    def truncate(self, L: int) -> "EntireTrunc":
        if L > self.L:
            raise SpecError(f"cannot extend horizon {self.L} to {L}")
        return EntireTrunc(self.taylor[: L + 1], self.C, self.rho, self.err)

    def __add__(self, other: "EntireTrunc") -> "EntireTrunc":
        L = min(self.L, other.L)
        return EntireTrunc(self.taylor[: L + 1] + other.taylor[: L + 1],
                           self.C + other.C, max(self.rho, other.rho), self.err + other.err)

    def __sub__(self, other: "EntireTrunc") -> "EntireTrunc":
        return self + other.scale(-1.0)

    def scale(self, c: complex) -> "EntireTrunc":
        r = abs(c)
        return EntireTrunc(self.taylor * c, self.C * r, self.rho, self.err * r)

    def log_seminorm_stored(self, q: float = 1.0) -> float:
        """``log sum_{n<=L} |a_n| q**n`` over the stored coefficients."""
        mag = np.abs(self.taylor)
        nz = mag > 0
        if not nz.any():
            return -math.inf
        n = np.arange(self.L + 1)[nz]
        terms = np.log(mag[nz]) + n * math.log(q)
        top = terms.max()
        return float(top + math.log(math.fsum(np.exp(terms - top))))

    def seminorm_stored(self, q: float = 1.0) -> float:
        return math.exp(self.log_seminorm_stored(q))

    def tail_bound(self, q: float = 1.0) -> float:
        """Bound on ``sum_{n>L} |a_n| q**n`` from the majorant."""
        return _exp_tail(self.C, self.rho * q, self.L)

    def error_bound(self, q: float = 1.0) -> float:
        """Bound on ``sum_n |stored a_n - a_n| q**n``."""
        return self.err * math.exp(self.rho * q) if self.err else 0.0

    def seminorm_bounds(self, q: float = 1.0) -> tuple[float, float]:
        """``(stored norm, slack)``: the true seminorm lies within ``stored +- slack``."""
        return self.seminorm_stored(q), self.tail_bound(q) + self.error_bound(q)

    def to_json(self) -> dict:
        return {
            "L": self.L,
            "taylor": [{"re": float(z.real), "im": float(z.imag)} for z in self.taylor],
            "majorant": {"C": self.C, "rho": self.rho, "err": self.err},
        }


def _exp_tail(C: float, x: float, L: int) -> float:
    """``C * sum_{n>L} x**n/n! <= C x**(L+1)/(L+1)! e**x``."""
    if C == 0.0 or x == 0.0:
        return 0.0
    return C * math.exp((L + 1) * math.log(x) - math.lgamma(L + 2) + x)


def exp_vector(lam: complex, L: int) -> EntireTrunc:
    """``E(lam)(z) = exp(lam z)`` truncated at degree ``L``.

    >>> round(exp_vector(1, 5).taylor[3].real, 12)
    0.166666666667
    """
    if L < 0:
        raise SpecError("L must be nonnegative")
    lam = complex(lam)
    n = np.arange(L + 1)
    if lam == 0:
        a = np.zeros(L + 1, dtype=complex)
        a[0] = 1.0
    else:
        r, th = abs(lam), cmath.phase(lam)
        a = np.exp(n * math.log(r) - gammaln(n + 1) + 1j * n * th)
    return EntireTrunc(a, C=1.0, rho=abs(lam))


def cauchy_product(f: EntireTrunc, g: EntireTrunc) -> EntireTrunc:
    """Product of entire functions (Cauchy product of Taylor series) at the shared horizon."""
    L = min(f.L, g.L)
    a = np.convolve(f.taylor[: L + 1], g.taylor[: L + 1])[: L + 1]
    err = f.err * g.C + (f.C + f.err) * g.err
    return EntireTrunc(a, f.C * g.C, f.rho + g.rho, err)


def exp_sum(terms: Sequence[tuple[complex, complex]], L: int) -> EntireTrunc:
    """``sum coef * E(lam)`` for ``(coef, lam)`` pairs."""
    if not terms:
        return EntireTrunc(np.zeros(L + 1, dtype=complex))
    out = None
    for coef, lam in terms:
        t = exp_vector(lam, L).scale(coef)
        out = t if out is None else out + t
    return out


# the symbol phi ----------------------------------------------------------------------


@dataclass(frozen=True)
class PhiSpec:
    """An entire function ``phi(z) = sum alpha z**j exp(beta z)``.

    ``terms`` is a tuple of ``(alpha, j, beta)``.  ``taylor_len`` is the number
    ``K`` of Taylor coefficients beyond the constant used when ``phi(D)`` acts on
    a truncated series.
    """

    terms: tuple
    taylor_len: int = DEFAULT_TAYLOR_LEN
    closed_form: str = "exp_poly"
    poly: tuple = ()

    def __post_init__(self):
        terms = tuple((complex(a), int(j), complex(b)) for a, j, b in self.terms)
        if any(j < 0 for _, j, _ in terms):
            raise SpecError("powers of z must be nonnegative")
        if self.taylor_len < 1:
            raise SpecError("taylor_len must be at least 1")
        object.__setattr__(self, "terms", terms)
        c = self.taylor(max(self.taylor_len, 2 + max((j for _, j, _ in terms), default=0)))
        if not np.any(np.abs(c[1:]) > 0):
            raise SpecError("phi must be nonconstant")

    # constructors
    @classmethod
    def polynomial(cls, coeffs: Sequence[complex], taylor_len: int | None = None) -> "PhiSpec":
        coeffs = tuple(complex(c) for c in coeffs)
        K = taylor_len if taylor_len is not None else max(1, len(coeffs) - 1)
        return cls(tuple((c, j, 0) for j, c in enumerate(coeffs) if c != 0), K, "polynomial", coeffs)

    @classmethod
    def poly_times_exp(cls, coeffs: Sequence[complex], taylor_len: int = DEFAULT_TAYLOR_LEN) -> "PhiSpec":
        coeffs = tuple(complex(c) for c in coeffs)
        return cls(tuple((c, j, 1) for j, c in enumerate(coeffs) if c != 0), taylor_len, "poly_times_exp", coeffs)

    @classmethod
    def exp(cls, taylor_len: int = DEFAULT_TAYLOR_LEN) -> "PhiSpec":
        return cls(((1, 0, 1),), taylor_len, "exp")

    @classmethod
    def half_exp_plus_exp_i_minus_quarter(cls, taylor_len: int = DEFAULT_TAYLOR_LEN) -> "PhiSpec":
        return cls(((0.5, 0, 1), (1, 0, 1j), (-0.25, 0, 0)), taylor_len, "half_exp_plus_exp_i_minus_quarter")

    @classmethod
    def from_json(cls, data: Mapping) -> "PhiSpec":
        form = data.get("closed_form")
        K = data.get("taylor_len")
        kw = {} if K is None else {"taylor_len": int(K)}
        poly = [_complex(v) for v in data.get("poly", [])]
        if form == "polynomial":
            return cls.polynomial(poly, **kw)
        if form == "poly_times_exp":
            return cls.poly_times_exp(poly or [1], **kw)
        if form == "exp":
            return cls.exp(**kw)
        if form == "half_exp_plus_exp_i_minus_quarter":
            return cls.half_exp_plus_exp_i_minus_quarter(**kw)
        if form in (None, "exp_poly") and "terms" in data:
            terms = [(_complex(t["alpha"]), int(t["j"]), _complex(t["beta"])) for t in data["terms"]]
            return cls(tuple(terms), **kw)
        raise SpecError(f"unknown closed form {form!r}; expected one of {CLOSED_FORMS}")

    def to_json(self) -> dict:
        out = {"closed_form": self.closed_form, "taylor_len": self.taylor_len}
        if self.poly:
            out["poly"] = [{"re": c.real, "im": c.imag} for c in self.poly]
        if self.closed_form == "exp_poly":
            out["terms"] = [{"alpha": {"re": a.real, "im": a.imag}, "j": j, "beta": {"re": b.real, "im": b.imag}}
                            for a, j, b in self.terms]
        return out

    # evaluation
    def __call__(self, z: complex) -> complex:
        z = complex(z)
        return sum(a * z**j * cmath.exp(b * z) for a, j, b in self.terms)

    def log_abs(self, z: complex) -> float:
        v = abs(self(z))
        return math.log(v) if v > 0 else -math.inf

    def taylor(self, K: int | None = None) -> np.ndarray:
        """Taylor coefficients ``c_0..c_K``."""
        K = self.taylor_len if K is None else K
        c = np.zeros(K + 1, dtype=complex)
        k = np.arange(K + 1)
        for a, j, b in self.terms:
            i = k[j:] - j
            if b == 0:
                c[j] += a
                continue
            c[j:] += a * np.exp(i * np.log(b) - gammaln(i + 1))
        return c

    def majorant(self, r: float) -> float:
        """``sum_k |c_k| r**k`` bounded by ``sum |alpha| r**j exp(|beta| r)``."""
        return float(sum(abs(a) * r**j * math.exp(abs(b) * r) for a, j, b in self.terms))

    def majorant_tail(self, r: float, K: int | None = None) -> float:
        """Bound on ``sum_{k>K} |c_k| r**k``."""
        K = self.taylor_len if K is None else K
        total = 0.0
        for a, j, b in self.terms:
            if b == 0:
                if j > K:
                    total += abs(a) * r**j
                continue
            if j > K:
                total += abs(a) * r**j * math.exp(abs(b) * r)
            else:
                total += abs(a) * r**j * _exp_tail(1.0, abs(b) * r, K - j)
        return total

    def taylor_eval_mp(self, z: complex, rel: float = 1e-18) -> complex:
        """``sum c_k z**k`` summed term by term in extended precision.

        Independent of :meth:`__call__`: coefficients come from the Taylor
        expansion and the series is summed until the majorant of the remainder
        falls below ``rel`` times the partial sum.
        """
        z = complex(z)
        r = abs(z)
        bmax = max(abs(b) for _, _, b in self.terms)
        dps = 30 + int(bmax * r / math.log(10)) + 5
        with mpmath.workdps(dps):
            zm = mpmath.mpc(z.real, z.imag)
            total = mpmath.mpc(0)
            k = 0
            while True:
                ck = mpmath.mpc(0)
                for a, j, b in self.terms:
                    if k < j:
                        continue
                    i = k - j
                    bm = mpmath.mpc(b.real, b.imag)
                    ck += mpmath.mpc(a.real, a.imag) * (bm**i if i else 1) / mpmath.factorial(i)
                total += ck * zm**k
                k += 1
                if k > max(j for _, j, _ in self.terms) + 2 * bmax * r + 20:
                    tail = self.majorant_tail(r, k - 1) if r else 0.0
                    if tail <= rel * max(float(abs(total)), 1e-300) or tail == 0.0:
                        break
                if k > 100000:
                    raise NumericalError("Taylor evaluation did not converge")
            return complex(total)


def _complex(v) -> complex:
    if isinstance(v, Mapping):
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", "").replace("i", "j"))
    return complex(v)


def phi_of_D(phi: PhiSpec, f: EntireTrunc) -> EntireTrunc:
    """``(phi(D) f)_n = sum_{k<=K} c_k a_{n+k} (n+k)!/n!`` for ``n <= L - K``.

    Uses the first ``K + 1`` Taylor coefficients of ``phi`` (``K = taylor_len``)
    so every needed ``a_{n+k}`` is stored.  The dropped ``c_k`` with ``k > K``
    enter the error majorant.
    """
    K = phi.taylor_len
    if f.L < K:
        raise SpecError(f"phi(D) needs L >= K = {K}, got L = {f.L}")
    c = phi.taylor(K)
    H = f.L - K
    n = np.arange(H + 1)
    out = np.zeros(H + 1, dtype=complex)
    for k in range(K + 1):
        if c[k] == 0:
            continue
        ratio = np.exp(gammaln(n + k + 1) - gammaln(n + 1))
        out += c[k] * f.taylor[k : k + H + 1] * ratio
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite coefficient in phi(D) f")
    big = phi.majorant(f.rho)
    err = f.err * big + f.C * phi.majorant_tail(f.rho, K)
    return EntireTrunc(out, f.C * big, f.rho, err)


def eigen_tolerance(phi: PhiSpec, lam: complex, L: int, q: float = 1.0) -> float:
    """Explicit bound on ``||phi(D)E(lam) - phi(lam)E(lam)||_q`` from the dropped tails.

    Covers the coefficients computed by :func:`phi_of_D` (the Taylor tail of
    ``phi`` past ``K``) and the coefficients past its output horizon ``L - K``.
    """
    r = abs(complex(lam))
    H = L - phi.taylor_len
    return phi.majorant_tail(r) * math.exp(r * q) + _exp_tail(phi.majorant(r), r * q, H)


def eigen_residual(phi: PhiSpec, lam: complex, L: int, q: float = 1.0) -> dict:
    """Conservative value of ``||phi(D)E(lam) - phi(lam)E(lam)||_q`` at truncation ``L``."""
    E = exp_vector(lam, L)
    lhs = phi_of_D(phi, E)
    rhs = E.truncate(lhs.L).scale(phi(lam))
    diff = lhs.taylor - rhs.taylor
    stored = float(np.sum(np.abs(diff) * q ** np.arange(diff.size)))
    tol = eigen_tolerance(phi, lam, L, q)
    return {"lambda": {"re": complex(lam).real, "im": complex(lam).imag}, "stored": stored,
            "tolerance": tol, "value": stored + tol}


# condition (e) -------------------------------------------------------------------------


def condition_e_pairs(I: Sequence[int], m: int):
    """Every ``(n, d)`` with ``n in I``, ``0 <= d <= n`` and ``(n, d) != (m, m)``."""
    return [(n, d) for n in sorted(I) for d in range(n + 1) if (n, d) != (m, m)]


@dataclass
class ConditionECertificate:
    """Both sides of every inequality in the condition, in log form."""

    phi: PhiSpec
    I: tuple
    m: int
    a: complex
    b: complex
    log_phi_mb: float
    rows: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def min_margin(self) -> float:
        vals = [self.log_phi_mb] + [r["margin"] for r in self.rows]
        return float(min(vals))

    def holds(self, margin: float = 0.0) -> bool:
        return self.log_phi_mb > margin and all(r["margin"] > margin for r in self.rows)

    def to_json(self) -> dict:
        return {
            "phi": self.phi.to_json(),
            "I": list(self.I),
            "m": self.m,
            "a": {"re": self.a.real, "im": self.a.imag},
            "b": {"re": self.b.real, "im": self.b.imag},
            "log_abs_phi_mb": self.log_phi_mb,
            "abs_phi_mb": _exp_or_inf(self.log_phi_mb),
            "min_margin": self.min_margin,
            "rows": self.rows,
            "extra": self.extra,
        }


def _exp_or_inf(x: float) -> float:
    return math.exp(x) if x < 709 else math.inf


def condition_e_certificate(phi: PhiSpec, I: Sequence[int], m: int, a: complex, b: complex) -> ConditionECertificate:
    """Evaluate both sides of ``|phi(db+(n-d)a)| < |phi(mb)|**(d/m)`` for every pair.

    ``margin`` is ``log`` of the right side minus ``log`` of the left side.
    """
    I = tuple(sorted(set(int(n) for n in I)))
    if not I or min(I) < 1:
        raise SpecError("I must be a nonempty set of positive integers")
    if m not in I:
        raise SpecError("m must belong to I")
    a, b = complex(a), complex(b)
    lmb = phi.log_abs(m * b)
    rows = []
    for n, d in condition_e_pairs(I, m):
        z = d * b + (n - d) * a
        lhs = phi.log_abs(z)
        rhs = d / m * lmb
        rows.append({"n": n, "d": d, "point": {"re": z.real, "im": z.imag},
                     "log_lhs": lhs, "log_rhs": rhs, "margin": rhs - lhs})
    return ConditionECertificate(phi, I, m, a, b, lmb, rows)


def revalidate(cert: ConditionECertificate, rel: float = 1e-9) -> dict:
    """Recompute every certificate point with the Taylor series in extended precision.

    Passes when closed form and Taylor sum agree to ``rel`` at each point and
    the inequalities still hold with the Taylor values.
    """
    pts = [(cert.m, cert.m, cert.m * cert.b)] + [
        (r["n"], r["d"], r["d"] * cert.b + (r["n"] - r["d"]) * cert.a) for r in cert.rows
    ]
    worst = 0.0
    vals = {}
    for n, d, z in pts:
        closed = cert.phi(z)
        series = cert.phi.taylor_eval_mp(z)
        dev = abs(closed - series) / max(abs(series), 1e-300)
        worst = max(worst, dev)
        vals[(n, d)] = abs(series)
    lmb = math.log(vals[(cert.m, cert.m)])
    holds = lmb > 0 and all(
        math.log(vals[(r["n"], r["d"])]) < r["d"] / cert.m * lmb if vals[(r["n"], r["d"])] > 0 else True
        for r in cert.rows
    )
    return {"max_rel_deviation": worst, "rel_tol": rel, "agree": worst <= rel, "holds_with_taylor": holds,
            "pass": bool(worst <= rel and holds)}


@dataclass(frozen=True)
class SearchGrid:
    """Candidate ``(a, b)`` pairs for the condition-(e) search.

    ``lattice``: ``a = k * a_unit``, ``b = k * b_unit`` for ``k = 1..k_max``.
    ``box``: ``a`` and ``b`` each range over a ``steps x steps`` grid of the
    rectangle ``re x im``; at most ``budget`` pairs are tried per ``m``.
    """

    kind: str = "lattice"
    a_unit: complex = 2j * math.pi
    b_unit: complex = 2 * math.pi
    k_max: int = 3
    re: tuple = (-3.0, 3.0)
    im: tuple = (-3.0, 3.0)
    steps: int = 7
    budget: int = 10000
    margin: float = 1e-6
    m_order: str = "desc"

    def __post_init__(self):
        if self.kind not in ("lattice", "box"):
            raise SpecError(f"unknown grid kind {self.kind!r}")
        if self.m_order not in ("desc", "asc"):
            raise SpecError("m_order must be 'desc' or 'asc'")

    def candidates(self):
        if self.kind == "lattice":
            for k in range(1, self.k_max + 1):
                yield {"k": k}, k * complex(self.a_unit), k * complex(self.b_unit)
            return
        xs = np.linspace(self.re[0], self.re[1], self.steps)
        ys = np.linspace(self.im[0], self.im[1], self.steps)
        pts = [complex(x, y) for x in xs for y in ys]
        for a, b in itertools.product(pts, pts):
            yield {}, a, b

    @classmethod
    def from_json(cls, data: Mapping) -> "SearchGrid":
        kw = dict(data)
        for key in ("a_unit", "b_unit"):
            if key in kw:
                kw[key] = _complex(kw[key])
        for key in ("re", "im"):
            if key in kw:
                kw[key] = tuple(float(v) for v in kw[key])
        return cls(**kw)

    def to_json(self) -> dict:
        out = {k: getattr(self, k) for k in ("kind", "k_max", "steps", "budget", "margin", "m_order")}
        out["a_unit"] = {"re": complex(self.a_unit).real, "im": complex(self.a_unit).imag}
        out["b_unit"] = {"re": complex(self.b_unit).real, "im": complex(self.b_unit).imag}
        out["re"], out["im"] = list(self.re), list(self.im)
        return out


def search_condition_e(phi: PhiSpec, I: Sequence[int], grid: SearchGrid | None = None) -> ConditionECertificate:
    """First ``(m, a, b)`` on the grid where every inequality holds with margin ``grid.margin``.

    Raises :class:`BudgetExhausted` when no candidate qualifies; that is not a
    proof that none exists.

    >>> c = search_condition_e(PhiSpec.half_exp_plus_exp_i_minus_quarter(), [1, 2, 3])
    >>> c.m, c.extra["k"]
    (3, 1)
    """
    grid = grid or SearchGrid()
    I = sorted(set(int(n) for n in I))
    if not I:
        raise SpecError("I must be nonempty")
    order = sorted(I, reverse=grid.m_order == "desc")
    tried = 0
    for m in order:
        for count, (info, a, b) in enumerate(grid.candidates()):
            if count >= grid.budget:
                break
            tried += 1
            cert = condition_e_certificate(phi, I, m, a, b)
            if cert.holds(grid.margin):
                cert.extra.update(info)
                cert.extra.update({"tried": tried, "grid": grid.to_json()})
                return cert
    raise BudgetExhausted(f"no (m, a, b) with margin {grid.margin} among {tried} candidates")


# rays ------------------------------------------------------------------------------------


@dataclass
class RayScan:
    v: complex
    t: np.ndarray
    abs_phi: np.ndarray
    t0: float | None
    t_max: float

    def to_json(self) -> dict:
        return {"v": {"re": self.v.real, "im": self.v.imag}, "t0": self.t0, "t_max": self.t_max,
                "samples": len(self.t), "max_abs_phi": float(self.abs_phi.max())}


def ray_scan(phi: PhiSpec, v: complex, t_max: float = 20.0, steps: int = 4001) -> RayScan:
    """Sample ``|phi(t v)|`` on ``[0, t_max]`` and locate ``t_0``.

    ``t_0`` is the smallest sampled ``t`` beyond which every sample is at most
    1, refined by bisection on ``|phi| = 1`` against the last sample above 1.
    ``None`` when no sample exceeds 1 or the final sample exceeds 1.
    """
    v = complex(v)
    t = np.linspace(0.0, t_max, steps)
    vals = np.array([abs(phi(s * v)) for s in t])
    above = np.nonzero(vals > 1.0)[0]
    if above.size == 0 or above[-1] == steps - 1:
        return RayScan(v, t, vals, None, t_max)
    i = above[-1]
    lo, hi = t[i], t[i + 1]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if abs(phi(mid * v)) > 1.0:
            lo = mid
        else:
            hi = mid
    return RayScan(v, t, vals, hi, t_max)


def wellbehaved_search(phi: PhiSpec, v: complex, I: Sequence[int], eps: float = 0.4, a_steps: int = 401,
                       margin: float = 1e-9, t_max: float | None = None) -> ConditionECertificate:
    """Certificate for the condition from a ray where ``|phi|`` drops to at most 1 for good.

    ``m = min(I)``, ``b = t_1 v / m`` with ``t_1`` just below ``t_0``, and ``a``
    scanned along ``[a_0 - eps, a_0 + eps] v`` with ``a_0 = t_0 + 2 eps``.

    >>> c = wellbehaved_search(PhiSpec.poly_times_exp([2, 1]), -1, [1, 2])
    >>> round(c.extra["t0"], 4), c.m
    (0.4429, 1)
    """
    I = sorted(set(int(n) for n in I))
    if not I or I[0] < 1:
        raise SpecError("I must be a nonempty set of positive integers")
    if not (0 < eps < 0.5):
        raise SpecError("eps must lie in (0, 1/2)")
    v = complex(v)
    if v == 0:
        raise SpecError("v must be nonzero")
    m, top = I[0], I[-1]
    a0 = None
    t_hi = t_max
    scan = None
    for _ in range(4):
        scan = ray_scan(phi, v, t_max=t_hi or 20.0)
        if scan.t0 is None:
            raise SpecError(f"no t0 along v={v}: |phi(tv)| never exceeds 1 then settles at or below 1 on the scanned ray")
        a0 = scan.t0 + 2 * eps
        need = top * (a0 + eps) * 1.05
        if need <= scan.t_max:
            break
        t_hi = need
    if top * (a0 + eps) > scan.t_max:
        raise SpecError("ray scan does not cover the points the certificate needs")
    t0 = scan.t0
    gap = t0 / (m + 1)
    t1 = None
    tau = gap / 2
    for _ in range(60):
        cand = t0 - tau
        if abs(phi(cand * v)) > 1.0 and cand + cand / m > t0:
            t1 = cand
            break
        tau /= 2
    if t1 is None:
        raise SpecError("no t1 below t0 with |phi(t1 v)| > 1")
    b = t1 / m * v
    for a_real in np.linspace(a0 - eps, a0 + eps, a_steps):
        a = a_real * v
        ok = all(phi.log_abs(d * b + (n - d) * a) < -margin for n, d in condition_e_pairs(I, m))
        if not ok:
            continue
        cert = condition_e_certificate(phi, I, m, a, b)
        if cert.holds(margin):
            cert.extra.update({"t0": t0, "t1": t1, "a0": a0, "eps": eps, "scan": scan.to_json()})
            return cert
    raise BudgetExhausted("no a in the scanned interval satisfies every inequality")


# convexity along segments -----------------------------------------------------------------


def convexity_sampler(phi: PhiSpec, w1: complex, w2: complex, samples: int = 9) -> dict:
    """Midpoint test of strict convexity for ``t -> log|phi(t w1 + (1-t) w2)|``.

    Checks ``g((t+s)/2) < (g(t) + g(s))/2`` on every pair of distinct grid
    points ``t, s`` in ``[0, 1]`` and reports the smallest margin.
    """
    ts = np.linspace(0.0, 1.0, samples)
    g = {float(t): phi.log_abs(t * w1 + (1 - t) * w2) for t in ts}
    worst = math.inf
    scale = max(1.0, max(abs(x) for x in g.values() if math.isfinite(x)) if g else 1.0)
    pairs = 0
    for t, s in itertools.combinations(ts, 2):
        mid = phi.log_abs(0.5 * (t + s) * w1 + (1 - 0.5 * (t + s)) * w2)
        worst = min(worst, 0.5 * (g[float(t)] + g[float(s)]) - mid)
        pairs += 1
    floor = 64 * np.finfo(float).eps * scale
    return {"w1": {"re": complex(w1).real, "im": complex(w1).imag},
            "w2": {"re": complex(w2).real, "im": complex(w2).imag},
            "pairs": pairs, "min_margin": float(worst), "floor": float(floor), "pass": bool(worst > floor)}


def convex_direction(phi: PhiSpec, w0: complex, radius: float, angles: int = 24, samples: int = 9) -> dict:
    """Direction ``theta`` making ``log|phi|`` strictly convex on ``[w0 - r e^{i theta}, w0 + r e^{i theta}]``.

    Returns the sampler report with the largest minimum margin.
    """
    best = None
    for th in np.linspace(0.0, math.pi, angles, endpoint=False):
        step = radius * cmath.exp(1j * th)
        rep = convexity_sampler(phi, w0 + step, w0 - step, samples)
        rep["theta"] = float(th)
        if best is None or rep["min_margin"] > best["min_margin"]:
            best = rep
    return best


# the witness u(N) -----------------------------------------------------------------------


@dataclass
class ExpTerm:
    """``exp(logc) * phase * E(mu)``; ``d`` counts the factors taken from the V part."""

    logc: float
    phase: complex
    mu: complex
    d: int
    diagonal: bool


def _principal_root(logabs: float, arg: float, m: int) -> tuple[float, float]:
    arg = math.remainder(arg, 2 * math.pi)
    if arg == -math.pi:
        arg = math.pi
    return logabs / m, arg / m


def _power_terms(base: list[tuple[float, float, complex, bool]], n: int) -> list[ExpTerm]:
    """Multinomial expansion of ``(sum c_i E(mu_i))**n``; ``base`` holds ``(log|c|, arg c, mu, from_V)``."""
    out = []
    for combo in itertools.combinations_with_replacement(range(len(base)), n):
        counts: dict[int, int] = {}
        for i in combo:
            counts[i] = counts.get(i, 0) + 1
        logc = math.lgamma(n + 1) - sum(math.lgamma(k + 1) for k in counts.values())
        arg = 0.0
        mu = 0j
        d = 0
        for i, k in counts.items():
            lc, ac, mi, from_v = base[i]
            logc += k * lc
            arg += k * ac
            mu += k * mi
            d += k if from_v else 0
        diagonal = d == n and len(counts) == 1
        out.append(ExpTerm(logc, cmath.exp(1j * arg), mu, d, diagonal))
    return out


def _apply_power(phi: PhiSpec, terms: Sequence[ExpTerm], N: int) -> list[ExpTerm]:
    """``phi(D)**N`` on exponential terms: multiply each coefficient by ``phi(mu)**N`` in log-polar form."""
    out = []
    for t in terms:
        val = phi(t.mu)
        if val == 0:
            continue
        lg = math.log(abs(val))
        ang = math.remainder(N * cmath.phase(val), 2 * math.pi)
        out.append(ExpTerm(t.logc + N * lg, t.phase * cmath.exp(1j * ang), t.mu, t.d, t.diagonal))
    return out


def _log_norm_bound(terms: Sequence[ExpTerm], q: float) -> float:
    """``log sum |c| e^{|mu| q}``: triangle bound on ``||sum c E(mu)||_q``."""
    if not terms:
        return -math.inf
    vals = np.array([t.logc + abs(t.mu) * q for t in terms])
    top = vals.max()
    return float(top + math.log(math.fsum(np.exp(vals - top))))


@dataclass
class ConvolutionWitness:
    kind: str
    phi: PhiSpec
    I: tuple
    m: int
    N: int
    c: list
    u_terms: list
    checks: dict
    series: dict
    params: dict
    inconclusive: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        if any(not c["pass"] for c in self.checks.values()):
            return FAIL
        return INCONCLUSIVE if self.inconclusive else PASS

    def u(self, L: int) -> EntireTrunc:
        return exp_sum([(cmath.exp(complex(t.logc, 0)) * t.phase, t.mu) for t in self.u_terms], L)

    def to_json(self) -> dict:
        from .witnesses.base import _jsonable

        return {
            "kind": self.kind,
            "status": self.status,
            "N": self.N,
            "m": self.m,
            "I": list(self.I),
            "phi": self.phi.to_json(),
            "c": [{"log_abs": lc, "arg": ac} for lc, ac in self.c],
            "u": [{"log_abs": t.logc, "phase": {"re": t.phase.real, "im": t.phase.imag},
                   "mu": {"re": t.mu.real, "im": t.mu.imag}} for t in self.u_terms],
            "checks": _jsonable(self.checks),
            "series": _jsonable(self.series),
            "params": _jsonable(self.params),
            "inconclusive": list(self.inconclusive),
            "extra": _jsonable(self.extra),
        }


def _delta_checks(phi: PhiSpec, I, m, a, b, delta, rng, samples):
    """Sampled versions of the three requirements on the radius ``delta``."""
    w0 = m * b
    ring = [w0 + r * cmath.exp(1j * th) for r in (delta, delta / 2)
            for th in np.linspace(0, 2 * math.pi, 16, endpoint=False)] + [w0]
    phi_min = min(abs(phi(z)) for z in ring)
    star_worst = math.inf
    for _ in range(samples):
        for n, d in condition_e_pairs(I, m):
            lam = w0 + delta * np.sqrt(rng.uniform(0, 1, d)) * np.exp(2j * math.pi * rng.uniform(0, 1, d))
            gam = a + delta * np.sqrt(rng.uniform(0, 1, n - d)) * np.exp(2j * math.pi * rng.uniform(0, 1, n - d))
            lhs = phi.log_abs(lam.sum() / m + gam.sum())
            rhs = sum(phi.log_abs(x) for x in lam) / m
            star_worst = min(star_worst, rhs - lhs)
    return phi_min, star_worst


def build_convolution_witness(
    phi: PhiSpec,
    I: Sequence[int],
    m: int,
    a: complex,
    b: complex,
    U_combo: Sequence[tuple[complex, complex]] | None = None,
    V_combo: Sequence[tuple[complex, complex]] | None = None,
    N: int = 10,
    L: int = 60,
    q: float = 1.0,
    tol: float = 1e-6,
    delta: float | None = None,
    seed: int = 0,
    samples: int = 64,
) -> ConvolutionWitness:
    """``u(N) = sum a_l E(gamma_l) + sum c_j E(lambda_j / m)`` with ``c_j**m = b_j / phi(lambda_j)**N``.

    ``U_combo`` is a list of ``(a_l, gamma_l)`` and ``V_combo`` of
    ``(b_j, lambda_j)``.  When omitted, ``U = E(a + delta/2)`` and ``V = E(mb)``.
    Several ``lambda_j`` must lie on the segment ``[w1, w2]`` through ``mb``
    along which ``log|phi|`` is strictly convex.  The radius ``delta`` is halved
    until the sampled requirements hold.

    ``phi(D)**N u**m`` splits into ``v1`` (some factor from ``U``), ``v2``
    (off-diagonal products of the ``c_j`` terms) and ``v3`` (diagonal), and
    ``phi(D)**N v3`` equals ``sum b_j E(lambda_j)``.  Norms are triangle bounds
    over the exponential terms and are tracked along ``N/8, N/4, ..., N``.
    """
    I = tuple(sorted(set(int(n) for n in I)))
    if m not in I:
        raise SpecError("m must belong to I")
    if N < 1:
        raise SpecError("N must be positive")
    a, b = complex(a), complex(b)
    w0 = m * b
    rng = np.random.default_rng(seed)
    cert = condition_e_certificate(phi, I, m, a, b)
    checks: dict[str, dict] = {"condition (e) at (a, b)": exact_entry(cert.holds(), f"min margin {cert.min_margin:.4g}")}

    # radius: shrink until |phi| > 1 near mb and the sampled star inequality holds
    r = delta if delta is not None else 0.25 * max(1e-3, min(1.0, abs(w0), cert.min_margin))
    for _ in range(40):
        phi_min, star = _delta_checks(phi, I, m, a, b, r, rng, samples)
        if phi_min > 1.0 and star > 0:
            break
        if delta is not None:
            break
        r /= 2
    checks["|phi| > 1 on B(mb, delta)"] = exact_entry(phi_min > 1.0, f"sampled min {phi_min:.6g}")
    checks["star inequality on sampled balls"] = exact_entry(star > 0, f"min log margin {star:.4g}")

    conv = convex_direction(phi, w0, r)
    w1 = complex(conv["w1"]["re"], conv["w1"]["im"])
    w2 = complex(conv["w2"]["re"], conv["w2"]["im"])
    checks["strict convexity on [w1, w2]"] = exact_entry(conv["pass"], f"min midpoint margin {conv['min_margin']:.3g}")
    if U_combo is None:
        U_combo = [(1.0, a + r / 2)]
    if V_combo is None:
        V_combo = [(1.0, w0)]
    U_combo = [(complex(x), complex(g)) for x, g in U_combo]
    V_combo = [(complex(x), complex(lam)) for x, lam in V_combo]
    in_U = all(abs(g - a) < r for _, g in U_combo)
    in_V = all(abs(lam - w0) < r for _, lam in V_combo)
    checks["gamma_l in B(a, delta)"] = exact_entry(in_U)
    checks["lambda_j in B(mb, delta)"] = exact_entry(in_V)
    seg = w1 - w2
    on_seg = all(abs(((lam - w2) / seg).imag) < 1e-9 and -1e-12 <= ((lam - w2) / seg).real <= 1 + 1e-12
                 for _, lam in V_combo)
    checks["lambda_j on [w1, w2]"] = exact_entry(on_seg)

    # coefficients c_j in log-polar form
    cs = []
    for bj, lam in V_combo:
        val = phi(lam)
        cs.append(_principal_root(math.log(abs(bj)) - N * math.log(abs(val)),
                                  cmath.phase(bj) - N * cmath.phase(val), m))
    base = [(math.log(abs(al)), cmath.phase(al), g, False) for al, g in U_combo]
    base += [(lc, ac, lam / m, True) for (lc, ac), (_, lam) in zip(cs, V_combo)]
    u_terms = _power_terms(base, 1)

    # star inequality at the actual points
    star_exact = math.inf
    for n, d in condition_e_pairs(I, m):
        for lams in itertools.combinations_with_replacement([lam for _, lam in V_combo], d):
            for gams in itertools.combinations_with_replacement([g for _, g in U_combo], n - d):
                z = sum(lams) / m + sum(gams)
                rhs = sum(phi.log_abs(x) for x in lams) / m
                star_exact = min(star_exact, rhs - phi.log_abs(z))
    checks["star inequality at chosen points"] = exact_entry(star_exact > 0, f"min log margin {star_exact:.4g}")

    # orbit norms along N' = N/8, ..., N with c_j fixed at N'
    grid = sorted({max(1, N >> s) for s in range(7, -1, -1)})
    series: dict[str, list] = {"N": grid, "u_minus_U": [], "v1": [], "v2": [], "v3_residual": []}
    for n in I:
        if n != m:
            series[f"T^N u^{n}"] = []
    for Np in grid:
        csN = []
        for bj, lam in V_combo:
            val = phi(lam)
            csN.append(_principal_root(math.log(abs(bj)) - Np * math.log(abs(val)),
                                       cmath.phase(bj) - Np * cmath.phase(val), m))
        baseN = base[: len(U_combo)] + [(lc, ac, lam / m, True) for (lc, ac), (_, lam) in zip(csN, V_combo)]
        cterms = _power_terms(baseN[len(U_combo):], 1)
        series["u_minus_U"].append(_exp_or_inf(_log_norm_bound(cterms, q)))
        for n in I:
            if n == m:
                continue
            series[f"T^N u^{n}"].append(_exp_or_inf(_log_norm_bound(_apply_power(phi, _power_terms(baseN, n), Np), q)))
        img = _apply_power(phi, _power_terms(baseN, m), Np)
        v1 = [t for t in img if t.d < m]
        v2 = [t for t in img if t.d == m and not t.diagonal]
        v3 = [t for t in img if t.diagonal]
        series["v1"].append(_exp_or_inf(_log_norm_bound(v1, q)))
        series["v2"].append(_exp_or_inf(_log_norm_bound(v2, q)))
        resid = 0.0
        scale = sum(abs(bj) * math.exp(abs(l) * q) for bj, l in V_combo)
        for t in v3:
            lam = t.mu
            target = next(bj for bj, l in V_combo if abs(l - lam) < 1e-12 * max(1.0, abs(lam)))
            resid += abs(math.exp(t.logc) * t.phase - target) * math.exp(abs(lam) * q)
        series["v3_residual"].append(resid / scale)
    for key, vals in series.items():
        if key in ("N", "v3_residual"):
            continue
        if key == "v2" and len(V_combo) < 2:
            continue
        checks[f"{key} tends to zero"] = exact_entry(tends_to_zero(vals, tol), f"last {vals[-1]:.3g}")
    checks["phi(D)^N v3 = sum b_j E(lambda_j)"] = check_entry(series["v3_residual"][-1], 1e-9, note="relative")

    # numeric cross-check of the exponential bookkeeping on truncated Taylor series (one step)
    extra = {"delta": r, "convexity": conv, "certificate": cert.to_json(), "w1": w1, "w2": w2,
             "U_combo": [{"a": x, "gamma": g} for x, g in U_combo],
             "V_combo": [{"b": x, "lambda": lam} for x, lam in V_combo]}
    base1 = base[: len(U_combo)]
    for bj, lam in V_combo:
        val = phi(lam)
        lc, ac = _principal_root(math.log(abs(bj)) - math.log(abs(val)), cmath.phase(bj) - cmath.phase(val), m)
        base1.append((lc, ac, lam / m, True))
    ok, info = _taylor_crosscheck(phi, _power_terms(base1, 1), m, L, q)
    extra["taylor_crosscheck"] = info
    inconclusive = []
    if info.get("skipped"):
        inconclusive.append(info["skipped"])
    else:
        checks["Taylor path agrees with exponential path"] = exact_entry(ok, f"diff {info['diff']:.3g} slack {info['slack']:.3g}")
    return ConvolutionWitness(
        kind="convolution",
        phi=phi,
        I=I,
        m=m,
        N=N,
        c=cs,
        u_terms=u_terms,
        checks=checks,
        series=series,
        params={"a": a, "b": b, "N": N, "L": L, "q": q, "tol": tol, "seed": seed, "samples": samples},
        inconclusive=inconclusive,
        extra=extra,
    )


def _taylor_crosscheck(phi: PhiSpec, u_terms: Sequence[ExpTerm], m: int, L: int, q: float) -> tuple[bool, dict]:
    """Compare ``phi(D)(u**m)`` built from truncated series with the exponential formula.

    Uses one application of ``phi(D)`` to ``u(1)``.  The Taylor length of
    ``phi`` is raised until its dropped tail is below ``1e-15`` of the majorant,
    and the horizon is at least ``L`` and twice that length.  The difference
    must stay within the truncation slack plus a forward rounding bound.
    """
    coefs = [(math.exp(t.logc) * t.phase, t.mu) for t in u_terms]
    coefs = [(c, mu) for c, mu in coefs if c != 0]
    if not coefs or not all(math.isfinite(abs(c)) for c, _ in coefs) or not any(abs(c) for c, _ in coefs):
        return False, {"skipped": "u coefficients out of floating range"}
    rho = m * max(abs(mu) for _, mu in coefs)
    K = phi.taylor_len
    while phi.majorant_tail(rho, K) > 1e-15 * phi.majorant(rho) and K < 4000:
        K *= 2
    wide = PhiSpec(phi.terms, K, phi.closed_form, phi.poly)
    Lx = max(L, 2 * K)
    u = exp_sum(coefs, Lx)
    um = u
    for _ in range(m - 1):
        um = cauchy_product(um, u)
    lhs = phi_of_D(wide, um)
    base = [(math.log(abs(c)), cmath.phase(c), mu, False) for c, mu in coefs]
    img = _apply_power(phi, _power_terms(base, m), 1)
    rhs = exp_sum([(math.exp(t.logc) * t.phase, t.mu) for t in img], lhs.L)
    diff = float(np.sum(np.abs(lhs.taylor - rhs.taylor) * q ** np.arange(lhs.L + 1)))
    ref = max(rhs.seminorm_stored(q), 1e-300)
    rounding = 64 * (K + 1) * np.finfo(float).eps * um.C * wide.majorant(um.rho) * math.exp(um.rho * q)
    slack = lhs.error_bound(q) + rounding
    slack = float(slack)
    ok = bool(diff <= slack)
    return ok, {"diff": diff, "slack": slack, "reference": ref, "rel": diff / ref, "K": K, "L": Lx, "pass": ok}


__all__ = [
    "EntireTrunc",
    "PhiSpec",
    "SearchGrid",
    "ConditionECertificate",
    "ConvolutionWitness",
    "exp_vector",
    "exp_sum",
    "cauchy_product",
    "phi_of_D",
    "eigen_tolerance",
    "eigen_residual",
    "condition_e_pairs",
    "condition_e_certificate",
    "revalidate",
    "search_condition_e",
    "ray_scan",
    "wellbehaved_search",
    "convexity_sampler",
    "convex_direction",
    "build_convolution_witness",
]
