"""Products, powers and polynomials on truncated sequences, plus free generators."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NumericalError, SpecError
from .logmath import logsumexp, safe_exp
from .seq import TruncatedSeq, _parse_complex
from .spaces import SpaceSpec

PRODUCTS = ("coordinatewise", "cauchy")


def _product_tail(x: TruncatedSeq, y: TruncatedSeq, kind: str) -> float:
    if not (x.tail_bound or y.tail_bound):
        return 0.0
    if kind == "coordinatewise":
        # stored parts live inside the horizon and tails outside, so cross terms vanish
        return x.tail_bound * y.tail_bound
    # ||(x+s)(y+t) - xy|| <= ||x|| ||t|| + ||s|| ||y|| + ||s|| ||t|| in l1
    nx, ny = safe_exp(x.log_l1()), safe_exp(y.log_l1())
    return nx * y.tail_bound + x.tail_bound * ny + x.tail_bound * y.tail_bound


def product(x: TruncatedSeq, y: TruncatedSeq, kind: str = "coordinatewise") -> TruncatedSeq:
    """Coordinatewise product ``x_n y_n`` or Cauchy product ``sum_k x_k y_{n-k}``.

    Cauchy products keep the common horizon; coefficients pushed past it are
    dropped and their l1 mass is added to ``tail_bound``.
    """
    x._check_compatible(y)
    tail = _product_tail(x, y, kind)
    if kind == "coordinatewise":
        common, ix, iy = np.intersect1d(x.idx, y.idx, assume_unique=True, return_indices=True)
        return TruncatedSeq(
            common,
            x.logabs[ix] + y.logabs[iy],
            x.phase[ix] * y.phase[iy],
            x.horizon,
            x.bilateral,
            tail,
        )
    if kind != "cauchy":
        raise SpecError(f"unknown product {kind!r}")
    if x.bilateral:
        raise SpecError("Cauchy product is defined on unilateral sequences only")
    if x.nnz == 0 or y.nnz == 0:
        return TruncatedSeq.zeros(x.horizon).with_tail(tail)
    idx = (x.idx[:, None] + y.idx[None, :]).ravel()
    la = (x.logabs[:, None] + y.logabs[None, :]).ravel()
    ph = (x.phase[:, None] * y.phase[None, :]).ravel()
    over = idx > x.horizon
    if over.any():
        tail += safe_exp(logsumexp(la[over]))
        keep = ~over
        idx, la, ph = idx[keep], la[keep], ph[keep]
    return TruncatedSeq.from_log(idx, la, ph, x.horizon, False, tail)


def power(x: TruncatedSeq, m: int, kind: str = "coordinatewise") -> TruncatedSeq:
    """``x**m`` for ``m >= 1`` by binary exponentiation."""
    if m < 1 or int(m) != m:
        raise SpecError("power needs an integer exponent >= 1")
    if kind == "coordinatewise":
        out = TruncatedSeq(x.idx, x.logabs * m, x.phase**m, x.horizon, x.bilateral, 0.0)
        if x.tail_bound:
            out = out.with_tail(x.tail_bound**m)
    else:
        out, base, k = None, x, int(m)
        while k:
            if k & 1:
                out = base if out is None else product(out, base, kind)
            k >>= 1
            if k:
                base = product(base, base, kind)
    if not np.all(np.isfinite(out.logabs)):
        raise NumericalError(f"power {m} overflowed")
    return out


def monomial(u: Sequence[TruncatedSeq], alpha: Sequence[int], kind: str) -> TruncatedSeq:
    """``u^alpha = prod_j u_j**alpha_j``; ``alpha`` must be nonzero."""
    if len(u) != len(alpha):
        raise SpecError("dimension mismatch between u and alpha")
    if not any(alpha):
        raise SpecError("the zero multi-index is not allowed")
    out = None
    for uj, aj in zip(u, alpha):
        if aj == 0:
            continue
        f = power(uj, int(aj), kind)
        out = f if out is None else product(out, f, kind)
    return out


@dataclass(frozen=True)
class Poly:
    """A polynomial without constant term in ``d`` variables.

    ``terms`` maps multi-indices (tuples of length ``d``) to coefficients.
    For ``d == 1`` plain integer exponents are accepted.
    """

    terms: Mapping[tuple[int, ...], complex]
    d: int = 1

    def __post_init__(self):
        clean = {}
        for alpha, c in dict(self.terms).items():
            a = (int(alpha),) if isinstance(alpha, (int, np.integer)) else tuple(int(v) for v in alpha)
            if len(a) != self.d:
                raise SpecError(f"multi-index {a} has wrong length for d={self.d}")
            if any(v < 0 for v in a) or not any(a):
                raise SpecError(f"multi-index {a} must be nonzero with nonnegative entries")
            c = complex(c)
            if c != 0:
                clean[a] = clean.get(a, 0) + c
        object.__setattr__(self, "terms", dict(sorted(clean.items())))

    @classmethod
    def monomials(cls, exponents: Iterable, d: int = 1) -> "Poly":
        return cls({e: 1.0 for e in exponents}, d)

    @property
    def support(self) -> list[tuple[int, ...]]:
        return list(self.terms)

    def degrees(self) -> list[int]:
        return sorted({sum(a) for a in self.terms})

    def coeff_of_degree(self, m: int) -> complex:
        """For one variable: the coefficient of ``z**m``."""
        return self.terms.get((m,), 0j)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "terms": [
                {"alpha": list(a), "re": c.real, "im": c.imag} for a, c in self.terms.items()
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "Poly":
        d = int(data.get("d", 1))
        terms = {}
        for t in data["terms"]:
            a = tuple(int(v) for v in t["alpha"])
            if "c" in t:
                c = _parse_complex(t["c"])
            else:
                c = complex(float(t.get("re", 0.0)), float(t.get("im", 0.0)))
            terms[a] = terms.get(a, 0) + c
        return cls(terms, d)


def eval_poly(P: Poly, u: Sequence[TruncatedSeq] | TruncatedSeq, kind: str = "coordinatewise") -> TruncatedSeq:
    """``sum_alpha P(alpha) u^alpha``."""
    if isinstance(u, TruncatedSeq):
        u = [u]
    if len(u) != P.d:
        raise SpecError(f"polynomial in {P.d} variables evaluated at {len(u)} sequences")
    out = TruncatedSeq.zeros(u[0].horizon, u[0].bilateral)
    for alpha, c in P.terms.items():
        out = out + monomial(u, alpha, kind).scale(c)
    return out


# free generators ------------------------------------------------------------------


def block_ends(horizon: int) -> np.ndarray:
    """Triangular block boundaries ``a_0 = 0``, ``a_n = a_{n-1} + n`` covering the horizon."""
    ends = [0]
    n = 1
    while ends[-1] <= horizon:  # the last block contains the horizon
        ends.append(ends[-1] + n)
        n += 1
    return np.array(ends, dtype=np.int64)


def block_minimum(b) -> np.ndarray:
    """``c_n = min of b over the triangular block containing n``."""
    return np.exp(_block_min_log(np.log(np.asarray(b, dtype=float))))


def default_log_b(spec: SpaceSpec, horizon: int) -> np.ndarray:
    """``log b_n`` for ``b_n = 2**-n / (1 + ||e_n||_n)``."""
    n = np.arange(horizon + 1)
    out = np.empty(horizon + 1)
    for k in n:
        lb = float(spec._log_basis_norm(np.array([k]), max(1, int(k)))[0])
        out[k] = -k * math.log(2.0) - np.logaddexp(0.0, lb)
    return out


@dataclass
class FreeGenerators:
    """Generators ``g_n = e_n + sum_k lambda_n**(n+k) c_{n+k} e_{n+k}`` and their data."""

    gens: list[TruncatedSeq]
    lambdas: list[float]
    log_c: np.ndarray
    seed: int | None

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "lambdas": self.lambdas,
            "log_c": [float(v) for v in self.log_c],
            "generators": [g.to_json() for g in self.gens],
        }


def free_generators(
    spec: SpaceSpec,
    count: int,
    horizon: int,
    seed: int | None = 0,
    b: Sequence[float] | None = None,
    lambdas: Sequence[float] | None = None,
) -> FreeGenerators:
    """Build ``count`` generators of a dense free algebra (coordinatewise product).

    ``b`` defaults to ``2**-n / (1 + ||e_n||_n)``; ``lambdas`` default to seeded
    uniform draws in ``(0.05, 0.95)``.  Independence of the draws is checked
    separately by :func:`vandermonde_certificate`.
    """
    if count < 1:
        raise SpecError("count must be positive")
    # c_n is the minimum over the whole block, which may extend past the horizon
    need = int(block_ends(horizon)[-1])
    if b is None:
        log_b = default_log_b(spec, need - 1)
    else:
        b = np.asarray(b, dtype=float)
        if len(b) < need or np.any(b[:need] <= 0) or np.any(b[:need] > 1.0):
            raise SpecError(f"b must have {need} entries in (0, 1] to cover the last block")
        log_b = np.log(b[:need])
    log_c = _block_min_log(log_b)[: horizon + 1]
    if lambdas is None:
        rng = np.random.default_rng(seed)
        lambdas = rng.uniform(0.05, 0.95, size=count)
    lambdas = [float(v) for v in lambdas]
    if len(lambdas) != count or any(not (0 < v < 1) for v in lambdas):
        raise SpecError("need one lambda in (0, 1) per generator")
    # discarded coefficients are below b_k, and sum_{k>L} b_k ||e_k||_q <= 2**-L for
    # q <= L with the default b; for a user b we bound with the supplied values
    if b is None:
        tail = 2.0**-horizon
    else:
        tail = float(np.sum(b[horizon + 1 :])) if len(b) > horizon + 1 else math.inf
    gens = []
    for n, lam in enumerate(lambdas):
        k = np.arange(n, horizon + 1)
        la = np.where(k == n, 0.0, k * math.log(lam) + log_c[k])
        gens.append(TruncatedSeq(k, la, np.ones(k.size, dtype=complex), horizon, spec.bilateral, tail))
    return FreeGenerators(gens, lambdas, log_c, seed)


def _block_min_log(log_b: np.ndarray) -> np.ndarray:
    # blocks cut by the end of the array use what is available
    ends = block_ends(len(log_b) - 1)
    c = np.empty_like(log_b)
    for lo, hi in zip(ends[:-1], ends[1:]):
        hi = min(hi, len(log_b))
        if lo < hi:
            c[lo:hi] = log_b[lo:hi].min()
    return c


@dataclass
class VandermondeCertificate:
    nodes: list[float]
    multi_indices: list[tuple[int, ...]]
    det_numeric: float
    det_product: float
    min_gap: float
    ok: bool

    def to_json(self) -> dict:
        return {
            "nodes": self.nodes,
            "multi_indices": [list(a) for a in self.multi_indices],
            "det_numeric": self.det_numeric,
            "det_product": self.det_product,
            "min_gap": self.min_gap,
            "ok": self.ok,
        }


def vandermonde_certificate(
    lambdas: Sequence[float],
    multi_indices: Sequence[Sequence[int]] | None = None,
    max_degree: int = 2,
    threshold: float = 1e-12,
) -> VandermondeCertificate:
    """Certify algebraic independence of the generators at small degrees.

    After scaling each column by its leading power the coefficient matrix of a
    vanishing linear combination becomes a Vandermonde matrix in the nodes
    ``lambda^alpha``.  Its determinant is computed both numerically and as the
    product of node differences.  The product is nonzero exactly when the
    nodes are distinct, so the certificate holds when the smallest node gap
    exceeds ``threshold`` and the two determinants agree.
    """
    p = len(lambdas)
    if multi_indices is None:
        multi_indices = [
            a for a in itertools.product(range(max_degree + 1), repeat=p) if 0 < sum(a) <= max_degree
        ]
    alphas = [tuple(int(v) for v in a) for a in multi_indices]
    nodes = [math.prod(l**e for l, e in zip(lambdas, a)) for a in alphas]
    q = len(nodes)
    V = np.vander(np.array(nodes), N=q, increasing=True).T
    det_numeric = float(np.linalg.det(V))
    det_product = math.prod(nodes[i] - nodes[j] for i in range(q) for j in range(i))
    gaps = [abs(nodes[i] - nodes[j]) for i in range(q) for j in range(i)]
    min_gap = min(gaps) if gaps else math.inf
    agree = math.isclose(abs(det_numeric), abs(det_product), rel_tol=1e-6, abs_tol=1e-300)
    ok = min_gap > threshold and det_product != 0.0 and agree
    return VandermondeCertificate(nodes, alphas, det_numeric, det_product, min_gap, ok)


def generator_power_distance(g: TruncatedSeq, n: int, p: int, spec: SpaceSpec, q: float = 1) -> float:
    """``||g**p - e_n||_q`` for a generator ``g`` with leading term ``e_n``."""
    from .spaces import seminorm

    diff = power(g, p) - TruncatedSeq.basis(n, g.horizon, g.bilateral)
    return seminorm(diff, spec, q) + diff.tail_bound
