"""Truncated multivariate power series and exact coefficient extraction.

Variables are ordered (t_1..t_m, u_1..u_m). A MultiPoly keeps every
coefficient with exponent vector bounded componentwise by ``bounds`` in a
dense array.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundsMismatch, NonzeroConstantTerm, NumericalFailure, TooLarge
from .logvalue import LogValue

MAX_LATTICE = 200_000
MAX_N = 12


@dataclass(eq=False)
class MultiPoly:
    bounds: tuple
    coeffs: np.ndarray

    def __post_init__(self):
        self.bounds = tuple(int(b) for b in self.bounds)
        shape = tuple(b + 1 for b in self.bounds)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != shape:
            raise BoundsMismatch(f"coefficient array {self.coeffs.shape} does not match bounds {self.bounds}")

    @classmethod
    def zeros(cls, bounds):
        return cls(bounds, np.zeros(tuple(int(b) + 1 for b in bounds)))

    @classmethod
    def constant(cls, bounds, c=1.0):
        p = cls.zeros(bounds)
        p.coeffs[(0,) * len(p.bounds)] = c
        return p

    @classmethod
    def monomial(cls, bounds, exponents, c=1.0):
        p = cls.zeros(bounds)
        exponents = tuple(int(e) for e in exponents)
        if len(exponents) != len(p.bounds):
            raise BoundsMismatch("exponent vector has the wrong length")
        if all(e <= b for e, b in zip(exponents, p.bounds)):
            p.coeffs[exponents] = c
        return p

    @classmethod
    def from_dict(cls, bounds, terms):
        p = cls.zeros(bounds)
        for exps, c in terms.items():
            p = p + cls.monomial(bounds, exps, c)
        return p

    def to_dict(self):
        idx = np.argwhere(self.coeffs != 0)
        return {tuple(int(v) for v in i): float(self.coeffs[tuple(i)]) for i in idx}

    def coefficient(self, exponents):
        exponents = tuple(int(e) for e in exponents)
        if any(e > b for e, b in zip(exponents, self.bounds)):
            raise BoundsMismatch(f"{exponents} lies outside bounds {self.bounds}")
        return float(self.coeffs[exponents])

    @property
    def constant_term(self):
        return float(self.coeffs[(0,) * len(self.bounds)])

    def _check(self, other):
        if not isinstance(other, MultiPoly) or other.bounds != self.bounds:
            raise BoundsMismatch("polynomials have different bounds")

    def __add__(self, other):
        self._check(other)
        return MultiPoly(self.bounds, self.coeffs + other.coeffs)

    def scale(self, c):
        return MultiPoly(self.bounds, self.coeffs * c)

    def evaluate(self, point):
        point = np.asarray(point, dtype=float)
        out = self.coeffs
        for axis in range(len(self.bounds) - 1, -1, -1):
            powers = point[axis] ** np.arange(self.bounds[axis] + 1)
            out = out @ powers
        return float(out)

    def nnz(self):
        return int(np.count_nonzero(self.coeffs))


def poly_mul_trunc(a, b):
    """Product of two MultiPolys with out-of-bounds monomials dropped."""
    a._check(b)
    if a.nnz() > b.nnz():
        a, b = b, a
    out = np.zeros_like(b.coeffs)
    shape = b.coeffs.shape
    for idx in np.argwhere(a.coeffs != 0):
        idx = tuple(int(i) for i in idx)
        src = tuple(slice(0, s - i) for s, i in zip(shape, idx))
        dst = tuple(slice(i, s) for s, i in zip(shape, idx))
        out[dst] += a.coeffs[idx] * b.coeffs[src]
    return MultiPoly(a.bounds, out)


def poly_exp_trunc(p):
    """exp(p) truncated to the bounds; p must have zero constant term."""
    if p.constant_term != 0:
        raise NonzeroConstantTerm("exp needs a series with zero constant term")
    result = MultiPoly.constant(p.bounds)
    term = MultiPoly.constant(p.bounds)
    # every monomial of p has total degree >= 1
    for j in range(1, sum(p.bounds) + 1):
        term = poly_mul_trunc(term, p).scale(1.0 / j)
        if not np.any(term.coeffs):
            break
        result = result + term
    return result


def _kernel_entries(B, bounds):
    """Symbolic W = B^T diag(t) B diag(u) as an m x m grid of MultiPolys."""
    m = B.shape[0]
    W = [[MultiPoly.zeros(bounds) for _ in range(m)] for _ in range(m)]
    for a in range(m):
        for b in range(m):
            for i in range(m):
                e = [0] * (2 * m)
                e[i] = 1
                e[m + b] = 1
                W[a][b] = W[a][b] + MultiPoly.monomial(bounds, e, B[i, a] * B[i, b])
    return W


def trace_power_polys(B, bounds, hmax):
    """[tr(W^1), ..., tr(W^hmax)] as truncated MultiPolys."""
    B = np.asarray(B, dtype=float)
    m = B.shape[0]
    W = _kernel_entries(B, bounds)
    power = W
    traces = []
    for h in range(1, hmax + 1):
        if h > 1:
            nxt = [[MultiPoly.zeros(bounds) for _ in range(m)] for _ in range(m)]
            for a in range(m):
                for b in range(m):
                    acc = nxt[a][b]
                    for c in range(m):
                        acc = acc + poly_mul_trunc(W[c][b], power[a][c])
                    nxt[a][b] = acc
            power = nxt
        tr = MultiPoly.zeros(bounds)
        for a in range(m):
            tr = tr + power[a][a]
        traces.append(tr)
    return traces


def gibbs_weights(hmax):
    return [1.0 / h for h in range(1, hmax + 1)]


def bethe_weights(hmax):
    return [1.0] + [1.0 / (2 * h) for h in range(2, hmax + 1)]


def _check_size(spec):
    lattice = math.prod(k + 1 for k in spec.k) * math.prod(l + 1 for l in spec.l)
    if spec.n > MAX_N or lattice > MAX_LATTICE:
        raise TooLarge(f"coefficient lattice of size {lattice} (n={spec.n}) is too large")


def trace_exp_coefficient(spec, weights, hmax=None):
    """[t^k u^l] exp(sum_h weights[h-1] tr(W^h)) for the spec's base matrix.

    B is rescaled to unit maximum first; every monomial t^k u^l carries
    2n factors of B, so the coefficient scales back by c^(2n).
    Truncating at h = n is exact because tr(W^h) has t-degree h.
    """
    _check_size(spec)
    if hmax is None:
        hmax = spec.n
    if callable(weights):
        weights = weights(hmax)
    if len(weights) < hmax:
        raise ValueError("need one weight per power")
    c = float(spec.B.max())
    bounds = spec.k + spec.l
    traces = trace_power_polys(spec.B / c, bounds, hmax)
    p = MultiPoly.zeros(bounds)
    for w, tr in zip(weights, traces):
        p = p + tr.scale(w)
    coef = poly_exp_trunc(p).coefficient(bounds)
    if not coef > 0:
        raise NumericalFailure(f"extracted coefficient {coef!r} is not positive")
    return LogValue(math.log(coef) + 2 * spec.n * math.log(c))


def gibbs_coefficient(spec, hmax=None):
    """[t^k u^l] exp(sum_h tr(W^h) / h)."""
    return trace_exp_coefficient(spec, gibbs_weights, hmax)


def bethe_coefficient(spec, hmax=None):
    """[t^k u^l] exp(tr(W) + sum_{h>=2} tr(W^h) / (2h))."""
    return trace_exp_coefficient(spec, bethe_weights, hmax)


def log_multiplicity(spec):
    """log(k! l!) with multi-index factorials."""
    return sum(math.lgamma(x + 1) for x in spec.k + spec.l)


def permanent_from_gibbs(spec):
    """perm(A) recovered as sqrt(k! l! Z_Gibbs)."""
    return LogValue(0.5 * (gibbs_coefficient(spec).log + log_multiplicity(spec)))


def bethe2_from_series(spec):
    """perm_B2(A) recovered as sqrt(k! l! Z_Bethe)."""
    return LogValue(0.5 * (bethe_coefficient(spec).log + log_multiplicity(spec)))
