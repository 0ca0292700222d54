"""Bethe permanent by minimising the Bethe free energy over doubly stochastic matrices.

The minimiser is the fixed point the sum-product algorithm converges to. We
solve the equivalent convex program directly: a damped Newton method in the
null space of the row/column-sum constraints, started from the Sinkhorn
projection of A. Steps stop short of the boundary of the polytope, and the
best permutation vertex is compared at the end because for small n the
minimum can sit on the boundary (for 2 x 2 matrices the functional is linear
on the polytope).
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from .blockmat import as_matrix
from .errors import DomainError, InvalidSpec, NotConverged
from .logvalue import LogValue
from .sinkhorn import sinkhorn_scale


@dataclass(frozen=True)
class SpaOptions:
    max_iterations: int = 10000
    tolerance: float = 1e-12
    damping: float = 0.0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InvalidSpec("tolerance must be positive")
        if not 0 <= self.damping < 1:
            raise InvalidSpec("damping must lie in [0, 1)")
        if self.max_iterations < 1:
            raise InvalidSpec("max_iterations must be positive")


@dataclass(frozen=True, eq=False)
class BetheSolution:
    gamma: np.ndarray
    free_energy: float
    value: LogValue
    iterations: int
    converged: bool
    residual: float


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def _stochastic_residual(gamma):
    return float(max(np.max(np.abs(gamma.sum(axis=0) - 1)), np.max(np.abs(gamma.sum(axis=1) - 1))))


def bethe_free_energy(A, gamma, tol=1e-9):
    """sum_ij [g ln(g / a) - (1 - g) ln(1 - g)] with 0 ln 0 = 0."""
    A = as_matrix(A)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != A.shape:
        raise DomainError(f"gamma has shape {gamma.shape}, A has {A.shape}")
    if np.any(gamma < -tol) or np.any(gamma > 1 + tol):
        raise DomainError("gamma entries must lie in [0, 1]")
    if _stochastic_residual(gamma) > tol:
        raise DomainError("gamma is not doubly stochastic")
    gamma = np.clip(gamma, 0.0, 1.0)
    support = gamma > 0
    if np.any(A[support] <= 0):
        raise DomainError("gamma puts mass on a zero entry of A")
    energy = _xlogx(gamma).sum() - _xlogx(1 - gamma).sum()
    return float(energy - np.sum(gamma[support] * np.log(A[support])))


@lru_cache(maxsize=None)
def _null_basis(n):
    """Orthonormal basis of {X : row sums = col sums = 0}, as an (n*n, (n-1)^2) array."""
    C = np.zeros((2 * n, n * n))
    for i in range(n):
        C[i, i * n : (i + 1) * n] = 1
        C[n + i, i::n] = 1
    _, s, vt = np.linalg.svd(C)
    Z = vt[2 * n - 1 :].T.copy()
    Z.setflags(write=False)
    return Z


def _energy(logA, x):
    return float(np.sum(x * np.log(x)) - np.sum((1 - x) * np.log1p(-x)) - np.sum(x * logA))


def bethe_permanent(A, opts=None, raise_on_failure=False):
    """Bethe permanent exp(-min F) of a strictly positive matrix."""
    opts = opts or SpaOptions()
    A = as_matrix(A, positive=True)
    n = A.shape[0]
    if n == 1:
        g = np.ones((1, 1))
        f = -math.log(A[0, 0])
        return BetheSolution(g, f, LogValue(-f), 0, True, 0.0)

    # the best permutation vertex is feasible and handles boundary minima
    rows, cols = linear_sum_assignment(-np.log(A))
    vertex = np.zeros_like(A)
    vertex[rows, cols] = 1.0
    f_vertex = -float(np.sum(np.log(A[rows, cols])))

    logA = np.log(A).ravel()
    Z = _null_basis(n)
    x = sinkhorn_scale(A, tol=1e-14).U.ravel()
    f = _energy(logA, x)
    converged = False
    decrement = math.inf
    it = 0
    for it in range(1, opts.max_iterations + 1):
        grad = np.log(x) + np.log1p(-x) + 2 - logA
        curv = 1 / x - 1 / (1 - x)
        gz = Z.T @ grad
        H = Z.T @ (curv[:, None] * Z)
        evals, evecs = np.linalg.eigh(H)
        # keep the Newton step well defined where the reduced Hessian is not positive
        floor = max(1e-10 * np.max(np.abs(evals)), 1e-12)
        evals = np.maximum(np.abs(evals), floor)
        d = -Z @ (evecs @ ((evecs.T @ gz) / evals))
        decrement = float(-grad @ d)
        if decrement <= 0:
            d = -Z @ gz
            decrement = float(gz @ gz)
        if 0.5 * decrement <= opts.tolerance * max(1.0, abs(f)):
            converged = True
            break
        d *= 1.0 - opts.damping
        # fraction-to-boundary rule keeps every entry strictly inside (0, 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            lim_lo = np.where(d < 0, -x / d, np.inf)
            lim_hi = np.where(d > 0, (1 - x) / d, np.inf)
        step = min(1.0, 0.99 * float(min(lim_lo.min(), lim_hi.min())))
        accepted = False
        while step > 1e-16:
            xn = x + step * d
            if np.all(xn > 0) and np.all(xn < 1):
                fn = _energy(logA, xn)
                if fn <= f - 1e-4 * step * decrement:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            # no further decrease is representable; treat as stationary
            converged = True
            break
        x = xn
        f = fn
    gamma = x.reshape(n, n)
    residual = _stochastic_residual(gamma)
    if f_vertex <= f:
        gamma, f = vertex, f_vertex
        residual = 0.0
        converged = True
    if not converged and raise_on_failure:
        raise NotConverged(
            f"Bethe minimisation did not converge in {opts.max_iterations} iterations",
            last=gamma,
            residual=decrement,
            iterations=it,
        )
    return BetheSolution(gamma, f, LogValue(-f), it, converged, residual)
