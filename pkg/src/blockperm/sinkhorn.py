"""Sinkhorn scaling, the block fixed point and the saddle point it induces."""
import math
from dataclasses import dataclass

import numpy as np

from .blockmat import as_matrix
from .errors import NotConverged
from .logvalue import LogValue

DEFAULT_TOL = 1e-13
DEFAULT_MAX_ITER = 100000


@dataclass(frozen=True, eq=False)
class SinkhornResult:
    d1: np.ndarray
    d2: np.ndarray
    U: np.ndarray
    iterations: int
    residual: float


def _balance_gauge(d1, d2):
    # fix the common scalar so that prod(d1) == prod(d2)
    shift = (np.sum(np.log(d2)) - np.sum(np.log(d1))) / (d1.size + d2.size)
    g = math.exp(shift)
    return d1 * g, d2 / g


def sinkhorn_scale(A, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Scale a positive matrix to doubly stochastic form ``diag(d1) A diag(d2)``.

    Alternates column and row normalisation until every row and column sum
    is within ``tol`` of one. The scalar gauge is fixed by prod(d1) = prod(d2).
    """
    A = as_matrix(A, positive=True)
    n = A.shape[0]
    d1 = np.ones(n) / math.sqrt(A.sum() / n)
    d2 = np.ones(n)
    residual = math.inf
    for it in range(1, max_iter + 1):
        d2 = 1.0 / (A.T @ d1)
        d1 = 1.0 / (A @ d2)
        U = d1[:, None] * A * d2[None, :]
        residual = max(np.max(np.abs(U.sum(axis=0) - 1)), np.max(np.abs(U.sum(axis=1) - 1)))
        if residual <= tol:
            break
    else:
        d1, d2 = _balance_gauge(d1, d2)
        raise NotConverged(
            f"Sinkhorn did not reach tol={tol} in {max_iter} iterations",
            last=SinkhornResult(d1, d2, d1[:, None] * A * d2[None, :], max_iter, residual),
            residual=residual,
            iterations=max_iter,
        )
    d1, d2 = _balance_gauge(d1, d2)
    return SinkhornResult(d1, d2, d1[:, None] * A * d2[None, :], it, float(residual))


def fixed_point_residual(spec, vright, vleft):
    """Max absolute residual of the four families of block equations.

    Checks the two fixed-point equations and the two saddle-point
    definitions ``lambda_1 = 1`` seen from each side, written as
    ``V_right * (B l V_left) = 1`` and ``V_left * (B^T k V_right) = 1``.
    """
    B = spec.B
    k = np.asarray(spec.k, dtype=float)
    l = np.asarray(spec.l, dtype=float)
    r1 = vright - 1.0 / (B @ (l * vleft))
    r2 = vleft - 1.0 / (B.T @ (k * vright))
    r3 = vright * (B @ (l * vleft)) - 1.0
    r4 = vleft * (B.T @ (k * vright)) - 1.0
    return float(max(np.max(np.abs(r)) for r in (r1, r2, r3, r4)))


def block_fixed_point(spec, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Type-level Sinkhorn factors (V_right, V_left) on the m x m system.

    Solves V_right_i = 1 / sum_j l_j b_ij V_left_j and
    V_left_j = 1 / sum_i k_i b_ij V_right_i, with the gauge
    prod V_right^k = prod V_left^l. Cost does not depend on n.
    """
    B = spec.B
    k = np.asarray(spec.k, dtype=float)
    l = np.asarray(spec.l, dtype=float)
    vleft = np.full(spec.m, 1.0 / math.sqrt(spec.n * B.mean()))
    vright = 1.0 / (B @ (l * vleft))
    residual = math.inf
    for it in range(1, max_iter + 1):
        vleft = 1.0 / (B.T @ (k * vright))
        vright = 1.0 / (B @ (l * vleft))
        residual = float(np.max(np.abs(vleft * (B.T @ (k * vright)) - 1.0)))
        if residual <= tol:
            break
    else:
        raise NotConverged(
            f"block fixed point did not reach tol={tol} in {max_iter} iterations",
            last=(vright, vleft),
            residual=residual,
            iterations=max_iter,
        )
    shift = (np.dot(l, np.log(vleft)) - np.dot(k, np.log(vright))) / (2 * spec.n)
    g = math.exp(shift)
    return vright * g, vleft / g


@dataclass(frozen=True, eq=False)
class SaddlePoint:
    vright: np.ndarray
    vleft: np.ndarray
    tstar: np.ndarray
    ustar: np.ndarray
    residual: float

    @property
    def w(self):
        return np.concatenate([self.tstar, self.ustar])


def saddle_point(spec, tol=DEFAULT_TOL):
    """Critical point t_i = k_i V_right_i^2, u_j = l_j V_left_j^2."""
    vright, vleft = block_fixed_point(spec, tol=tol)
    k = np.asarray(spec.k, dtype=float)
    l = np.asarray(spec.l, dtype=float)
    return SaddlePoint(
        vright=vright,
        vleft=vleft,
        tstar=k * vright**2,
        ustar=l * vleft**2,
        residual=fixed_point_residual(spec, vright, vleft),
    )


def scaled_sinkhorn_permanent(A, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """e^-n prod(1/d1) prod(1/d2) from the Sinkhorn scalers of A."""
    res = sinkhorn_scale(A, tol=tol, max_iter=max_iter)
    n = res.d1.size
    return LogValue(-n - float(np.sum(np.log(res.d1))) - float(np.sum(np.log(res.d2))))


def scaled_sinkhorn_permanent_block(spec, tol=DEFAULT_TOL):
    """Same quantity computed from the type-level fixed point."""
    vright, vleft = block_fixed_point(spec, tol=tol)
    k = np.asarray(spec.k, dtype=float)
    l = np.asarray(spec.l, dtype=float)
    return LogValue(-spec.n - float(np.dot(k, np.log(vright))) - float(np.dot(l, np.log(vleft))))
