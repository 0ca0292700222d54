"""Transfer kernels, their spectra and the ratio predictions built on them."""
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum, DomainError, DomainWarning, InvalidSpec, NumericalFailure

RHO_CLAMP = 1.0 - 1e-12


@dataclass(frozen=True, eq=False)
class Kernels:
    W: np.ndarray
    S: np.ndarray
    t: np.ndarray
    u: np.ndarray


def _positive_vector(x, name, m):
    x = np.asarray(x, dtype=float)
    if x.shape != (m,):
        raise InvalidSpec(f"{name} must have length {m}")
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise InvalidSpec(f"{name} must be strictly positive")
    return x


def build_kernels(B, t, u):
    """W = B^T diag(t) B diag(u) and its symmetric twin S."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise InvalidSpec("B must be square")
    if np.any(~np.isfinite(B)) or np.any(B <= 0):
        raise InvalidSpec("B must be strictly positive")
    m = B.shape[0]
    t = _positive_vector(t, "t", m)
    u = _positive_vector(u, "u", m)
    K = B.T @ (t[:, None] * B)
    W = K * u[None, :]
    su = np.sqrt(u)
    S = su[:, None] * K * su[None, :]
    S = 0.5 * (S + S.T)
    return Kernels(W=W, S=S, t=t, u=u)


def jacobi_eigh(S, tol=1e-15, max_sweeps=100):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and unit eigenvectors as columns,
    each with its first nonzero component positive.
    """
    A = np.array(S, dtype=float)
    m = A.shape[0]
    V = np.eye(m)
    scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                G = np.eye(m)
                G[p, p] = G[q, q] = c
                G[p, q] = s
                G[q, p] = -s
                A = G.T @ A @ G
                A[p, q] = A[q, p] = 0.0
                V = V @ G
    else:
        raise NumericalFailure("Jacobi iteration did not converge")
    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    V = V[:, order]
    for j in range(m):
        nz = np.flatnonzero(np.abs(V[:, j]) > 1e-14)
        if nz.size and V[nz[0], j] < 0:
            V[:, j] = -V[:, j]
    return vals, V


@dataclass(frozen=True, eq=False)
class Spectrum:
    lambdas: np.ndarray
    rhos: np.ndarray
    vectors: np.ndarray

    @property
    def lambda1(self):
        return float(self.lambdas[0])


def spectrum(kern):
    """Eigenvalues of S in descending order and the ratios lambda_i / lambda_1."""
    S = kern.S if isinstance(kern, Kernels) else np.asarray(kern, dtype=float)
    vals, vecs = jacobi_eigh(S)
    norm = max(np.linalg.norm(S, 2), np.finfo(float).tiny)
    resid = np.linalg.norm(S @ vecs - vecs * vals[None, :], axis=0)
    if np.max(resid) > 1e-10 * norm:
        raise NumericalFailure(f"eigen-residual {np.max(resid):.3g} exceeds 1e-10 * ||S||")
    if vals[0] <= 0:
        raise NumericalFailure("leading eigenvalue is not positive")
    rhos = vals[1:] / vals[0]
    # round-off can push zero eigenvalues of a PSD kernel slightly negative
    rhos = np.where(np.abs(rhos) < 1e-12, 0.0, rhos)
    return Spectrum(lambdas=vals, rhos=rhos, vectors=vecs)


def perron_log_gradient(B, t, u, gap_tol=1e-12):
    """Logarithmic gradient (z dlambda_1/dz) / lambda_1 over (t, u).

    Uses first-order perturbation of the symmetric kernel S with its unit
    Perron vector phi: the u-part is phi_j^2 and the t-part is
    t_i (B diag(sqrt u) phi)_i^2 / lambda_1.
    """
    kern = build_kernels(B, t, u)
    spec = spectrum(kern)
    lam = spec.lambdas
    if lam.size > 1 and lam[0] - lam[1] <= gap_tol * lam[0]:
        raise DegenerateSpectrum(f"Perron gap {lam[0] - lam[1]:.3g} too small")
    phi = spec.vectors[:, 0]
    phi = phi / np.linalg.norm(phi)
    y = np.asarray(B, dtype=float) @ (np.sqrt(kern.u) * phi)
    gt = kern.t * y**2 / lam[0]
    gu = phi**2
    return np.concatenate([gt, gu])


def _check_rhos(rhos):
    rhos = np.atleast_1d(np.asarray(rhos, dtype=float))
    if np.any(~np.isfinite(rhos)):
        raise DomainError("spectral ratios must be finite")
    if np.any(rhos >= 1.0):
        raise DomainError(f"spectral ratios must be < 1, got max {rhos.max()!r}")
    if np.any(rhos < -1e-9):
        raise DomainError(f"spectral ratios of a PSD kernel must be >= 0, got {rhos.min()!r}")
    rhos = np.clip(rhos, 0.0, None)
    if np.any(rhos > RHO_CLAMP):
        warnings.warn("spectral ratio within 1e-12 of one; clamped", DomainWarning, stacklevel=3)
        rhos = np.minimum(rhos, RHO_CLAMP)
    return rhos


def predict_ratio_theorem1(n, rhos):
    """Predicted perm / perm_B2: (pi n / e)^(1/4) (prod e^rho (1 - rho))^(-1/4)."""
    rhos = _check_rhos(rhos)
    log_corr = -0.25 * float(np.sum(rhos + np.log1p(-rhos)))
    return math.exp(0.25 * math.log(math.pi * n / math.e) + log_corr)


def predict_ratio_smallrho(n, rhos):
    """Second-order small-ratio form (pi n / e)^(1/4) (1 + sum rho^2 / 8).

    From e^rho (1 - rho) = 1 - rho^2/2 - rho^3/3 + ..., raising to -1/4 gives
    1 + rho^2/8 + O(rho^3).
    """
    rhos = _check_rhos(rhos)
    if rhos.size and rhos.max() >= 0.5:
        warnings.warn("small-ratio expansion used with rho >= 0.5", DomainWarning, stacklevel=2)
    return (math.pi * n / math.e) ** 0.25 * (1.0 + float(np.sum(rhos**2)) / 8.0)


def allone_ratio_bethe2(n):
    """perm / perm_B2 asymptote for the all-one matrix."""
    return (math.pi * n / math.e) ** 0.25


def allone_ratio_bethe(n):
    """perm / perm_Bethe asymptote for the all-one matrix."""
    return math.sqrt(2 * math.pi * n / math.e)
