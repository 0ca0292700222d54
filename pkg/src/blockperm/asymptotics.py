"""Saddle-point asymptotics of the Gibbs and Bethe coefficients.

Both coefficients are extracted from generating functions whose singular
variety is Q = 1 - lambda_1(t, u) = 0. Around the critical point w the
expansion needs the gradient and Hessian of Q in logarithmic coordinates,
restricted to the tangent directions orthogonal to the scaling direction
c = (1, ..., 1, -1, ..., -1) and to the gradient itself.
"""
import math
from dataclasses import dataclass

import numpy as np

from .blockmat import BlockSpec, expand_block
from .errors import DegenerateFrame, NonPositiveHessian, NumericalFailure
from .logvalue import LogValue
from .sinkhorn import saddle_point, sinkhorn_scale
from .spectral import (
    _check_rhos,
    build_kernels,
    perron_log_gradient,
    predict_ratio_theorem1,
    spectrum,
)


def _lambda1(B, t, u):
    return spectrum(build_kernels(B, t, u)).lambda1


def _grad_q(B, t, u, zeta):
    """Gradient of 1 - lambda_1(t e^zeta_t, u e^zeta_u) with respect to zeta."""
    m = B.shape[0]
    tt = t * np.exp(zeta[:m])
    uu = u * np.exp(zeta[m:])
    return -_lambda1(B, tt, uu) * perron_log_gradient(B, tt, uu)


def _fd_hessian(B, t, u, h):
    dim = 2 * B.shape[0]
    H = np.empty((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = h
        H[:, j] = (_grad_q(B, t, u, e) - _grad_q(B, t, u, -e)) / (2 * h)
    return H


def log_hessian_lambda1(B, t, u, step=1e-4):
    """Hessian of 1 - lambda_1(e^zeta) at zeta = log(t, u).

    Central differences of the analytic gradient, Richardson-extrapolated
    over steps h and h/2, then symmetrised.
    """
    B = np.asarray(B, dtype=float)
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    if not 1e-6 < step < 1e-3:
        raise ValueError("step must lie in (1e-6, 1e-3)")
    H1 = _fd_hessian(B, t, u, step)
    H2 = _fd_hessian(B, t, u, step / 2)
    H = (4 * H2 - H1) / 3
    defect = np.max(np.abs(H - H.T))
    if defect > 1e-6:
        raise NumericalFailure(f"Hessian asymmetry {defect:.3g} exceeds 1e-6")
    return 0.5 * (H + H.T)


@dataclass(frozen=True, eq=False)
class TangentFrame:
    c: np.ndarray
    v: np.ndarray
    V: np.ndarray


def tangent_frame(grad):
    """Orthonormal basis of the complement of span{c, v} with v = -grad.

    ``grad`` is the log-gradient of lambda_1; its t-part and u-part each sum
    to one, so v is automatically orthogonal to c.
    """
    grad = np.asarray(grad, dtype=float)
    dim = grad.size
    m = dim // 2
    c = np.concatenate([np.ones(m), -np.ones(m)])
    v = -grad
    vn = np.linalg.norm(v)
    if vn == 0:
        raise DegenerateFrame("gradient vanishes")
    cos = abs(c @ v) / (np.linalg.norm(c) * vn)
    if cos > 1 - 1e-12:
        raise DegenerateFrame("gradient is parallel to the scaling direction")
    basis = []
    for x in [c, v] + list(np.eye(dim)):
        y = x.astype(float)
        for _ in range(2):
            for b in basis:
                y = y - (b @ y) * b
        ny = np.linalg.norm(y)
        if ny > 1e-8:
            basis.append(y / ny)
        if len(basis) == dim:
            break
    V = np.array(basis[2:]).T.reshape(dim, dim - 2)
    return TangentFrame(c=c, v=v, V=V)


@dataclass(frozen=True, eq=False)
class AsymptoticPrediction:
    zg: LogValue
    zb: LogValue
    det_h: float
    grad_norm: float
    r_norm: float
    rhos: np.ndarray
    ratio_b2: float
    h_eff: np.ndarray


def _effective_hessian(spec, t, u, grad, q_scale=1.0, step=1e-4):
    H = q_scale * log_hessian_lambda1(spec.B, t, u, step=step)
    frame = tangent_frame(grad)
    v = q_scale * frame.v
    gnorm = float(np.linalg.norm(v))
    Heff = -(frame.V.T @ H @ frame.V) / gnorm
    Heff = 0.5 * (Heff + Heff.T)
    if Heff.size:
        det = float(np.linalg.det(Heff))
        if det <= 0 or np.linalg.eigvalsh(Heff).min() <= 0:
            raise NonPositiveHessian(f"tangent Hessian is not positive definite (det={det:.3g})")
    else:
        det = 1.0
    return Heff, det, gnorm


def _assemble(spec, log_main, log_det, log_gnorm, rhos, n_eff):
    """Combine the pieces shared by the two code paths."""
    m = spec.m
    r_norm = float(np.linalg.norm(spec.r))
    rhos = _check_rhos(rhos)
    log_prefactor = (
        0.5 * math.log(2 * m)
        + log_main
        - (m - 1) * math.log(2 * math.pi * r_norm)
        - 0.5 * log_det
        - log_gnorm
    )
    log_zg = log_prefactor - float(np.sum(np.log1p(-rhos)))
    log_zb = (
        log_prefactor
        + 0.5 * float(np.sum(rhos - np.log1p(-rhos)))
        + 0.5 * (1.0 - math.log(math.pi * n_eff))
    )
    return log_zg, log_zb, r_norm, rhos


def predict_Z(spec, q_scale=1.0, step=1e-4):
    """Leading-order asymptotics of the Gibbs and Bethe coefficients.

    Z_G ~ sqrt(2m) w^-r / (sqrt((2 pi |r|)^(2m-2) det H) |grad log Q|) prod (1 - rho)^-1
    Z_B ~ same prefactor * sqrt(prod e^rho / (1 - rho)) * sqrt(e / (pi n))

    The gradient norm enters with power one. ``q_scale`` replaces Q by
    q_scale * Q; the predicted coefficients then scale by q_scale^-1 (Gibbs)
    and q_scale^-1/2 (Bethe), which tests that exponent.
    """
    sp = saddle_point(spec)
    t, u = sp.tstar, sp.ustar
    spc = spectrum(build_kernels(spec.B, t, u))
    grad = perron_log_gradient(spec.B, t, u)
    Heff, det, gnorm = _effective_hessian(spec, t, u, grad, q_scale, step)
    r = spec.r
    log_main = -float(r @ np.log(np.concatenate([t, u])))
    r_norm = float(np.linalg.norm(r))
    n_eff = r_norm / gnorm
    log_zg, log_zb, r_norm, rhos = _assemble(spec, log_main, math.log(det), math.log(gnorm), spc.rhos, n_eff)
    return AsymptoticPrediction(
        zg=LogValue(log_zg),
        zb=LogValue(log_zb),
        det_h=det,
        grad_norm=gnorm,
        r_norm=r_norm,
        rhos=rhos,
        ratio_b2=predict_ratio_theorem1(spec.n, rhos),
        h_eff=Heff,
    )


def _auxiliary_eigenvalues(spec, t, u):
    """Eigenvalues of diag(u/l) B^T diag(t) B diag(l), similar to W."""
    k = np.asarray(spec.k, dtype=float)
    l = np.asarray(spec.l, dtype=float)
    M = (u / l)[:, None] * (spec.B.T @ (t[:, None] * spec.B)) * l[None, :]
    vals = np.sort(np.linalg.eigvals(M).real)[::-1]
    return vals


def predict_Z_sinkhorn_form(spec, step=1e-4):
    """Same asymptotics written through the scaled Sinkhorn permanent.

    Z_G ~ sqrt(2m) n k^-k l^-l e^(2n) perm_scSink^2 / (|r| (2 pi |r|)^(m-1) sqrt(det H))
          * prod (1 - rho)^-1

    The scalers come from Sinkhorn on the expanded n x n matrix and the
    spectral ratios from an auxiliary matrix similar to W; only the tangent
    Hessian is shared with predict_Z.
    """
    A = expand_block(spec)
    res = sinkhorn_scale(A)
    n = spec.n
    log_scsink = -n - float(np.sum(np.log(res.d1))) - float(np.sum(np.log(res.d2)))
    row_first = np.cumsum((0,) + spec.k[:-1])
    col_first = np.cumsum((0,) + spec.l[:-1])
    vright = res.d1[row_first]
    vleft = res.d2[col_first]
    k = np.asarray(spec.k, dtype=float)
    l = np.asarray(spec.l, dtype=float)
    t = k * vright**2
    u = l * vleft**2
    lam = _auxiliary_eigenvalues(spec, t, u)
    rhos = lam[1:] / lam[0]
    rhos = np.where(np.abs(rhos) < 1e-12, 0.0, rhos)
    grad = perron_log_gradient(spec.B, t, u)
    Heff, det, _ = _effective_hessian(spec, t, u, grad, 1.0, step)
    r_norm = float(np.linalg.norm(spec.r))
    log_main = -float(k @ np.log(k)) - float(l @ np.log(l)) + 2 * n + 2 * log_scsink
    # gradient norm equals |r| / n at the saddle
    log_zg, log_zb, r_norm, rhos = _assemble(
        spec, log_main, math.log(det), math.log(r_norm / n), rhos, float(n)
    )
    return AsymptoticPrediction(
        zg=LogValue(log_zg),
        zb=LogValue(log_zb),
        det_h=det,
        grad_norm=r_norm / n,
        r_norm=r_norm,
        rhos=rhos,
        ratio_b2=predict_ratio_theorem1(n, rhos),
        h_eff=Heff,
    )


def allone_spec(m, nbar):
    return BlockSpec(np.ones((m, m)), [nbar] * m, [nbar] * m)


def allone_log_z_closed_form(m, nbar):
    """log of m * m^(2n) / (2 pi nbar)^(m-1) with n = m * nbar."""
    n = m * nbar
    return math.log(m) + 2 * n * math.log(m) - (m - 1) * math.log(2 * math.pi * nbar)


def allone_log_z_exact(m, nbar):
    """log of the exact Gibbs coefficient (n! / nbar!^m)^2 of the all-one family."""
    n = m * nbar
    return 2 * (math.lgamma(n + 1) - m * math.lgamma(nbar + 1))
