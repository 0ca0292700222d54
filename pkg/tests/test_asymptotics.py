import math

import numpy as np
import pytest

from blockperm.asymptotics import (
    allone_log_z_closed_form,
    allone_log_z_exact,
    allone_spec,
    log_hessian_lambda1,
    predict_Z,
    predict_Z_sinkhorn_form,
    tangent_frame,
)
from blockperm.blockmat import BlockSpec
from blockperm.errors import DegenerateFrame
from blockperm.series import gibbs_coefficient
from blockperm.sinkhorn import saddle_point
from blockperm.spectral import build_kernels, perron_log_gradient, predict_ratio_theorem1, spectrum


def lam1(B, t, u):
    return spectrum(build_kernels(B, t, u)).lambda1


def second_difference_hessian(B, t, u, h=1e-3):
    m = len(t)
    z = np.log(np.concatenate([t, u]))
    f = lambda x: 1 - lam1(B, *np.split(np.exp(x), 2))
    H = np.empty((2 * m, 2 * m))
    for i in range(2 * m):
        for j in range(2 * m):
            ei = np.eye(2 * m)[i] * h
            ej = np.eye(2 * m)[j] * h
            H[i, j] = (f(z + ei + ej) - f(z + ei - ej) - f(z - ei + ej) + f(z - ei - ej)) / (4 * h * h)
    return H


def test_allone_hessian_blocks():
    for m in (2, 3):
        sp = saddle_point(allone_spec(m, 3))
        H = log_hessian_lambda1(np.ones((m, m)), sp.tstar, sp.ustar)
        assert np.allclose(H[:m, :m], -np.eye(m) / m, atol=1e-8)
        assert np.allclose(H[m:, m:], -np.eye(m) / m, atol=1e-8)
        assert np.allclose(H[:m, m:], -np.ones((m, m)) / m**2, atol=1e-8)


def test_scalar_hessian():
    b = 1.7
    sp = saddle_point(BlockSpec([[b]], [4], [4]))
    H = log_hessian_lambda1([[b]], sp.tstar, sp.ustar)
    assert np.allclose(H, -1.0, atol=1e-9)


def test_hessian_against_second_differences(rng):
    spec = BlockSpec(rng.random((3, 3)) + 0.05, [2, 3, 1], [1, 1, 4])
    sp = saddle_point(spec)
    H = log_hessian_lambda1(spec.B, sp.tstar, sp.ustar)
    H2 = second_difference_hessian(spec.B, sp.tstar, sp.ustar)
    assert np.max(np.abs(H - H2)) < 1e-5


def test_hessian_step_halving(rng):
    spec = BlockSpec(rng.random((2, 2)) + 0.1, [3, 2], [1, 4])
    sp = saddle_point(spec)
    a = log_hessian_lambda1(spec.B, sp.tstar, sp.ustar, step=2e-4)
    b = log_hessian_lambda1(spec.B, sp.tstar, sp.ustar, step=1e-4)
    assert np.max(np.abs(a - b)) < 1e-8


def test_tangent_frame(rng):
    for m in (1, 2, 3):
        spec = BlockSpec(rng.random((m, m)) + 0.1, [2] * m, [2] * m)
        sp = saddle_point(spec)
        f = tangent_frame(perron_log_gradient(spec.B, sp.tstar, sp.ustar))
        assert f.V.shape == (2 * m, 2 * m - 2)
        assert np.allclose(f.V.T @ f.V, np.eye(2 * m - 2), atol=1e-12)
        assert np.allclose(f.V.T @ f.v, 0, atol=1e-12)
        assert np.allclose(f.V.T @ f.c, 0, atol=1e-12)
        assert np.allclose(f.v, -spec.r / spec.n, atol=1e-8)


def test_tangent_frame_degenerate():
    with pytest.raises(DegenerateFrame):
        tangent_frame(-np.array([1.0, 1.0, -1.0, -1.0]))


def test_det_invariant_under_rotation(rng):
    spec = BlockSpec(rng.random((3, 3)) + 0.1, [1, 2, 3], [2, 2, 2])
    sp = saddle_point(spec)
    H = log_hessian_lambda1(spec.B, sp.tstar, sp.ustar)
    V = tangent_frame(perron_log_gradient(spec.B, sp.tstar, sp.ustar)).V
    base = np.linalg.det(V.T @ H @ V)
    for _ in range(3):
        Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        assert math.isclose(np.linalg.det((V @ Q).T @ H @ (V @ Q)), base, rel_tol=1e-10)


@pytest.mark.parametrize("m,nbar", [(1, 8), (2, 4), (3, 3)])
def test_allone_closed_form(m, nbar):
    p = predict_Z(allone_spec(m, nbar))
    assert abs(math.expm1(p.zg.log - allone_log_z_closed_form(m, nbar))) < 1e-6
    assert np.all(np.linalg.eigvalsh(p.h_eff) > 0) if p.h_eff.size else True


def test_allone_convergence_towards_exact():
    ratios = [math.exp(predict_Z(allone_spec(2, nb)).zg.log - allone_log_z_exact(2, nb)) for nb in range(4, 21, 4)]
    assert all(abs(b - 1) < abs(a - 1) for a, b in zip(ratios, ratios[1:]))
    assert abs(ratios[-1] - 1) < 0.02


def test_ratio_identity():
    for spec in (allone_spec(2, 3), BlockSpec.from_pml([0.6, 0.4], [2, 1], [4, 4], [4, 4])):
        p = predict_Z(spec)
        assert math.isclose(math.exp(0.5 * (p.zg.log - p.zb.log)), predict_ratio_theorem1(spec.n, p.rhos), rel_tol=1e-10)
        assert math.isclose(p.ratio_b2, predict_ratio_theorem1(spec.n, p.rhos))


def test_two_paths_agree(rng):
    specs = [BlockSpec.from_pml([0.6, 0.4], [2, 1], [n, n], [n, n]) for n in (1, 3, 6)]
    specs += [BlockSpec(rng.random((3, 3)) + 0.05, [1, 4, 2], [3, 3, 1]) for _ in range(3)]
    for spec in specs:
        a, b = predict_Z(spec), predict_Z_sinkhorn_form(spec)
        assert abs(a.zg.log - b.zg.log) < 1e-8
        assert abs(a.zb.log - b.zb.log) < 1e-8
        assert math.isclose(a.grad_norm, a.r_norm / spec.n, rel_tol=1e-8)
        assert a.det_h > 0


def test_trivial_spec_matches_series():
    spec = BlockSpec([[1.0]], [1], [1])
    p = predict_Z_sinkhorn_form(spec)
    assert abs(p.zg.log - gibbs_coefficient(spec).log) < 1e-12


def test_allone_scsink_ratio():
    from blockperm.blockmat import expand_block
    from blockperm.exactperm import permanent_ryser
    from blockperm.sinkhorn import scaled_sinkhorn_permanent

    n = 6
    A = expand_block(allone_spec(2, 3))
    gap = permanent_ryser(A).log - scaled_sinkhorn_permanent(A).log
    assert math.isclose(gap, n + math.lgamma(n + 1) - n * math.log(n), rel_tol=1e-12)


def test_q_scale_hook(rng):
    spec = BlockSpec(rng.random((2, 2)) + 0.1, [3, 2], [2, 3])
    base = predict_Z(spec)
    for c in (0.5, 4.0):
        p = predict_Z(spec, q_scale=c)
        # simple pole for Gibbs, square-root singularity for Bethe
        assert math.isclose(p.zg.log, base.zg.log - math.log(c), rel_tol=1e-10, abs_tol=1e-10)
        assert math.isclose(p.zb.log, base.zb.log - 0.5 * math.log(c), rel_tol=1e-10, abs_tol=1e-10)
        assert np.allclose(p.h_eff, base.h_eff, atol=1e-9)
