import math
import warnings

import numpy as np
import pytest

from blockperm.blockmat import BlockSpec
from blockperm.errors import DomainError, DomainWarning, InvalidSpec
from blockperm.sinkhorn import saddle_point
from blockperm.spectral import (
    allone_ratio_bethe,
    allone_ratio_bethe2,
    build_kernels,
    jacobi_eigh,
    perron_log_gradient,
    predict_ratio_smallrho,
    predict_ratio_theorem1,
    spectrum,
)


def test_scalar_kernel():
    k = build_kernels([[3.0]], [0.5], [2.0])
    assert np.allclose(k.W, 9.0) and np.allclose(k.S, 9.0)


def test_unit_point_symmetric_base():
    B = np.array([[2.0, 1.0], [1.0, 2.0]])
    k = build_kernels(B, [1, 1], [1, 1])
    assert np.allclose(k.S, B.T @ B)
    s = spectrum(k)
    assert np.allclose(s.lambdas, [9.0, 1.0])


def test_trace_identity(rng):
    for m in (1, 2, 3, 4):
        k = build_kernels(rng.random((m, m)) + 0.1, rng.random(m) + 0.1, rng.random(m) + 0.1)
        for h in range(1, 2 * m + 1):
            a = np.trace(np.linalg.matrix_power(k.W, h))
            b = np.trace(np.linalg.matrix_power(k.S, h))
            assert math.isclose(a, b, rel_tol=1e-12)


def test_jacobi_matches_lapack(rng):
    for m in (1, 2, 3, 5, 8):
        X = rng.standard_normal((m, m))
        S = X + X.T
        vals, vecs = jacobi_eigh(S)
        assert np.allclose(vals, np.sort(np.linalg.eigvalsh(S))[::-1], atol=1e-12)
        assert np.allclose(vecs.T @ vecs, np.eye(m), atol=1e-12)
        assert np.allclose(S @ vecs, vecs * vals, atol=1e-11)


def test_allone_saddle_spectrum():
    spec = BlockSpec(np.ones((3, 3)), [2, 2, 2], [2, 2, 2])
    sp = saddle_point(spec)
    s = spectrum(build_kernels(spec.B, sp.tstar, sp.ustar))
    assert np.allclose(s.lambdas, [1, 0, 0], atol=1e-12)
    assert np.all(s.rhos == 0)


def test_pml_rho():
    spec = BlockSpec.from_pml([0.6, 0.4], [2, 1], [6, 6], [6, 6])
    sp = saddle_point(spec)
    s = spectrum(build_kernels(spec.B, sp.tstar, sp.ustar))
    assert abs(s.rhos[0] - 0.0102) < 0.0005


def test_scaling_invariance(rng):
    B = rng.random((3, 3)) + 0.1
    t, u = rng.random(3) + 0.1, rng.random(3) + 0.1
    base = spectrum(build_kernels(B, t, u)).lambdas
    for a in (0.1, 3.0, 17.0):
        assert np.allclose(spectrum(build_kernels(B, a * t, u / a)).lambdas, base, rtol=1e-12)


def test_gradient_matches_finite_differences(rng):
    for m in (1, 2, 3):
        B = rng.random((m, m)) + 0.1
        t, u = rng.random(m) + 0.2, rng.random(m) + 0.2
        g = perron_log_gradient(B, t, u)
        z = np.log(np.concatenate([t, u]))
        h = 1e-5
        fd = np.empty(2 * m)
        for j in range(2 * m):
            e = np.zeros(2 * m)
            e[j] = h
            up = spectrum(build_kernels(B, *np.split(np.exp(z + e), 2))).lambda1
            dn = spectrum(build_kernels(B, *np.split(np.exp(z - e), 2))).lambda1
            fd[j] = (math.log(up) - math.log(dn)) / (2 * h)
        assert np.max(np.abs(g - fd)) < 1e-6
        assert math.isclose(g[:m].sum(), 1, abs_tol=1e-10)
        assert math.isclose(g[m:].sum(), 1, abs_tol=1e-10)


def test_scalar_gradient():
    assert np.allclose(perron_log_gradient([[2.0]], [0.3], [0.7]), [1.0, 1.0])


def test_kernel_validation():
    with pytest.raises(InvalidSpec):
        build_kernels([[1.0, -1.0], [1.0, 1.0]], [1, 1], [1, 1])
    with pytest.raises(InvalidSpec):
        build_kernels(np.ones((2, 2)), [1, 0], [1, 1])


def test_theorem1_examples():
    assert math.isclose(predict_ratio_theorem1(5, [0.0]), 1.5504, abs_tol=1e-4)
    corr = predict_ratio_theorem1(12, [0.0102]) / allone_ratio_bethe2(12)
    assert abs(corr - 1) < 1e-4
    with pytest.raises(DomainError):
        predict_ratio_theorem1(5, [1.0])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        v = predict_ratio_theorem1(5, [1 - 1e-14])
    assert math.isfinite(v) and any(issubclass(x.category, DomainWarning) for x in w)


def test_small_rho_form():
    for n in (5, 12):
        assert predict_ratio_smallrho(n, [0.0]) == predict_ratio_theorem1(n, [0.0])
    exact = predict_ratio_theorem1(5, [0.1])
    assert abs(predict_ratio_smallrho(5, [0.1]) - exact) < 1e-3
    exact = predict_ratio_theorem1(12, [0.0102])
    assert abs(predict_ratio_smallrho(12, [0.0102]) - exact) < 1e-6
    with pytest.warns(DomainWarning):
        predict_ratio_smallrho(5, [0.6])


def test_small_rho_coefficient():
    # (e^r (1 - r))^(-1/4) = 1 + r^2/8 + O(r^3)
    for r in (1e-2, 5e-3, 1e-3):
        corr = (math.exp(r) * (1 - r)) ** -0.25
        assert abs((corr - 1) / r**2 - 1 / 8) < r


def test_allone_baselines():
    assert math.isclose(allone_ratio_bethe(5), math.sqrt(2 * math.pi * 5 / math.e))
    assert math.isclose(allone_ratio_bethe2(5) ** 4, math.pi * 5 / math.e)
