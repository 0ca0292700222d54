"""Acceptance checks, one function per criterion.

Each check returns a CheckResult; ``run_all`` prints one PASS/FAIL line per
criterion. Tolerances are fixed here and must not be loosened.
"""
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .asymptotics import (
    allone_log_z_closed_form,
    allone_log_z_exact,
    allone_spec,
    predict_Z,
    predict_Z_sinkhorn_form,
)
from .blockmat import BlockSpec, expand_block
from .covers import bethe2_pair_sum, betheM_exhaustive
from .exactperm import permanent_naive, permanent_ryser
from .harness import (
    EnsembleConfig,
    check_bounds,
    fit_ratio,
    random_composition,
    run_fig1_ensemble,
    run_pml_sweep,
)
from .series import bethe_coefficient, gibbs_coefficient, log_multiplicity
from .sinkhorn import fixed_point_residual, saddle_point
from .spectral import build_kernels, perron_log_gradient, spectrum

PML_Q = (0.6, 0.4)
PML_MU = (2.0, 1.0)
SWEEP_NS = (2, 4, 6, 8, 10, 12)
ENSEMBLE_SEED = 7


@dataclass
class CheckResult:
    number: int
    title: str
    passed: bool
    detail: str

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number} ({self.title}): {self.detail}"


def _rel_log_err(est, exact):
    if exact == 0:
        return abs(est)
    return abs(est - exact) / abs(exact)


def _random_spec(rng, m, n):
    B = 1.0 - rng.random((m, m))
    return BlockSpec(B, random_composition(n, m, rng), random_composition(n, m, rng))


def criterion_1():
    worst_allone = 0.0
    for n in range(1, 13):
        est = permanent_ryser(np.ones((n, n))).log
        exact = math.lgamma(n + 1)
        # log 1! = 0, so compare the value itself for n = 1
        err = abs(est - exact) if n == 1 else _rel_log_err(est, exact)
        worst_allone = max(worst_allone, err)
    rng = np.random.default_rng(101)
    worst_rand = 0.0
    for _ in range(50):
        A = 1.0 - rng.random((6, 6))
        a = permanent_ryser(A).log
        b = permanent_naive(A).log
        worst_rand = max(worst_rand, abs(math.expm1(a - b)))
    ok = worst_allone < 1e-9 and worst_rand < 1e-10
    return CheckResult(
        1,
        "exact permanents",
        ok,
        f"all-one max rel log err {worst_allone:.2e} (<1e-9); Ryser vs naive max rel err {worst_rand:.2e} (<1e-10)",
    )


def criterion_2():
    rng = np.random.default_rng(202)
    worst = 0.0
    for n, count in ((3, 20), (4, 5)):
        for _ in range(count):
            A = 1.0 - rng.random((n, n))
            a = bethe2_pair_sum(A).log
            b = betheM_exhaustive(A, 2).log
            worst = max(worst, abs(math.expm1(a - b)))
    v = math.exp(bethe2_pair_sum(np.ones((2, 2))).log)
    err2 = abs(v - math.sqrt(3)) / math.sqrt(3)
    ok = worst < 1e-9 and err2 < 1e-9
    return CheckResult(
        2,
        "degree-2 oracle equivalence",
        ok,
        f"pair sum vs exhaustive max rel err {worst:.2e} (<1e-9); all-one 2x2 gives {v:.10f} vs sqrt(3)",
    )


def criterion_3():
    rng = np.random.default_rng(303)
    worst_g = worst_b = 0.0
    for n in (4, 6):
        for _ in range(10):
            spec = _random_spec(rng, 2, n)
            A = expand_block(spec)
            lm = log_multiplicity(spec)
            perm2 = 2 * permanent_ryser(A).log
            b2sq = 2 * bethe2_pair_sum(A).log
            worst_g = max(worst_g, _rel_log_err(gibbs_coefficient(spec).log + lm, perm2))
            worst_b = max(worst_b, _rel_log_err(bethe_coefficient(spec).log + lm, b2sq))
    A = 1.0 - rng.random((4, 4))
    m1 = betheM_exhaustive(A, 1).log == permanent_ryser(A).log
    ok = worst_g < 1e-8 and worst_b < 1e-8 and m1
    return CheckResult(
        3,
        "coefficient bridge",
        ok,
        f"Gibbs max rel log err {worst_g:.2e}, Bethe {worst_b:.2e} (<1e-8); M=1 cover average equals perm: {m1}",
    )


def criterion_4():
    rng = np.random.default_rng(404)
    worst = {"lambda": 0.0, "grad": 0.0, "euler": 0.0, "resid": 0.0}
    for _ in range(20):
        n = int(rng.integers(2, 13))
        spec = _random_spec(rng, 2, n)
        sp = saddle_point(spec)
        lam = spectrum(build_kernels(spec.B, sp.tstar, sp.ustar)).lambda1
        g = perron_log_gradient(spec.B, sp.tstar, sp.ustar)
        worst["lambda"] = max(worst["lambda"], abs(lam - 1))
        worst["grad"] = max(worst["grad"], float(np.max(np.abs(n * g - spec.r))))
        worst["euler"] = max(worst["euler"], abs(g[:2].sum() - 1), abs(g[2:].sum() - 1))
        worst["resid"] = max(worst["resid"], fixed_point_residual(spec, sp.vright, sp.vleft))
    ok = (
        worst["lambda"] <= 1e-10
        and worst["grad"] <= 1e-6
        and worst["euler"] <= 1e-10
        and worst["resid"] < 1e-12
    )
    return CheckResult(
        4,
        "saddle correctness",
        ok,
        "max |lambda1-1| {lambda:.2e}, max |n grad - (k;l)| {grad:.2e}, "
        "max Euler defect {euler:.2e}, max fixed-point residual {resid:.2e}".format(**worst),
    )


def criterion_5(records=None):
    records = records or run_pml_sweep(PML_Q, PML_MU, SWEEP_NS)
    rho_ok = all(r.rhos and abs(r.rhos[0] - 0.0102) <= 0.0005 for r in records)
    gaps = {}
    for r in records:
        ratio = math.exp(r.log_perm - r.log_bethe2)
        gaps[r.n] = abs(ratio / r.pred_thm1 - 1)
    at12 = gaps.get(12, math.inf) <= 0.10
    seq = [gaps[n] for n in (6, 8, 10, 12)]
    monotone = all(b <= a for a, b in zip(seq, seq[1:]))
    rho2 = ", ".join(f"{r.rhos[0]:.6f}" for r in records if r.rhos)
    return CheckResult(
        5,
        "power-law sweep",
        rho_ok and at12 and monotone,
        f"rho2 = [{rho2}]; gap at n=12 {gaps.get(12, math.nan):.4f} (<=0.10); "
        f"gaps n=6..12 {['%.4f' % g for g in seq]} non-increasing: {monotone}",
    )


def criterion_6(records=None):
    records = records or run_fig1_ensemble(EnsembleConfig(n=5, m=2, trials=200, seed=ENSEMBLE_SEED))
    n = 5
    s2, _ = fit_ratio(records, "perm", "bethe2")
    s1, _ = fit_ratio(records, "perm", "bethe")
    e2 = (math.e / (math.pi * n)) ** 0.25
    e1 = (math.e / (2 * math.pi * n)) ** 0.5
    d2 = abs(s2 / e2 - 1)
    d1 = abs(s1 / e1 - 1)
    return CheckResult(
        6,
        "random ensemble slopes",
        d2 <= 0.10 and d1 <= 0.15,
        f"degree-2 slope {s2:.4f} vs {e2:.4f} (off {d2:.2%}, <=10%); "
        f"Bethe slope {s1:.4f} vs {e1:.4f} (off {d1:.2%}, <=15%)",
    )


def criterion_7():
    worst = 0.0
    for m, nbar in ((1, 8), (2, 4), (3, 3)):
        p = predict_Z(allone_spec(m, nbar))
        worst = max(worst, abs(math.expm1(p.zg.log - allone_log_z_closed_form(m, nbar))))
    m, nbar = 2, 20
    # k! l! Z_exact = perm^2 exactly, so the ratio is Z_asym / Z_exact
    ratio = math.exp(predict_Z(allone_spec(m, nbar)).zg.log - allone_log_z_exact(m, nbar))
    in_band = 0.95 <= ratio <= 1.0
    return CheckResult(
        7,
        "all-one closed forms",
        worst < 1e-6 and in_band,
        f"closed-form max rel err {worst:.2e} (<1e-6); n=40 (m=2) ratio {ratio:.6f} in [0.95, 1.0]: {in_band}",
    )


def _criterion_8_specs():
    specs = [BlockSpec.from_pml(PML_Q, PML_MU, [n // 2] * 2, [n // 2] * 2) for n in SWEEP_NS]
    specs += [allone_spec(m, nbar) for m, nbar in ((1, 8), (2, 4), (3, 3), (2, 20))]
    rng = np.random.default_rng(808)
    for _ in range(10):
        specs.append(_random_spec(rng, 2, int(rng.integers(2, 13))))
    for _ in range(5):
        specs.append(_random_spec(rng, 3, int(rng.integers(3, 13))))
    return specs


def criterion_8():
    worst = 0.0
    specs = _criterion_8_specs()
    for spec in specs:
        a = predict_Z(spec)
        b = predict_Z_sinkhorn_form(spec)
        worst = max(worst, abs(a.zg.log - b.zg.log), abs(a.zb.log - b.zb.log))
    return CheckResult(
        8,
        "two-path agreement",
        worst <= 1e-8,
        f"max |log difference| {worst:.2e} over {len(specs)} specs (<=1e-8)",
    )


def criterion_9(record_sets=None):
    if record_sets is None:
        record_sets = [
            run_fig1_ensemble(EnsembleConfig(n=5, m=2, trials=200, seed=ENSEMBLE_SEED)),
            run_pml_sweep(PML_Q, PML_MU, SWEEP_NS),
        ]
    total = bad = missing = 0
    for records in record_sets:
        for r in records:
            total += 1
            checks = check_bounds(r)
            if r.error or "bethe" not in checks or "scsink" not in checks:
                missing += 1
            if not all(checks.values()):
                bad += 1
    return CheckResult(
        9,
        "bounds on harness records",
        bad == 0 and missing == 0,
        f"{total} records, {bad} violating, {missing} incomplete",
    )


def criterion_10():
    from .cli import main

    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for threads in (1, 8):
            path = os.path.join(tmp, f"ensemble_{threads}.csv")
            main(
                [
                    "ensemble",
                    "--n", "5", "--m", "2", "--trials", "60",
                    "--seed", str(ENSEMBLE_SEED),
                    "--threads", str(threads),
                    "--format", "csv",
                    "--out", path,
                ]
            )
            with open(path, "rb") as fh:
                outs.append(fh.read())
    same = outs[0] == outs[1]
    return CheckResult(
        10,
        "thread determinism",
        same,
        f"csv output {'identical' if same else 'differs'} between 1 and 8 threads ({len(outs[0])} bytes)",
    )


CHECKS = (
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
    criterion_9,
    criterion_10,
)


def run_all(out=print):
    results = []
    for check in CHECKS:
        res = check()
        out(res.line())
        results.append(res)
    passed = sum(r.passed for r in results)
    out(f"{passed}/{len(results)} criteria passed")
    return results
