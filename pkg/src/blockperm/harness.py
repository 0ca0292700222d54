"""Experiment ensembles, ratio fitting and record serialisation."""
import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .blockmat import BlockSpec, expand_block, pml_block_base
from .covers import PAIR_SUM_MAX_N, bethe2_pair_sum
from .errors import BlockPermError, InsufficientData, InvalidSpec
from .exactperm import permanent_ryser
from .series import bethe2_from_series
from .sinkhorn import saddle_point, scaled_sinkhorn_permanent
from .spa import SpaOptions, bethe_permanent
from .spectral import (
    allone_ratio_bethe,
    allone_ratio_bethe2,
    build_kernels,
    predict_ratio_smallrho,
    predict_ratio_theorem1,
    spectrum,
)

B_DISTRIBUTIONS = ("uniform01", "pml", "fixed")
NAN = float("nan")


@dataclass(frozen=True)
class EnsembleConfig:
    """Random block-matrix ensemble.

    ``uniform01`` draws every base entry from (0, 1]; this distribution is a
    free choice, not prescribed by the experiment it imitates.
    """

    n: int
    m: int
    trials: int
    seed: int = 0
    b_distribution: str = "uniform01"
    q: tuple = None
    mu: tuple = None
    B: tuple = None
    partition_mode: str = "random"
    k: tuple = None
    l: tuple = None
    compute_bethe: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidSpec("trials must be at least 1")
        if self.m < 1 or self.n < self.m:
            raise InvalidSpec("need n >= m >= 1")
        if self.b_distribution not in B_DISTRIBUTIONS:
            raise InvalidSpec(f"unknown b_distribution {self.b_distribution!r}")
        if self.b_distribution == "pml" and (self.q is None or self.mu is None):
            raise InvalidSpec("pml distribution needs q and mu")
        if self.b_distribution == "fixed" and self.B is None:
            raise InvalidSpec("fixed distribution needs B")
        if self.partition_mode not in ("random", "fixed"):
            raise InvalidSpec(f"unknown partition_mode {self.partition_mode!r}")
        if self.partition_mode == "fixed":
            if self.k is None or self.l is None:
                raise InvalidSpec("fixed partitions need k and l")
            if sum(self.k) != self.n or sum(self.l) != self.n:
                raise InvalidSpec("fixed k and l must sum to n")


@dataclass
class TrialRecord:
    trial_index: int
    n: int
    m: int
    k: list
    l: list
    B: list
    log_perm: float = NAN
    log_bethe2: float = NAN
    log_bethe: float = NAN
    bethe_converged: bool = False
    log_scsink: float = NAN
    rhos: list = field(default_factory=list)
    pred_thm1: float = NAN
    pred_smallrho: float = NAN
    pred_allone_bethe2: float = NAN
    pred_allone_bethe: float = NAN
    bethe2_method: str = ""
    error: str = ""


def random_composition(n, m, rng):
    """Uniform draw from the compositions of n into m positive parts."""
    if m == 1:
        return [n]
    cuts = np.sort(rng.choice(np.arange(1, n), size=m - 1, replace=False))
    bounds = np.concatenate([[0], cuts, [n]])
    return np.diff(bounds).astype(int).tolist()


def trial_rng(seed, trial_index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial_index)]))


def _draw_spec(cfg, i):
    rng = trial_rng(cfg.seed, i)
    if cfg.b_distribution == "uniform01":
        B = 1.0 - rng.random((cfg.m, cfg.m))
    elif cfg.b_distribution == "pml":
        B = pml_block_base(cfg.q, cfg.mu)
    else:
        B = np.asarray(cfg.B, dtype=float)
    if cfg.partition_mode == "random":
        k = random_composition(cfg.n, cfg.m, rng)
        l = random_composition(cfg.n, cfg.m, rng)
    else:
        k, l = list(cfg.k), list(cfg.l)
    return BlockSpec(B, k, l)


def evaluate_spec(spec, trial_index=0, compute_bethe=True, bethe2="auto"):
    """Fill a TrialRecord for one spec; module errors are recorded, not raised."""
    rec = TrialRecord(
        trial_index=int(trial_index),
        n=spec.n,
        m=spec.m,
        k=list(spec.k),
        l=list(spec.l),
        B=spec.B.tolist(),
    )
    try:
        A = expand_block(spec)
        rec.log_perm = permanent_ryser(A).log
        if bethe2 == "pair" or (bethe2 == "auto" and spec.n <= min(6, PAIR_SUM_MAX_N)):
            rec.log_bethe2 = bethe2_pair_sum(A).log
            rec.bethe2_method = "pair_sum"
        else:
            rec.log_bethe2 = bethe2_from_series(spec).log
            rec.bethe2_method = "series"
        if compute_bethe:
            sol = bethe_permanent(A, SpaOptions())
            rec.bethe_converged = bool(sol.converged)
            if sol.converged:
                rec.log_bethe = sol.value.log
        rec.log_scsink = scaled_sinkhorn_permanent(A).log
        sp = saddle_point(spec)
        rhos = spectrum(build_kernels(spec.B, sp.tstar, sp.ustar)).rhos
        rec.rhos = [float(x) for x in rhos]
        rec.pred_thm1 = predict_ratio_theorem1(spec.n, rhos)
        rec.pred_smallrho = predict_ratio_smallrho(spec.n, rhos) if np.all(rhos < 0.5) else NAN
        rec.pred_allone_bethe2 = allone_ratio_bethe2(spec.n)
        rec.pred_allone_bethe = allone_ratio_bethe(spec.n)
    except BlockPermError as exc:
        rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def _map(fn, items, threads):
    threads = max(1, int(threads))
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_fig1_ensemble(cfg, threads=1):
    """Random block matrices with exact, degree-2, Bethe and Sinkhorn permanents.

    Each trial uses a generator keyed by (seed, trial_index), so records are
    identical for any thread count.
    """
    if cfg.n > 8:
        raise InvalidSpec("ensemble trials need n <= 8")

    def one(i):
        return evaluate_spec(_draw_spec(cfg, i), i, cfg.compute_bethe)

    return _map(one, range(cfg.trials), threads)


def run_pml_sweep(q, mu, ns, threads=1, compute_bethe=True):
    """Power-law base matrix with k = l = (n/2, n/2) for each even n <= 12.

    The degree-2 permanent uses the pair sum for n <= 6 and the exact
    series bridge above that.
    """
    B = pml_block_base(q, mu)
    if B.shape[0] != 2:
        raise InvalidSpec("the sweep uses two types")
    specs = []
    for n in ns:
        n = int(n)
        if n % 2 or n < 2 or n > 12:
            raise InvalidSpec(f"sweep sizes must be even and in [2, 12], got {n}")
        specs.append(BlockSpec(B, [n // 2] * 2, [n // 2] * 2))

    def one(item):
        i, spec = item
        return evaluate_spec(spec, i, compute_bethe)

    return _map(one, list(enumerate(specs)), threads)


def record_value(rec, name):
    """Linear-domain value of a logged field (``perm``, ``bethe2``, ...)."""
    return math.exp(getattr(rec, "log_" + name))


def fit_ratio(records, field_x, field_y):
    """Least-squares slope through the origin of y against x.

    Fields name log-valued record attributes (``log_perm`` or ``perm``).
    Values are shifted by a common factor before exponentiating; the slope
    is unaffected. Returns (slope, RMS relative deviation of y from slope*x).
    """
    fx = field_x if field_x.startswith("log_") else "log_" + field_x
    fy = field_y if field_y.startswith("log_") else "log_" + field_y
    lx = np.array([getattr(r, fx) for r in records], dtype=float)
    ly = np.array([getattr(r, fy) for r in records], dtype=float)
    ok = np.isfinite(lx) & np.isfinite(ly)
    if ok.sum() < 2:
        raise InsufficientData(f"need at least 2 finite (x, y) pairs, got {int(ok.sum())}")
    lx, ly = lx[ok], ly[ok]
    shift = lx.max()
    x = np.exp(lx - shift)
    y = np.exp(ly - shift)
    slope = float(np.dot(x, y) / np.dot(x, x))
    residual = float(np.sqrt(np.mean(((y - slope * x) / y) ** 2)))
    return slope, residual


def check_bounds(rec, slack=1e-9):
    """Sandwich bounds for one record; missing values count as satisfied."""
    n = rec.n
    out = {}
    if math.isfinite(rec.log_bethe):
        d = rec.log_perm - rec.log_bethe
        out["bethe"] = -slack <= d <= 0.5 * n * math.log(2) + slack
    if math.isfinite(rec.log_scsink):
        d = rec.log_perm - rec.log_scsink
        lo = n + math.lgamma(n + 1) - n * math.log(n)
        out["scsink"] = lo - slack <= d <= n + slack
    if math.isfinite(rec.log_bethe2):
        out["bethe2"] = rec.log_perm - rec.log_bethe2 >= -slack
    return out


def csv_header(m):
    return (
        ["trial_index", "n", "m", "log_perm", "log_bethe2", "log_bethe", "log_scsink"]
        + [f"rho{i}" for i in range(2, m + 1)]
        + ["pred_thm1"]
    )


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def records_to_csv(records):
    m = max((r.m for r in records), default=1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(m))
    for r in sorted(records, key=lambda r: r.trial_index):
        rhos = list(r.rhos) + [NAN] * (m - 1 - len(r.rhos))
        row = [r.trial_index, r.n, r.m, r.log_perm, r.log_bethe2, r.log_bethe, r.log_scsink]
        row += rhos + [r.pred_thm1]
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def records_to_json(records, metadata=None):
    payload = {
        "metadata": metadata or {},
        "records": [_jsonable(asdict(r)) for r in sorted(records, key=lambda r: r.trial_index)],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
