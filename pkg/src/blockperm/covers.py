"""Degree-M cover averages and the degree-2 pair-permutation sum."""
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .blockmat import as_matrix
from .errors import DimensionMismatch, InvalidSpec, TooLarge, ZeroPermanent
from .exactperm import (
    _all_permutations,
    cycle_counts,
    permanent_ryser,
    permanent_ryser_batch,
)
from .logvalue import LogValue

PAIR_SUM_MAX_N = 8
EXHAUSTIVE_MAX_CONFIGS = 1 << 20


@dataclass(frozen=True, eq=False)
class CoverConfig:
    """One M x M permutation per matrix cell; ``perms[i, j]`` is 0-based."""

    M: int
    perms: np.ndarray

    def __post_init__(self):
        perms = np.asarray(self.perms, dtype=np.intp)
        if perms.ndim != 3 or perms.shape[0] != perms.shape[1] or perms.shape[2] != self.M:
            raise DimensionMismatch(f"perms must have shape (n, n, {self.M}), got {perms.shape}")
        if not np.all(np.sort(perms, axis=2) == np.arange(self.M)):
            raise InvalidSpec("every cell must hold a permutation of range(M)")
        perms.setflags(write=False)
        object.__setattr__(self, "perms", perms)

    @property
    def n(self):
        return self.perms.shape[0]

    @classmethod
    def identity(cls, n, M):
        return cls(M, np.broadcast_to(np.arange(M), (n, n, M)).copy())


def lift(A, cfg):
    """Mn x Mn matrix with block (i, j) equal to ``A[i, j]`` times the cell permutation matrix."""
    A = as_matrix(A)
    n, M = A.shape[0], cfg.M
    if cfg.n != n:
        raise DimensionMismatch(f"cover is for n={cfg.n}, matrix has n={n}")
    out = np.zeros((n * M, n * M))
    rows = np.arange(M)
    for i in range(n):
        for j in range(n):
            out[i * M + rows, j * M + cfg.perms[i, j]] = A[i, j]
    return out


@lru_cache(maxsize=None)
def _cycle_lookup(n):
    """Cycle count indexed by the base-n code of a permutation."""
    P = _all_permutations(n).astype(np.int64)
    powers = n ** np.arange(n - 1, -1, -1, dtype=np.int64)
    table = np.full(n**n, -1, dtype=np.int8)
    table[P @ powers] = cycle_counts(P)
    table.setflags(write=False)
    return table


def _scaled_weights(A):
    n = A.shape[0]
    scale = A.max(axis=1)
    if np.any(scale == 0):
        raise ZeroPermanent("matrix has a zero row")
    X = A / scale[:, None]
    P = _all_permutations(n).astype(np.intp)
    w = np.prod(X[np.arange(n), P], axis=1)
    if w.sum() == 0:
        raise ZeroPermanent("permanent is zero; the pair-sum identity is undefined")
    return P, w, float(np.sum(np.log(scale)))


def _pair_sum_tau(P, w):
    n = P.shape[1]
    table = _cycle_lookup(n)
    powers = (n ** np.arange(n - 1, -1, -1)).astype(float)
    Pf = P.astype(float)
    total = 0.0
    chunk = max(1, (1 << 22) // len(P))
    for start in range(0, len(P), chunk):
        # code of sigma_a o sigma_b^{-1} equals sum_j sigma_a[j] * n^(n-1-sigma_b[j])
        Pow = powers[P[start : start + chunk]]
        codes = (Pf @ Pow.T).astype(np.int64)
        F = np.ldexp(1.0, -table[codes].astype(np.int64))
        total += float((w @ F) @ w[start : start + chunk])
    return total


def _pair_sum_naive(P, w):
    total = 0.0
    for b in range(len(P)):
        inv = np.argsort(P[b])
        c = cycle_counts(P[:, inv])
        total += w[b] * float(np.sum(w * np.ldexp(1.0, -c)))
    return total


def bethe2_pair_sum(A, method="tau"):
    """Degree-2 Bethe permanent from the cycle-penalised pair sum.

    perm_B2(A)^2 = sum over (s1, s2) of w(s1) w(s2) 2^(-c(s1 o s2^-1)), where
    w is the permutation weight and c counts cycles of length >= 2.
    ``method="naive"`` loops over the second permutation explicitly.
    """
    A = as_matrix(A)
    n = A.shape[0]
    if n > PAIR_SUM_MAX_N:
        raise TooLarge(f"pair sum supports n <= {PAIR_SUM_MAX_N}, got {n}")
    if n == 0:
        return LogValue.one()
    P, w, log_scale = _scaled_weights(A)
    if method == "tau":
        s = _pair_sum_tau(P, w)
    elif method == "naive":
        s = _pair_sum_naive(P, w)
    else:
        raise ValueError(f"unknown method {method!r}")
    return LogValue(0.5 * math.log(s) + log_scale)


def _check_degree(M):
    if int(M) != M or M < 1:
        raise InvalidSpec(f"cover degree must be a positive integer, got {M!r}")
    return int(M)


def _lifts(X, choices, permtab):
    """Stack of lifted matrices for an array of per-cell permutation choices."""
    n = X.shape[0]
    M = permtab.shape[1]
    L = np.zeros((len(choices), n * M, n * M))
    batch = np.arange(len(choices))[:, None]
    rows = np.arange(M)
    for cell in range(n * n):
        i, j = divmod(cell, n)
        cols = j * M + permtab[choices[:, cell]]
        L[batch, i * M + rows, cols] = X[i, j]
    return L


def betheM_exhaustive(A, M):
    """M-th root of the mean permanent over every degree-M cover."""
    A = as_matrix(A)
    M = _check_degree(M)
    n = A.shape[0]
    if M == 1:
        return permanent_ryser(A)
    nperm = math.factorial(M)
    count = nperm ** (n * n)
    if count > EXHAUSTIVE_MAX_CONFIGS or n * M > 16:
        raise TooLarge(f"{count} cover configurations exceed the enumeration cap")
    c = A.max()
    if c == 0:
        return LogValue.zero()
    X = A / c
    permtab = np.array(list(itertools.permutations(range(M))), dtype=np.intp)
    chunk = 4096
    sums = []
    for start in range(0, count, chunk):
        idx = np.arange(start, min(start + chunk, count))
        choices = np.empty((len(idx), n * n), dtype=np.intp)
        rest = idx.copy()
        for cell in range(n * n - 1, -1, -1):
            choices[:, cell] = rest % nperm
            rest //= nperm
        sums.append(float(np.sum(permanent_ryser_batch(_lifts(X, choices, permtab)))))
    mean = math.fsum(sums) / count
    if mean <= 0:
        return LogValue.zero(flagged=True)
    return LogValue(math.log(mean) / M + n * math.log(c))


def betheM_sampled(A, M, samples, seed):
    """Monte-Carlo estimate of the degree-M Bethe permanent.

    Each sample draws an independent uniform permutation for every cell from
    a generator keyed by ``(seed, sample index)``, so results do not depend
    on evaluation order. Returns ``(estimate, stderr_of_log)``.
    """
    A = as_matrix(A)
    M = _check_degree(M)
    n = A.shape[0]
    samples = int(samples)
    if samples < 1:
        raise InvalidSpec("samples must be positive")
    if M * n > 24:
        raise TooLarge(f"lifted size {M * n} exceeds the Ryser limit")
    if M == 1:
        return permanent_ryser(A), 0.0
    c = A.max()
    if c == 0:
        return LogValue.zero(), 0.0
    X = A / c
    base = np.tile(np.arange(M), (n * n, 1))
    logs = np.empty(samples)
    for s in range(samples):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), s]))
        perms = rng.permuted(base, axis=1).reshape(n, n, M)
        logs[s] = permanent_ryser(lift(X, CoverConfig(M, perms))).log
    log_mean = float(logsumexp(logs)) - math.log(samples)
    if samples > 1:
        rel = np.exp(logs - log_mean)
        se_mean = float(np.std(rel, ddof=1)) / math.sqrt(samples)
    else:
        se_mean = 0.0
    return LogValue(log_mean / M + n * math.log(c)), se_mean / M
