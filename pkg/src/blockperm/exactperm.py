"""Exact permanents and permutation utilities.

Permutations are 0-based integer arrays: ``p[i]`` is the image of ``i``.
"""
import itertools
import math
from functools import lru_cache

import numpy as np

from .blockmat import as_matrix
from .errors import DimensionMismatch, InvalidSpec, TooLarge
from .logvalue import LogValue

NAIVE_MAX_N = 10
RYSER_MAX_N = 24
_CHUNK = 1 << 16


def all_permutations(n):
    """All permutations of range(n) in lexicographic order, as an (n!, n) array."""
    if n > NAIVE_MAX_N:
        raise TooLarge(f"refusing to enumerate {n}! permutations")
    return _all_permutations(n).copy()


@lru_cache(maxsize=None)
def _all_permutations(n):
    out = np.array(list(itertools.permutations(range(n))), dtype=np.int8).reshape(-1, n)
    out.setflags(write=False)
    return out


def _iter_permutation_chunks(n):
    it = itertools.permutations(range(n))
    while True:
        block = list(itertools.islice(it, _CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.intp).reshape(-1, n)


def _check_permutation(p):
    p = np.asarray(p)
    if p.ndim != 1 or not np.array_equal(np.sort(p), np.arange(p.size)):
        raise InvalidSpec(f"not a permutation of range({p.size}): {p.tolist()}")
    return p.astype(np.intp)


def _row_scale(A):
    scale = A.max(axis=1)
    return scale


def permanent_naive(A):
    """Permanent by direct summation over all permutations (n <= 10)."""
    A = as_matrix(A)
    n = A.shape[0]
    if n > NAIVE_MAX_N:
        raise TooLarge(f"permanent_naive supports n <= {NAIVE_MAX_N}, got {n}")
    if n == 0:
        return LogValue.one()
    scale = _row_scale(A)
    if np.any(scale == 0):
        return LogValue.zero()
    X = A / scale[:, None]
    rows = np.arange(n)
    total = 0.0
    for P in _iter_permutation_chunks(n):
        total += math.fsum(np.prod(X[rows, P], axis=1))
    if total == 0:
        return LogValue.zero()
    return LogValue(math.log(total) + float(np.sum(np.log(scale))))


def _subset_row_sums(X):
    """Row sums over every column subset of X, indexed by bitmask."""
    n, c = X.shape
    R = np.zeros((1 << c, n), dtype=X.dtype)
    size = 1
    for j in range(c):
        R[size : 2 * size] = R[:size] + X[:, j]
        size *= 2
    return R


def _popcount_parity(N):
    idx = np.arange(N, dtype=np.int64)
    par = np.zeros(N, dtype=np.int64)
    while np.any(idx):
        par ^= idx & 1
        idx >>= 1
    return par


def _ryser_signed_sum(X):
    """sum over column subsets S of (-1)^|S| prod_i sum_{j in S} x_ij."""
    n = X.shape[0]
    nl = min(n, 12)
    R = _subset_row_sums(X[:, :nl])
    sign_low = (1 - 2 * _popcount_parity(R.shape[0])).astype(X.dtype)
    high = X[:, nl:]
    nh = high.shape[1]
    r = np.zeros(n, dtype=X.dtype)
    in_set = np.zeros(nh, dtype=bool)
    parity = 0
    pos = np.zeros((), dtype=X.dtype)
    neg = np.zeros((), dtype=X.dtype)
    for g in range(1 << nh):
        if g:
            bit = (g & -g).bit_length() - 1
            if in_set[bit]:
                r = r - high[:, bit]
            else:
                r = r + high[:, bit]
            in_set[bit] = not in_set[bit]
            parity ^= 1
        terms = np.prod(R + r, axis=1) * sign_low
        if parity:
            terms = -terms
        pos = pos + terms[terms > 0].sum()
        neg = neg + terms[terms < 0].sum()
    return pos + neg, pos - neg


def permanent_ryser(A):
    """Permanent by Ryser inclusion-exclusion with Gray-code updates (n <= 24).

    Rows are scaled to unit maximum and the signed sum is accumulated in
    extended precision. A tiny negative result (cancellation) is clamped to
    zero and flagged.
    """
    A = as_matrix(A)
    n = A.shape[0]
    if n > RYSER_MAX_N:
        raise TooLarge(f"permanent_ryser supports n <= {RYSER_MAX_N}, got {n}")
    if n == 0:
        return LogValue.one()
    scale = _row_scale(A)
    if np.any(scale == 0):
        return LogValue.zero()
    X = (A / scale[:, None]).astype(np.longdouble)
    total, _ = _ryser_signed_sum(X)
    if n % 2:
        total = -total
    if total <= 0:
        return LogValue.zero(flagged=True)
    return LogValue(float(np.log(total)) + float(np.sum(np.log(scale))))


def permanent_ryser_batch(As):
    """Ryser permanents of a stack of equally sized matrices (n <= 16).

    Returns plain floats in float64; intended for small lifted matrices whose
    permanents stay in range.
    """
    As = np.asarray(As, dtype=float)
    if As.ndim != 3 or As.shape[1] != As.shape[2]:
        raise DimensionMismatch(f"expected a stack of square matrices, got {As.shape}")
    n = As.shape[1]
    if n > 16:
        raise TooLarge(f"batched Ryser supports n <= 16, got {n}")
    if n == 0:
        return np.ones(As.shape[0])
    N = 1 << n
    # row sums for all subsets: (batch, subsets, rows)
    R = np.zeros((As.shape[0], N, n))
    size = 1
    for j in range(n):
        R[:, size : 2 * size] = R[:, :size] + As[:, None, :, j]
        size *= 2
    sign = (1 - 2 * _popcount_parity(N)).astype(float)
    vals = np.prod(R, axis=2) @ sign
    return vals * (-1) ** n


def cycle_count(p):
    """Number of cycles of length >= 2."""
    p = _check_permutation(p)
    seen = np.zeros(p.size, dtype=bool)
    count = 0
    for i in range(p.size):
        if seen[i] or p[i] == i:
            seen[i] = True
            continue
        count += 1
        j = i
        while not seen[j]:
            seen[j] = True
            j = p[j]
    return count


def cycle_counts(P):
    """Vectorized cycle_count over the rows of an (N, n) permutation array."""
    P = np.asarray(P, dtype=np.intp)
    N, n = P.shape
    idx = np.broadcast_to(np.arange(n), (N, n))
    orbit_min = idx.copy()
    cur = P.copy()
    for _ in range(n - 1):
        np.minimum(orbit_min, cur, out=orbit_min)
        cur = np.take_along_axis(P, cur, axis=1)
    leaders = (orbit_min == idx) & (P != idx)
    return leaders.sum(axis=1)


def permutation_weight(A, p):
    """prod_i A[i, p[i]] as a LogValue."""
    A = as_matrix(A)
    p = _check_permutation(p)
    if p.size != A.shape[0]:
        raise DimensionMismatch(f"permutation of size {p.size} for a {A.shape[0]}x{A.shape[0]} matrix")
    vals = A[np.arange(p.size), p]
    if np.any(vals == 0):
        return LogValue.zero()
    return LogValue(float(np.sum(np.log(vals))))


def permanent(A):
    """Exact permanent, naive for tiny n and Ryser otherwise."""
    A = as_matrix(A)
    if A.shape[0] <= 4:
        return permanent_naive(A)
    return permanent_ryser(A)
