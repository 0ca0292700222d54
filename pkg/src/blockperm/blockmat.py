"""Block-constant matrices and the power-law base family."""
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidSpec


def _int_vector(x, name):
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise InvalidSpec(f"{name} must be one-dimensional")
    out = []
    for v in arr.tolist():
        if isinstance(v, float) and not v.is_integer():
            raise InvalidSpec(f"{name} must contain integers, got {v!r}")
        out.append(int(v))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class BlockSpec:
    """Base matrix ``B`` (m x m, positive) with row/column multiplicities.

    The expanded matrix has an ``k[i] x l[j]`` block filled with ``B[i, j]``.
    """

    B: np.ndarray
    k: tuple
    l: tuple

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] == 0:
            raise InvalidSpec(f"B must be a non-empty square matrix, got shape {B.shape}")
        if not np.all(np.isfinite(B)) or np.any(B <= 0):
            raise InvalidSpec("every entry of B must be finite and strictly positive")
        k = _int_vector(self.k, "k")
        l = _int_vector(self.l, "l")
        m = B.shape[0]
        if len(k) != m or len(l) != m:
            raise InvalidSpec(f"k and l must have length m={m}")
        if min(k) < 1 or min(l) < 1:
            raise InvalidSpec("multiplicities must be positive integers")
        if sum(k) != sum(l):
            raise InvalidSpec(f"sum(k)={sum(k)} differs from sum(l)={sum(l)}")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "l", l)

    @property
    def m(self):
        return self.B.shape[0]

    @property
    def n(self):
        return sum(self.k)

    @property
    def r(self):
        return np.array(self.k + self.l, dtype=float)

    def __eq__(self, other):
        if not isinstance(other, BlockSpec):
            return NotImplemented
        return self.k == other.k and self.l == other.l and np.array_equal(self.B, other.B)

    def __hash__(self):
        return hash((self.k, self.l, self.B.tobytes()))

    def __repr__(self):
        return f"BlockSpec(B={self.B.tolist()}, k={self.k}, l={self.l})"

    @classmethod
    def from_pml(cls, q, mu, k, l):
        return cls(pml_block_base(q, mu), k, l)

    @classmethod
    def from_dict(cls, d):
        if "B" in d:
            B = d["B"]
        elif "q" in d and "mu" in d:
            B = pml_block_base(d["q"], d["mu"])
        else:
            raise InvalidSpec('spec needs "B" or both "q" and "mu"')
        for key in ("k", "l"):
            if key not in d:
                raise InvalidSpec(f'spec is missing "{key}"')
        spec = cls(B, d["k"], d["l"])
        if "m" in d and int(d["m"]) != spec.m:
            raise InvalidSpec(f'"m"={d["m"]} does not match B of size {spec.m}')
        return spec

    def to_dict(self):
        return {"m": self.m, "B": self.B.tolist(), "k": list(self.k), "l": list(self.l)}

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def scaled(self, c):
        return BlockSpec(self.B * c, self.k, self.l)


def expand_block(spec):
    """Dense n x n matrix with constant blocks, block order following k and l."""
    return np.repeat(np.repeat(spec.B, spec.k, axis=0), spec.l, axis=1)


def pml_block_base(q, mu):
    """Base matrix with entries ``q[i] ** mu[j]``."""
    q = np.asarray(q, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if q.ndim != 1 or mu.ndim != 1 or q.shape != mu.shape:
        raise InvalidSpec("q and mu must be vectors of equal length")
    if np.any(~np.isfinite(q)) or np.any(q <= 0):
        raise InvalidSpec("all q_i must be strictly positive")
    if np.any(~np.isfinite(mu)) or np.any(mu < 0):
        raise InvalidSpec("all mu_j must be nonnegative")
    return np.power.outer(q, mu)


def _groups(rows):
    keys = {}
    order = []
    for i, row in enumerate(rows):
        key = row.tobytes()
        if key not in keys:
            keys[key] = len(order)
            order.append(i)
    labels = np.array([keys[row.tobytes()] for row in rows])
    return order, labels


def infer_block_spec(A):
    """Recover a BlockSpec by grouping identical rows and columns.

    Rows of the same type need not be contiguous; types are numbered in
    order of first appearance.
    """
    A = as_matrix(A)
    row_rep, row_lab = _groups(A)
    col_rep, col_lab = _groups(A.T)
    if len(row_rep) != len(col_rep):
        raise InvalidSpec(
            f"{len(row_rep)} row types but {len(col_rep)} column types; not a square block pattern"
        )
    B = A[np.ix_(row_rep, col_rep)]
    k = np.bincount(row_lab)
    l = np.bincount(col_lab)
    return BlockSpec(B, k, l)


def as_matrix(A, positive=False):
    """Validate and convert to a float square matrix."""
    if isinstance(A, BlockSpec):
        A = expand_block(A)
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidSpec("matrix entries must be finite")
    if positive:
        if np.any(A <= 0):
            raise InvalidSpec("matrix entries must be strictly positive")
    elif np.any(A < 0):
        raise InvalidSpec("matrix entries must be nonnegative")
    return A


def log_multinomial(parts):
    n = sum(parts)
    return math.lgamma(n + 1) - sum(math.lgamma(p + 1) for p in parts)
