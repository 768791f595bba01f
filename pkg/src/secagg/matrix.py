"""Dense matrices over a FieldSpec.

Entries live in a 2-D numpy array of canonical field integers. Elimination
uses first-nonzero pivoting; arithmetic is exact so pivot size is irrelevant.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import MatrixError, SingularMatrixError
from .field import FieldSpec


class Matrix:
    """Immutable rows x cols matrix over ``field``."""

    __slots__ = ("field", "data")

    def __init__(self, field: FieldSpec, data):
        arr = np.array(data, dtype=field.dtype)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, 0)
        if arr.ndim != 2:
            raise MatrixError(f"matrix data must be 2-D, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() >= field.q):
            raise MatrixError(f"entries outside {field!r}")
        arr.setflags(write=False)
        self.field = field
        self.data = arr

    @classmethod
    def zeros(cls, field: FieldSpec, rows: int, cols: int) -> "Matrix":
        return cls(field, np.zeros((rows, cols), dtype=field.dtype))

    @classmethod
    def identity(cls, field: FieldSpec, n: int) -> "Matrix":
        return cls(field, np.eye(n, dtype=np.int64))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def tolist(self) -> list[list[int]]:
        return [[int(x) for x in row] for row in self.data]

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.field == other.field and self.shape == other.shape and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"Matrix({self.field!r}, {self.tolist()})"

    def __matmul__(self, other: "Matrix") -> "Matrix":
        return Matrix(self.field, matmul(self.field, self.data, other.data))

    def apply(self, x) -> np.ndarray:
        """Matrix-vector (or matrix-matrix) product with a raw array."""
        x = self.field.asarray(x)
        if x.ndim == 1:
            return matmul(self.field, self.data, x[:, None])[:, 0]
        return matmul(self.field, self.data, x)

    def vstack(self, other: "Matrix") -> "Matrix":
        return Matrix(self.field, np.vstack([self.data, other.data]))

    def rank(self) -> int:
        return rank(self)

    def solve(self, y) -> np.ndarray:
        return solve(self, y)

    def inverse(self) -> "Matrix":
        return Matrix(self.field, solve(self, np.eye(self.rows, dtype=np.int64)))


def matmul(field: FieldSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise MatrixError(f"shape mismatch {a.shape} @ {b.shape}")
    acc = np.zeros((a.shape[0], b.shape[1]), dtype=field.dtype)
    for k in range(a.shape[1]):
        acc = field.vadd(acc, field.vmul(a[:, k : k + 1], b[k : k + 1, :]))
    return acc


def row_reduce(field: FieldSpec, data: np.ndarray, ncols: int | None = None) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form; pivots are searched in the first ``ncols`` columns."""
    m = np.array(data, dtype=field.dtype, copy=True)
    rows, cols = m.shape
    ncols = cols if ncols is None else ncols
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        pr = r + int(nz[0])
        if pr != r:
            m[[r, pr]] = m[[pr, r]]
        m[r] = field.vmul(m[r], field.inv(int(m[r, c])))
        others = np.nonzero(m[:, c])[0]
        others = others[others != r]
        if others.size:
            factors = m[others, c][:, None]
            m[others] = field.vsub(m[others], field.vmul(factors, m[r][None, :]))
        pivots.append(c)
        r += 1
    return m, pivots


def rank_of(field: FieldSpec, data) -> int:
    """Rank of a raw coefficient array (forward elimination only)."""
    m = np.array(data, dtype=field.dtype, copy=True)
    if m.ndim != 2 or m.size == 0:
        return 0
    rows, cols = m.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        pr = r + int(nz[0])
        if pr != r:
            m[[r, pr]] = m[[pr, r]]
        below = r + 1 + np.nonzero(m[r + 1 :, c])[0]
        if below.size:
            piv_inv = field.inv(int(m[r, c]))
            factors = field.vmul(m[below, c], piv_inv)[:, None]
            m[below] = field.vsub(m[below], field.vmul(factors, m[r][None, :]))
        r += 1
    return r


def rank(M: Matrix) -> int:
    return rank_of(M.field, M.data)


def solve(A: Matrix, y) -> np.ndarray:
    """Exact solution of ``A x = y``; ``y`` may be a vector or a matrix of columns."""
    if A.rows != A.cols:
        raise MatrixError(f"solve needs a square matrix, got {A.shape}")
    y = A.field.asarray(y)
    vector = y.ndim == 1
    rhs = y[:, None] if vector else y
    if rhs.shape[0] != A.rows:
        raise MatrixError(f"right-hand side has {rhs.shape[0]} rows, expected {A.rows}")
    n = A.rows
    reduced, pivots = row_reduce(A.field, np.hstack([A.data, rhs]), ncols=n)
    if len(pivots) < n:
        raise SingularMatrixError(f"matrix of rank {len(pivots)} < {n} is singular")
    x = reduced[:, n:]
    return x[:, 0] if vector else x


def submatrix(M: Matrix, row_idx: Sequence[int], col_idx: Sequence[int] | None = None) -> Matrix:
    """Entry-exact extraction of rows ``row_idx`` and columns ``col_idx`` (0-based)."""
    col_idx = range(M.cols) if col_idx is None else col_idx
    for idx, bound, name in ((row_idx, M.rows, "row"), (col_idx, M.cols, "column")):
        idx = list(idx)
        if len(set(idx)) != len(idx):
            raise MatrixError(f"duplicate {name} indices {idx}")
        if any(not 0 <= i < bound for i in idx):
            raise MatrixError(f"{name} index out of range in {idx}")
    data = M.data[np.ix_(list(row_idx), list(col_idx))] if len(row_idx) and len(col_idx) else np.zeros(
        (len(row_idx), len(col_idx)), dtype=M.field.dtype
    )
    return Matrix(M.field, data)


# -- Cauchy matrices ---------------------------------------------------------------


@dataclass(frozen=True)
class CauchyParams:
    field: FieldSpec
    alphas: tuple[int, ...]
    betas: tuple[int, ...]

    def __post_init__(self):
        pts = list(self.alphas) + list(self.betas)
        if len(pts) > self.field.q:
            raise MatrixError(f"{len(pts)} distinct points needed but {self.field!r} has {self.field.q}")
        for a in pts:
            self.field.check(a)
        if len(set(pts)) != len(pts):
            raise MatrixError(f"Cauchy points must be pairwise distinct: alphas={self.alphas}, betas={self.betas}")


def cauchy(params: CauchyParams) -> Matrix:
    """Entry (i, j) = 1 / (alpha_i - beta_j)."""
    f = params.field
    a = f.asarray(params.alphas)[:, None]
    b = f.asarray(params.betas)[None, :]
    if a.size == 0 or b.size == 0:
        return Matrix.zeros(f, len(params.alphas), len(params.betas))
    return Matrix(f, f.vinv(f.vsub(a, b)))


def canonical_cauchy(field: FieldSpec, a: int, b: int) -> Matrix:
    """Cauchy matrix with alphas = 0..a-1 and betas = a..a+b-1 (canonical indices)."""
    if a + b > field.q:
        raise MatrixError(f"a {a}x{b} Cauchy matrix needs q >= {a + b}, field has q = {field.q}")
    return _canonical_cauchy(field, a, b)


@lru_cache(maxsize=1024)
def _canonical_cauchy(field: FieldSpec, a: int, b: int) -> Matrix:
    return cauchy(CauchyParams(field, tuple(range(a)), tuple(range(a, a + b))))
