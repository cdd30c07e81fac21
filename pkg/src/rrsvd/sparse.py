"""Compressed sparse row storage, products and Matrix Market I/O.

Matrices are immutable once built. Products go through a cached
``scipy.sparse.csr_matrix`` view that shares the index and value arrays.
"""
from dataclasses import dataclass
from functools import cached_property
import math
import os

import numpy as np
import scipy.sparse as sp

from . import flops
from .errors import DimensionMismatch, IndexOutOfRange, ParseError, UnsupportedFormat

__all__ = [
    "SparseMatrix",
    "csr_from_coo",
    "matvec",
    "rmatvec",
    "read_matrix_market",
    "write_matrix_market",
    "split_rows",
    "split_cols",
    "vstack",
    "hstack",
]


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    nrows: int
    ncols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_ptr", _frozen(self.row_ptr, np.int64))
        object.__setattr__(self, "col_idx", _frozen(self.col_idx, np.int64))
        object.__setattr__(self, "values", _frozen(self.values, np.float64))
        rp, ci = self.row_ptr, self.col_idx
        if self.nrows < 0 or self.ncols < 0:
            raise ValueError("negative shape")
        if rp.shape != (self.nrows + 1,) or rp[0] != 0 or rp[-1] != ci.size:
            raise ValueError("row_ptr must have length nrows+1, start at 0, end at nnz")
        if np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr must be nondecreasing")
        if ci.size != self.values.size:
            raise ValueError("col_idx and values differ in length")
        if ci.size:
            if ci.min() < 0 or ci.max() >= self.ncols:
                raise IndexOutOfRange("column index outside [0, ncols)")
            # strictly increasing inside each row: a drop is only allowed at row starts
            step = np.diff(ci)
            starts = np.zeros(ci.size - 1, dtype=bool)
            inner = rp[1:-1]
            inner = inner[(inner > 0) & (inner < ci.size)]
            starts[inner - 1] = True
            if np.any((step <= 0) & ~starts):
                raise ValueError("column indices must be strictly increasing within a row")
        if np.any(self.values == 0):
            raise ValueError("explicit zeros are not stored")

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self):
        return int(self.values.size)

    @cached_property
    def _csr(self):
        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr), shape=self.shape)

    @cached_property
    def T(self):
        return SparseMatrix.from_scipy(self._csr.T)

    def transpose(self):
        return self.T

    def matvec(self, x):
        return matvec(self, x)

    def rmatvec(self, y):
        return rmatvec(self, y)

    def __matmul__(self, x):
        return matvec(self, x)

    def to_dense(self):
        return self._csr.toarray()

    def to_scipy(self):
        return self._csr.copy()

    def frobenius_norm(self):
        return float(np.sqrt(np.dot(self.values, self.values)))

    def row_slice(self, start, stop):
        if not 0 <= start <= stop <= self.nrows:
            raise IndexOutOfRange(f"rows [{start}, {stop}) outside 0..{self.nrows}")
        lo, hi = self.row_ptr[start], self.row_ptr[stop]
        return SparseMatrix(
            stop - start,
            self.ncols,
            self.row_ptr[start : stop + 1] - lo,
            self.col_idx[lo:hi],
            self.values[lo:hi],
        )

    @classmethod
    def from_scipy(cls, m):
        m = sp.csr_matrix(m, dtype=np.float64)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_dense(cls, a):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("expected a 2-d array")
        return cls.from_scipy(sp.csr_matrix(a))

    @classmethod
    def zeros(cls, nrows, ncols):
        return cls(nrows, ncols, np.zeros(nrows + 1, np.int64), [], [])

    @classmethod
    def identity(cls, n):
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


def csr_from_coo(triples, nrows, ncols):
    """Build a CSR matrix from ``(row, col, value)`` triples.

    Duplicates are summed and entries that cancel to exactly zero are dropped.
    """
    triples = list(triples)
    if triples:
        rows, cols, vals = (np.asarray(t) for t in zip(*triples))
    else:
        rows = cols = np.zeros(0, np.int64)
        vals = np.zeros(0)
    return _from_arrays(rows, cols, vals, nrows, ncols)


def _from_arrays(rows, cols, vals, nrows, ncols):
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    if rows.size and (rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols):
        bad = np.flatnonzero((rows < 0) | (rows >= nrows) | (cols < 0) | (cols >= ncols))[0]
        raise IndexOutOfRange(
            f"entry ({rows[bad]}, {cols[bad]}) outside a {nrows}x{ncols} matrix"
        )
    m = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)).tocsr()
    return SparseMatrix.from_scipy(m)


def _as_operand(x, n, what):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] != n:
        raise DimensionMismatch(f"{what}: expected leading dimension {n}, got shape {x.shape}")
    return x


def matvec(A, x):
    """``A @ x`` for a vector or a block of column vectors."""
    x = _as_operand(x, A.ncols, "matvec")
    y = A._csr @ x
    flops.add(2 * A.nnz * (1 if x.ndim == 1 else x.shape[1]))
    return np.asarray(y)


def rmatvec(A, y):
    """``A^H @ y``; real data, so this is the transpose product."""
    y = _as_operand(y, A.nrows, "rmatvec")
    x = A._csr.T @ y
    flops.add(2 * A.nnz * (1 if y.ndim == 1 else y.shape[1]))
    return np.asarray(x)


def split_rows(A, upto):
    if not 0 < upto < A.nrows:
        raise IndexOutOfRange(f"split point {upto} must lie strictly inside 0..{A.nrows}")
    return A.row_slice(0, upto), A.row_slice(upto, A.nrows)


def split_cols(A, upto):
    if not 0 < upto < A.ncols:
        raise IndexOutOfRange(f"split point {upto} must lie strictly inside 0..{A.ncols}")
    left, right = split_rows(A.T, upto)
    return left.T, right.T


def vstack(top, bottom):
    if top.ncols != bottom.ncols:
        raise DimensionMismatch(f"cannot stack {top.shape} over {bottom.shape}")
    rp = np.concatenate([top.row_ptr, bottom.row_ptr[1:] + top.nnz])
    return SparseMatrix(
        top.nrows + bottom.nrows,
        top.ncols,
        rp,
        np.concatenate([top.col_idx, bottom.col_idx]),
        np.concatenate([top.values, bottom.values]),
    )


def hstack(left, right):
    if left.nrows != right.nrows:
        raise DimensionMismatch(f"cannot place {left.shape} beside {right.shape}")
    return vstack(left.T, right.T).T


# ---------------------------------------------------------------- Matrix Market

_FIELDS = {"real", "integer", "pattern"}


def read_matrix_market(path):
    """Read a coordinate Matrix Market file (real, integer or pattern; general)."""
    path = os.fspath(path)
    with open(path, "r", encoding="ascii", errors="replace") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1, path)

    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise ParseError("missing %%MatrixMarket header", 1, path)
    obj, fmt, field, symmetry = (h.lower() for h in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise UnsupportedFormat(f"{path}: only 'matrix coordinate' is supported, got '{obj} {fmt}'")
    if field not in _FIELDS:
        raise UnsupportedFormat(f"{path}: field '{field}' is not supported")
    if symmetry != "general":
        raise UnsupportedFormat(f"{path}: symmetry '{symmetry}' is not supported")

    lineno = 1
    size = None
    for lineno in range(2, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if text and not text.startswith("%"):
            size = text.split()
            break
    if size is None:
        raise ParseError("missing size line", lineno, path)
    try:
        nrows, ncols, nnz = (int(t) for t in size)
    except ValueError:
        raise ParseError(f"bad size line {' '.join(size)!r}", lineno, path) from None

    per_line = 2 if field == "pattern" else 3
    rows = np.empty(nnz, np.int64)
    cols = np.empty(nnz, np.int64)
    vals = np.ones(nnz)
    count = 0
    for lineno in range(lineno + 1, len(lines) + 1):
        text = lines[lineno - 1]
        parts = text.split()
        if not parts or parts[0].startswith("%"):
            continue
        if len(parts) != per_line:
            raise ParseError(f"expected {per_line} fields, got {len(parts)}", lineno, path)
        if count == nnz:
            raise ParseError(f"more than the declared {nnz} entries", lineno, path)
        try:
            i, j = int(parts[0]), int(parts[1])
            if per_line == 3:
                vals[count] = int(parts[2]) if field == "integer" else float(parts[2])
        except ValueError:
            raise ParseError(f"cannot parse entry {text.strip()!r}", lineno, path) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise ParseError(f"index ({i}, {j}) outside {nrows}x{ncols}", lineno, path)
        rows[count], cols[count] = i - 1, j - 1
        count += 1
    if count != nnz:
        raise ParseError(f"declared {nnz} entries, found {count}", len(lines), path)
    return _from_arrays(rows, cols, vals, nrows, ncols)


def write_matrix_market(A, path_or_file, comment=None):
    """Write ``A`` as ``matrix coordinate real general`` with 1-based indices."""
    own = not hasattr(path_or_file, "write")
    fh = open(path_or_file, "w", encoding="ascii") if own else path_or_file
    try:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{A.nrows} {A.ncols} {A.nnz}\n")
        rows = np.repeat(np.arange(A.nrows), np.diff(A.row_ptr))
        for i, j, v in zip(rows, A.col_idx, A.values):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")
    finally:
        if own:
            fh.close()


def ceil_half(m):
    return int(math.ceil(m / 2))
