"""Seeded random test matrices and update problems at desk scale."""
import numpy as np
import scipy.sparse as sp

from .dense import jacobi_svd
from .problem import Direction, TruncatedSvd, UpdateProblem
from .sparse import SparseMatrix, ceil_half, split_cols, split_rows

__all__ = [
    "random_sparse",
    "low_rank",
    "term_document_like",
    "decaying_spectrum",
    "exact_svd",
    "make_problem",
]


def random_sparse(m, n, density=0.3, seed=0):
    """Gaussian entries on a random sparsity pattern; every row gets one entry."""
    rng = np.random.default_rng(seed)
    a = sp.random(m, n, density=density, random_state=rng, data_rvs=rng.standard_normal)
    a = a.tolil()
    for i in range(m):
        if a.rows[i] == []:
            a[i, rng.integers(n)] = rng.standard_normal()
    return SparseMatrix.from_scipy(a.tocsr())


def low_rank(m, n, rank, seed=0, decay=1.0):
    """Dense ``m x n`` matrix of exact rank ``rank`` with singular values ``decay**j``-ish."""
    rng = np.random.default_rng(seed)
    left = np.linalg.qr(rng.standard_normal((m, rank)))[0]
    right = np.linalg.qr(rng.standard_normal((n, rank)))[0]
    sv = 10.0 * decay ** np.arange(rank) * (1 + rng.random(rank))
    sv = np.sort(sv)[::-1]
    return SparseMatrix.from_dense((left * sv) @ right.T)


def term_document_like(m, n, density=0.05, seed=0):
    """Nonnegative sparse matrix with a Zipf-like column popularity profile.

    Term-document and rating matrices have a dominant leading singular
    value followed by a slowly decaying tail; this mimics that shape.
    """
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n + 1) ** 0.6
    weights /= weights.sum()
    per_row = max(1, int(round(density * n)))
    rows, cols, vals = [], [], []
    for i in range(m):
        c = rng.choice(n, size=per_row, replace=False, p=weights)
        rows.extend([i] * per_row)
        cols.extend(c)
        vals.extend(np.log1p(rng.poisson(2.0, per_row) + 1.0))
    a = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
    return SparseMatrix.from_scipy(a)


def exact_svd(A, k):
    """Leading ``k`` triplets of ``A`` from the Jacobi oracle."""
    return TruncatedSvd.from_full(jacobi_svd(A.to_dense()), k)


def make_problem(A, k, split=None, direction=Direction.ROWS):
    """Split ``A`` at ``split`` (default ``ceil(m/2)``) and attach the exact rank-k SVD of the base."""
    direction = Direction(direction)
    if direction is Direction.ROWS:
        B, E = split_rows(A, ceil_half(A.nrows) if split is None else split)
    else:
        B, E = split_cols(A, ceil_half(A.ncols) if split is None else split)
    return UpdateProblem(B, exact_svd(B, k), E, direction)


def decaying_spectrum(m, n, rate=0.85, seed=0):
    """Dense ``m x n`` matrix with Haar-random singular vectors and singular values ``rate**j``."""
    rng = np.random.default_rng(seed)
    p = min(m, n)
    left = np.linalg.qr(rng.standard_normal((m, p)))[0]
    right = np.linalg.qr(rng.standard_normal((n, p)))[0]
    return SparseMatrix.from_dense((left * rate ** np.arange(p)) @ right.T)
