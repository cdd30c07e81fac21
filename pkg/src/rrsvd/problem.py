"""Truncated SVD triplets and the row/column update problem."""
from dataclasses import dataclass
import enum

import numpy as np

from . import flops
from .dense import FullSvd
from .errors import DimensionMismatch
from .sparse import SparseMatrix, hstack, matvec, rmatvec, vstack

__all__ = ["Direction", "TruncatedSvd", "UpdateProblem"]


class Direction(str, enum.Enum):
    ROWS = "rows"
    COLUMNS = "cols"

    def flipped(self):
        return Direction.COLUMNS if self is Direction.ROWS else Direction.ROWS


@dataclass(frozen=True, eq=False)
class TruncatedSvd:
    """Rank-k factors ``u @ diag(s) @ v.T``."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        s = np.asarray(self.s, dtype=np.float64).reshape(-1)
        v = np.asarray(self.v, dtype=np.float64)
        if u.ndim != 2 or v.ndim != 2 or u.shape[1] != s.size or v.shape[1] != s.size:
            raise DimensionMismatch(
                f"inconsistent factor shapes u{u.shape}, s{s.shape}, v{v.shape}"
            )
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "v", v)

    @property
    def k(self):
        return self.s.size

    @property
    def shape(self):
        return (self.u.shape[0], self.v.shape[0])

    @classmethod
    def from_full(cls, full, k):
        if k > full.s.size:
            raise ValueError(f"requested rank {k} exceeds the {full.s.size} available triplets")
        return cls(full.u[:, :k], full.s[:k], full.v[:, :k])

    @classmethod
    def empty(cls, m, n):
        return cls(np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0)))

    def transpose(self):
        return TruncatedSvd(self.v, self.s, self.u)

    def to_dense(self):
        return (self.u * self.s) @ self.v.T

    def as_full(self):
        return FullSvd(self.u, self.s, self.v)

    def orthogonality_error(self):
        """Frobenius distances of ``u^H u`` and ``v^H v`` from the identity."""
        eye = np.eye(self.k)
        return (
            float(np.linalg.norm(self.u.T @ self.u - eye)),
            float(np.linalg.norm(self.v.T @ self.v - eye)),
        )

    def check(self, tol=1e-8):
        """Raise ``ValueError`` unless the factors satisfy the triplet invariants."""
        eu, ev = self.orthogonality_error()
        if eu > tol or ev > tol:
            raise ValueError(f"factors not orthonormal (u: {eu:.2e}, v: {ev:.2e})")
        if self.k and (np.any(self.s <= 0) or np.any(np.diff(self.s) > 0)):
            raise ValueError("singular values must be positive and nonincreasing")
        return self


@dataclass(frozen=True, eq=False)
class UpdateProblem:
    """``A = [B; E]`` (rows) or ``A = [B, E]`` (columns) with a rank-k SVD of ``B``."""

    base: SparseMatrix
    base_svd: TruncatedSvd
    update: SparseMatrix
    direction: Direction = Direction.ROWS

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        B, E, svd = self.base, self.update, self.base_svd
        if self.direction is Direction.ROWS and E.ncols != B.ncols:
            raise DimensionMismatch(f"row update needs {B.ncols} columns, got {E.ncols}")
        if self.direction is Direction.COLUMNS and E.nrows != B.nrows:
            raise DimensionMismatch(f"column update needs {B.nrows} rows, got {E.nrows}")
        if svd.shape != B.shape:
            raise DimensionMismatch(f"base SVD is {svd.shape}, base matrix is {B.shape}")
        if svd.k > min(B.shape):
            raise ValueError(f"rank {svd.k} exceeds min{B.shape}")

    @property
    def m(self):
        return self.base.nrows

    @property
    def n(self):
        return self.base.ncols

    @property
    def k(self):
        return self.base_svd.k

    @property
    def s(self):
        """Number of appended rows or columns."""
        E = self.update
        return E.nrows if self.direction is Direction.ROWS else E.ncols

    @property
    def shape(self):
        if self.direction is Direction.ROWS:
            return (self.m + self.s, self.n)
        return (self.m, self.n + self.s)

    def stacked(self):
        if self.direction is Direction.ROWS:
            return vstack(self.base, self.update)
        return hstack(self.base, self.update)

    def transpose(self):
        return UpdateProblem(
            self.base.T, self.base_svd.transpose(), self.update.T, self.direction.flipped()
        )

    def apply(self, x):
        """``A @ x`` without forming ``A``."""
        B, E = self.base, self.update
        if self.direction is Direction.ROWS:
            return np.concatenate([matvec(B, x), matvec(E, x)], axis=0)
        top, bottom = x[: self.n], x[self.n :]
        return matvec(B, top) + matvec(E, bottom)

    def apply_adjoint(self, y):
        """``A^H @ y`` without forming ``A``."""
        B, E = self.base, self.update
        if self.direction is Direction.ROWS:
            out = rmatvec(B, y[: self.m]) + rmatvec(E, y[self.m :])
            flops.add(y[0].size * self.n if y.ndim == 2 else self.n)
            return out
        return np.concatenate([rmatvec(B, y), rmatvec(E, y)], axis=0)
