"""Rayleigh-Ritz updating of a rank-k truncated SVD.

For ``A = [B; E]`` the left singular vectors of ``A`` are sought inside the
range of a structured basis

    Z = [[U_k, X], [0, I_s]]

where ``X`` is empty (basic basis) or spans the leading directions of the
deflated resolvent applied to ``B E^H`` (enhanced basis). The ``k`` leading
eigenpairs of ``(Z^H A)(Z^H A)^H`` come from Lanczos; the right singular
vectors follow from one product with ``A^H``. Column updates
``A = [B, E]`` run the same machinery on the transposed problem.
"""
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional
import warnings

import numpy as np

from . import flops
from .dense import normalize_signs
from .errors import DimensionMismatch, NotConverged, TruncatedResult
from .krylov import (
    CgSettings,
    LinearOperator,
    XMode,
    build_x_lambda_r,
    lanczos_sym_topk,
)
from .problem import Direction, TruncatedSvd, UpdateProblem
from .sparse import matvec, rmatvec

__all__ = [
    "ProjectionBasis",
    "RitzResult",
    "LanczosSettings",
    "build_z_basic",
    "build_z_enhanced",
    "compose_zha_operator",
    "rr_svd_rows",
    "rr_svd_cols",
    "rr_svd",
]


@dataclass(frozen=True, eq=False)
class ProjectionBasis:
    """Block form of ``Z``; the dense ``(m+s) x total_cols`` matrix is never built.

    For column updates ``u_block`` holds ``V_k`` and the identity block
    covers the appended columns.
    """

    u_block: np.ndarray
    x_block: Optional[np.ndarray]
    s_identity: int
    lam: Optional[float] = None
    direction: Direction = Direction.ROWS
    rank_deficient: bool = False

    @property
    def k(self):
        return self.u_block.shape[1]

    @property
    def r(self):
        return 0 if self.x_block is None else self.x_block.shape[1]

    @property
    def total_cols(self):
        return self.k + self.r + self.s_identity

    @property
    def nrows(self):
        return self.u_block.shape[0] + self.s_identity

    def _split(self, c):
        k, r = self.k, self.r
        return c[:k], c[k : k + r], c[k + r :]

    def apply(self, c):
        """``Z @ c`` for coordinates ``c`` of length ``total_cols``."""
        c = np.asarray(c, dtype=np.float64)
        c_u, c_x, c_s = self._split(c)
        top = flops.dense_matmul(self.u_block, c_u)
        if self.r:
            top = top + flops.dense_matmul(self.x_block, c_x)
        return np.concatenate([top, c_s], axis=0)

    def apply_adjoint(self, y):
        """``Z^H @ y``."""
        y = np.asarray(y, dtype=np.float64)
        m = self.u_block.shape[0]
        top, bottom = y[:m], y[m:]
        parts = [flops.dense_matmul(self.u_block.T, top)]
        if self.r:
            parts.append(flops.dense_matmul(self.x_block.T, top))
        parts.append(bottom)
        return np.concatenate(parts, axis=0)

    def densify(self):
        """Dense ``Z``. For verification at small sizes only."""
        return self.apply(np.eye(self.total_cols))


class RitzResult(NamedTuple):
    theta: np.ndarray
    f: np.ndarray
    steps_used: int
    residuals: np.ndarray


@dataclass(frozen=True)
class LanczosSettings:
    tol: float = 1e-10
    max_steps: Optional[int] = None  # None: min(dimension, max(10k, 30))
    seed: int = 0


def build_z_basic(base_svd, s, direction=Direction.ROWS):
    """``Z = blockdiag(U_k, I_s)``; zero FLOPs."""
    if s < 1:
        raise ValueError("the update must add at least one row or column")
    direction = Direction(direction)
    known = base_svd.u if direction is Direction.ROWS else base_svd.v
    return ProjectionBasis(known, None, s, direction=direction)


def build_z_enhanced(problem, lam, r, sketch_cols=None, mode=XMode.RANDOMIZED_SVD, seed=0,
                     cg=None):
    """``Z = [[U_k, X_{lam,r}], [0, I_s]]``.

    Degrades gracefully to the basic basis when the resolvent product has
    numerical rank below ``r`` (for instance ``E = 0`` or ``rank(B) = k``).
    """
    if r < 1:
        raise ValueError("r must be positive")
    rows = problem if problem.direction is Direction.ROWS else problem.transpose()
    x = build_x_lambda_r(
        rows.base, rows.base_svd, rows.update, lam, r, sketch_cols, mode, seed, cg or CgSettings()
    )
    return ProjectionBasis(
        rows.base_svd.u,
        x if x.shape[1] else None,
        rows.s,
        lam=float(lam),
        direction=problem.direction,
        rank_deficient=x.shape[1] < r,
    )


def _rows_view(problem, basis):
    if basis.direction is not problem.direction:
        raise ValueError("basis and problem disagree on the update direction")
    rows = problem if problem.direction is Direction.ROWS else problem.transpose()
    if basis.u_block.shape[0] != rows.m or basis.s_identity != rows.s:
        raise DimensionMismatch(
            f"basis blocks ({basis.u_block.shape[0]}, {basis.s_identity}) do not match "
            f"problem ({rows.m}, {rows.s})"
        )
    return rows


def compose_zha_operator(problem, basis):
    """Matrix-free ``W = (Z^H A)(Z^H A)^H`` of order ``basis.total_cols``.

    ``Z^H A`` is assembled from blocks ``Sigma_k V_k^H``, ``X^H B`` and ``E``;
    ``B`` itself enters only through ``B^H X``, computed once here.
    """
    return _compose(_rows_view(problem, basis), basis)


def _compose(rows, basis):
    svd, E = rows.base_svd, rows.update
    k, r = basis.k, basis.r
    V, sig = svd.v, svd.s
    n = rows.n
    BtX = rmatvec(rows.base, basis.x_block) if r else None

    def zha_adjoint(c):
        # (Z^H A)^H c = V_k Sigma_k c_u + B^H X c_x + E^H c_s
        c_u, c_x, c_s = c[:k], c[k : k + r], c[k + r :]
        sc = c_u * (sig if c.ndim == 1 else sig[:, None])
        y = flops.dense_matmul(V, sc) + rmatvec(E, c_s)
        if r:
            y = y + flops.dense_matmul(BtX, c_x)
        return y

    def zha(y):
        top = flops.dense_matmul(V.T, y)
        top = top * (sig if y.ndim == 1 else sig[:, None])
        parts = [top]
        if r:
            parts.append(flops.dense_matmul(BtX.T, y))
        parts.append(matvec(E, y))
        return np.concatenate(parts, axis=0)

    def apply(c):
        return zha(zha_adjoint(c))

    dim = basis.total_cols
    return LinearOperator(dim, dim, apply, apply, flops_per_apply=4 * (n * (k + r) + E.nnz))


def _recover(rows, basis, vecs, eig, steps, residuals, reorthogonalize_v):
    eig = np.clip(eig, 0.0, None)
    theta = np.sqrt(eig)
    # rounding in W leaves eigenvalues near eps*||W||, i.e. theta near sqrt(eps)*theta_1
    keep = eig > 1e-14 * eig[0] if eig.size and eig[0] > 0 else np.zeros(eig.size, bool)
    if not keep.all():
        warnings.warn(
            TruncatedResult(f"dropped {int((~keep).sum())} numerically zero Ritz values"),
            stacklevel=3,
        )
    theta, vecs, residuals = theta[keep], vecs[:, keep], residuals[keep]
    u_bar = basis.apply(vecs)
    v_bar = rows.apply_adjoint(u_bar) / theta
    flops.add(v_bar.size)
    u_bar, v_bar = normalize_signs(u_bar, v_bar)
    if reorthogonalize_v and v_bar.shape[1]:
        q, rr = np.linalg.qr(v_bar)
        flops.add(4 * v_bar.shape[0] * v_bar.shape[1] ** 2)
        v_bar = q * np.sign(np.where(np.diag(rr) == 0, 1.0, np.diag(rr)))
    ritz = RitzResult(theta, vecs, steps, residuals)
    return TruncatedSvd(u_bar, theta, v_bar), ritz


def _rr_rows_core(rows, basis, k_out, lanczos, reorthogonalize_v):
    lanczos = lanczos or LanczosSettings()
    if k_out is None:
        k_out = rows.k if rows.k else min(basis.total_cols, 1)
    if k_out > basis.total_cols:
        raise ValueError(f"k_out={k_out} exceeds the basis dimension {basis.total_cols}")
    with flops.phase("build_z"):
        op = _compose(rows, basis)
    with flops.phase("projected_solve"):
        try:
            res = lanczos_sym_topk(op, k_out, lanczos.max_steps, lanczos.tol, lanczos.seed)
        except NotConverged as exc:
            part = exc.partial
            if part is None:
                raise
            with flops.phase("recover_v"):
                partial = _recover(rows, basis, part.vectors, part.theta, part.steps,
                                   part.residuals, reorthogonalize_v)
            raise NotConverged(str(exc), partial=partial, residuals=exc.residuals,
                               iterations=exc.iterations) from exc
    with flops.phase("recover_v"):
        return _recover(rows, basis, res.vectors, res.theta, res.steps, res.residuals,
                        reorthogonalize_v)


def rr_svd_rows(problem, basis, k_out=None, lanczos=None, reorthogonalize_v=False):
    """Update after appending rows: returns ``(TruncatedSvd, RitzResult)``.

    ``u`` is ``Z F_k`` and is orthonormal; ``v = A^H u diag(theta)^{-1}`` is
    left as computed unless ``reorthogonalize_v`` is set.
    """
    if problem.direction is not Direction.ROWS:
        raise ValueError("rr_svd_rows needs a row update")
    rows = _rows_view(problem, basis)
    return _rr_rows_core(rows, basis, k_out, lanczos, reorthogonalize_v)


def rr_svd_cols(problem, basis, k_out=None, lanczos=None, reorthogonalize_u=False):
    """Update after appending columns; mirror image of :func:`rr_svd_rows`.

    Here ``v = Z G_k`` is orthonormal and ``u = A v diag(theta)^{-1}``.
    """
    if problem.direction is not Direction.COLUMNS:
        raise ValueError("rr_svd_cols needs a column update")
    rows = _rows_view(problem, basis)
    try:
        svd_t, ritz = _rr_rows_core(rows, basis, k_out, lanczos, reorthogonalize_u)
    except NotConverged as exc:
        if exc.partial is not None:
            svd_t, ritz = exc.partial
            exc.partial = (_flip(svd_t), ritz)
        raise
    return _flip(svd_t), ritz


def _flip(svd_t):
    u, v = normalize_signs(svd_t.v, svd_t.u)
    return TruncatedSvd(u, svd_t.s, v)


def rr_svd(problem, basis, k_out=None, lanczos=None, reorthogonalize=False):
    """Dispatch to :func:`rr_svd_rows` or :func:`rr_svd_cols`."""
    if problem.direction is Direction.ROWS:
        return rr_svd_rows(problem, basis, k_out, lanczos, reorthogonalize)
    return rr_svd_cols(problem, basis, k_out, lanczos, reorthogonalize)
