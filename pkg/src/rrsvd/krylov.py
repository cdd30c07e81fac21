"""Matrix-free Krylov kernels.

Everything here talks to matrices through :class:`LinearOperator`, so the
same code runs on sparse matrices, on the composed projected operators of
the updating algorithms, and on operators whose every application hides a
linear solve.
"""
from dataclasses import dataclass, field
import enum
from typing import Callable, NamedTuple, Optional
import warnings

import numpy as np
import scipy.linalg

from . import flops
from .dense import normalize_signs, tridiag_eig
from .errors import DimensionMismatch, NotConverged, NotPositiveDefinite, RankDeficient
from .problem import Direction, UpdateProblem
from .sparse import SparseMatrix, matvec, rmatvec

__all__ = [
    "LinearOperator",
    "aslinearoperator",
    "BidiagonalFactors",
    "gkl_bidiagonalize",
    "LanczosResult",
    "lanczos_sym_topk",
    "CgSettings",
    "CgResult",
    "deflated_block_cg",
    "apply_deflated_resolvent",
    "XMode",
    "build_x_lambda_r",
    "estimate_sigma1",
]


# --------------------------------------------------------------------- operator


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """``apply`` maps R^ncols -> R^nrows; both callables accept vectors or blocks."""

    nrows: int
    ncols: int
    apply: Callable
    apply_adjoint: Callable
    flops_per_apply: int = 0
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.check and self.nrows and self.ncols:
            self.check_adjoint()

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.ncols:
            raise DimensionMismatch(f"operator takes {self.ncols} rows, got {x.shape}")
        return self.apply(x)

    def rmatvec(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape[0] != self.nrows:
            raise DimensionMismatch(f"adjoint takes {self.nrows} rows, got {y.shape}")
        return self.apply_adjoint(y)

    def check_adjoint(self, tol=1e-10, seed=20240917):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(self.ncols)
        y = rng.standard_normal(self.nrows)
        with flops.counting():  # probe products stay out of the caller's counts
            ax = self.apply(x)
            ahy = self.apply_adjoint(y)
        lhs, rhs = float(y @ ax), float(ahy @ x)
        scale = np.linalg.norm(y) * np.linalg.norm(ax) + np.linalg.norm(ahy) * np.linalg.norm(x)
        if abs(lhs - rhs) > tol * max(scale, np.finfo(float).tiny):
            raise ValueError(
                f"apply and apply_adjoint are not adjoint: {lhs!r} vs {rhs!r}"
            )

    def to_dense(self):
        return self.apply(np.eye(self.ncols))


def aslinearoperator(A):
    """Wrap a :class:`SparseMatrix`, ndarray or :class:`UpdateProblem`."""
    if isinstance(A, LinearOperator):
        return A
    if isinstance(A, SparseMatrix):
        return LinearOperator(
            A.nrows, A.ncols, lambda x: matvec(A, x), lambda y: rmatvec(A, y), 2 * A.nnz, check=False
        )
    if isinstance(A, UpdateProblem):
        m, n = A.shape
        return LinearOperator(m, n, A.apply, A.apply_adjoint, 2 * (A.base.nnz + A.update.nnz), check=False)
    a = np.asarray(A, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-d array")

    def apply(x):
        return flops.dense_matmul(a, x)

    def apply_adjoint(y):
        return flops.dense_matmul(a.T, y)

    return LinearOperator(a.shape[0], a.shape[1], apply, apply_adjoint, 2 * a.size, check=False)


def _reorthogonalize(w, basis):
    """Two classical Gram-Schmidt passes of ``w`` against ``basis`` columns."""
    if basis.shape[1] == 0:
        return w
    for _ in range(2):
        w = w - basis @ (basis.T @ w)
    flops.add(8 * basis.size)
    return w


# ------------------------------------------------------------------------- GKL


@dataclass(frozen=True, eq=False)
class BidiagonalFactors:
    """``A @ v_basis = u_basis @ bd`` with ``bd`` lower bidiagonal.

    When the recurrence stops on a vanishing ``beta`` the trailing column of
    ``u_basis`` is zero and ``beta[-1] == 0``.
    """

    u_basis: np.ndarray
    v_basis: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    breakdown: bool = False

    @property
    def steps(self):
        return self.alpha.size

    @property
    def bd(self):
        d = self.alpha.size
        out = np.zeros((d + 1, d))
        out[np.arange(d), np.arange(d)] = self.alpha
        out[np.arange(1, d + 1), np.arange(d)] = self.beta
        return out

    def singular_triplets(self, k=None):
        """Ritz approximations ``(u, s, v)`` of the leading ``k`` singular triplets."""
        d = self.steps
        if d == 0:
            m, n = self.u_basis.shape[0], self.v_basis.shape[0]
            return np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0))
        p, s, qt = np.linalg.svd(self.bd, full_matrices=False)
        k = d if k is None else min(k, d)
        u = self.u_basis @ p[:, :k]
        v = self.v_basis @ qt[:k].T
        u, v = normalize_signs(u, v)
        return u, s[:k], v


def gkl_bidiagonalize(op, steps, seed=0):
    """Golub-Kahan-Lanczos bidiagonalization with full reorthogonalization.

    The start vector lives in R^nrows and is drawn from ``seed``. The run
    stops early when ``alpha`` or ``beta`` drops below ``1e-14 * alpha_1``;
    the result is then shorter than ``steps`` and flagged.
    """
    op = aslinearoperator(op)
    m, n = op.shape
    if steps > min(m, n):
        raise ValueError(f"steps={steps} exceeds min{op.shape}")
    rng = np.random.default_rng(seed)
    U = np.zeros((m, steps + 1))
    V = np.zeros((n, steps))
    alpha = np.zeros(steps)
    beta = np.zeros(steps)

    u = rng.standard_normal(m)
    U[:, 0] = u / np.linalg.norm(u)
    v_prev = np.zeros(n)
    b_prev = 0.0
    a1 = None
    d = 0
    breakdown = False
    for j in range(steps):
        v = op.rmatvec(U[:, j]) - b_prev * v_prev
        v = _reorthogonalize(v, V[:, :j])
        a = np.linalg.norm(v)
        if a1 is None:
            a1 = a
        if a == 0 or a <= 1e-14 * a1:
            breakdown = True
            break
        V[:, j] = v / a
        alpha[j] = a
        u = op.matvec(V[:, j]) - a * U[:, j]
        u = _reorthogonalize(u, U[:, : j + 1])
        b = np.linalg.norm(u)
        d = j + 1
        flops.add(10 * (m + n))
        if b <= 1e-14 * a1:
            beta[j] = 0.0
            breakdown = True
            break
        beta[j] = b
        U[:, j + 1] = u / b
        v_prev, b_prev = V[:, j], b
    return BidiagonalFactors(U[:, : d + 1], V[:, :d], alpha[:d], beta[:d], breakdown)


# --------------------------------------------------------------------- Lanczos


class LanczosResult(NamedTuple):
    theta: np.ndarray
    vectors: np.ndarray
    steps: int
    residuals: np.ndarray


def _ritz_check(alphas, betas, k, beta_last, tol):
    w, z = tridiag_eig(np.asarray(alphas), np.asarray(betas))
    order = np.argsort(-w, kind="stable")[:k]
    theta = w[order]
    res = np.abs(beta_last * z[-1, order])
    top = max(abs(theta[0]), np.finfo(float).tiny)
    # pairs far below the top are judged against 1e-3 of it: their relative
    # residual cannot reach tol anyway once round-off is of order eps*theta_1
    ok = res <= tol * np.maximum(np.abs(theta), 1e-3 * top)
    return theta, z[:, order], res, bool(ok.all())


def lanczos_sym_topk(op, k, max_steps=None, tol=1e-10, seed=0):
    """Largest ``k`` eigenpairs of a symmetric PSD operator by unrestarted Lanczos.

    Full reorthogonalization every step. If the Krylov space becomes
    invariant before ``k`` pairs converge, the recurrence continues from a
    fresh random vector orthogonal to the current basis. Raises
    :class:`NotConverged` (with the best-effort :class:`LanczosResult` as
    ``partial``) when ``max_steps`` runs out.
    """
    op = aslinearoperator(op)
    N = op.nrows
    if op.ncols != N:
        raise DimensionMismatch("Lanczos needs a square operator")
    if max_steps is None:
        max_steps = min(N, max(10 * k, 30))
    max_steps = min(max_steps, N)
    if not 0 <= k <= max_steps:
        raise ValueError(f"need k <= max_steps <= {N}, got k={k}, max_steps={max_steps}")
    if k == 0:
        return LanczosResult(np.zeros(0), np.zeros((N, 0)), 0, np.zeros(0))

    rng = np.random.default_rng(seed)
    Q = np.zeros((N, max_steps))
    alphas, betas = [], []
    q = rng.standard_normal(N)
    q /= np.linalg.norm(q)
    q_prev = np.zeros(N)
    b_prev = 0.0
    scale = 0.0
    theta = z = res = None
    for j in range(max_steps):
        Q[:, j] = q
        w = op.matvec(q)
        a = float(q @ w)
        w = w - a * q - b_prev * q_prev
        w = _reorthogonalize(w, Q[:, : j + 1])
        b = float(np.linalg.norm(w))
        flops.add(8 * N)
        alphas.append(a)
        scale = max(scale, abs(a) + b + b_prev)
        invariant = b <= 1e-14 * scale
        if j + 1 >= k:
            theta, z, res, done = _ritz_check(alphas, betas, k, 0.0 if invariant else b, tol)
            # an invariant subspace may hide further copies of a repeated
            # eigenvalue, so keep going from a fresh vector while room is left
            if done and not (invariant and j + 1 < max_steps):
                break
        if j + 1 == max_steps:
            break
        if invariant:
            q_new = _reorthogonalize(rng.standard_normal(N), Q[:, : j + 1])
            q_new /= np.linalg.norm(q_new)
            b = 0.0
        else:
            q_new = w / b
        betas.append(b)
        q_prev, q, b_prev = q, q_new, b
    steps = len(alphas)
    vectors = flops.dense_matmul(Q[:, :steps], z) if z is not None else np.zeros((N, 0))
    result = LanczosResult(theta, vectors, steps, res)
    if theta is None or not done:
        raise NotConverged(
            f"Lanczos: {k} Ritz pairs not converged to {tol:g} in {steps} steps",
            partial=result,
            residuals=res,
            iterations=steps,
        )
    return result


# -------------------------------------------------------------- deflated block CG


@dataclass(frozen=True)
class CgSettings:
    tol: float = 1e-8
    max_iter: int = 1000
    record_history: bool = False

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


class CgStep(NamedTuple):
    residual: float  # largest per-column relative residual
    energy: float  # 1/2 x^T K x - b^T x, summed over columns; tracks the K-norm error


class CgResult(NamedTuple):
    x: np.ndarray
    iters: int
    history: list


def _project_out(u_k, x):
    if u_k.shape[1] == 0:
        return x
    return x - flops.dense_matmul(u_k, flops.dense_matmul(u_k.T, x))


def _orth_columns(x, drop=1e-14):
    """Orthonormal basis for range(x), dropping numerically dependent directions."""
    if x.shape[1] == 0:
        return x
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    flops.add(6 * x.shape[0] * x.shape[1] ** 2)
    if s.size == 0 or s[0] == 0:
        return u[:, :0]
    return u[:, s > drop * s[0]]


def deflated_block_cg(B, u_k, lam, rhs, settings=None):
    """Solve ``-(I-U U^H)(B B^H - lam I)(I-U U^H) X = (I-U U^H) rhs`` by block CG.

    Breakdown-free variant: the search block is re-orthonormalized every
    iteration and dependent directions are dropped, so rank-deficient or
    partially converged right-hand sides are handled. Stops when every
    column's residual is at most ``tol`` times its right-hand-side norm.
    """
    settings = settings or CgSettings()
    rhs = np.asarray(rhs, dtype=np.float64)
    vector = rhs.ndim == 1
    # twice: a right-hand side mostly inside range(U_k) leaves a remainder
    # that one pass does not make orthogonal to working precision
    b = _project_out(u_k, _project_out(u_k, rhs.reshape(rhs.shape[0], -1)))
    m, p = b.shape
    if m != B.nrows:
        raise DimensionMismatch(f"rhs has {m} rows, B has {B.nrows}")

    def K(x):
        x = _project_out(u_k, x)
        y = lam * x - matvec(B, rmatvec(B, x))
        flops.add(2 * x.size)
        return _project_out(u_k, y)

    bnorm = np.linalg.norm(b, axis=0)
    live = bnorm > 0
    X = np.zeros_like(b)
    history = []
    if not live.any():
        return CgResult(X[:, 0] if vector else X, 0, history)
    safe = np.where(live, bnorm, 1.0)

    R = b.copy()
    P = _orth_columns(_project_out(u_k, _orth_columns(R / safe)), drop=1e-8)
    it = 0
    while True:
        it += 1
        Q = K(P)
        PtQ = flops.dense_matmul(P.T, Q)
        PtQ = 0.5 * (PtQ + PtQ.T)
        try:
            chol = scipy.linalg.cho_factor(PtQ)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(
                f"block CG: P^T K P is not positive definite at iteration {it}; "
                f"the shift {lam!r} is probably below sigma_1(B)^2"
            ) from None
        alpha = scipy.linalg.cho_solve(chol, flops.dense_matmul(P.T, R))
        X += flops.dense_matmul(P, alpha)
        R -= flops.dense_matmul(Q, alpha)
        rel = np.linalg.norm(R, axis=0) / safe
        worst = float(rel[live].max())
        if settings.record_history:
            energy = -0.5 * float(np.sum(X * (b + R)))
            history.append(CgStep(worst, energy))
        if worst <= settings.tol:
            break
        if it >= settings.max_iter:
            raise NotConverged(
                f"block CG did not reach {settings.tol:g} in {it} iterations",
                partial=X[:, 0] if vector else X,
                residuals=rel,
                iterations=it,
            )
        beta = -scipy.linalg.cho_solve(chol, flops.dense_matmul(Q.T, R))
        P = _orth_columns(_project_out(u_k, R + flops.dense_matmul(P, beta)) / safe)
        # nearly converged columns normalize to noise that leaks into range(U_k),
        # where K vanishes; a second projection keeps P^T K P definite
        P = _orth_columns(_project_out(u_k, P), drop=1e-8)
        if P.shape[1] == 0:
            raise NotConverged(
                "block CG search space collapsed", partial=X, residuals=rel, iterations=it
            )
    return CgResult(X[:, 0] if vector else X, it, history)


def apply_deflated_resolvent(B, u_k, lam, y, cg=None):
    """``(I - U U^H)(B B^H - lam I)^{-1} y`` through one deflated block CG solve."""
    x, _, _ = deflated_block_cg(B, u_k, lam, y, cg)
    return -x


# ------------------------------------------------------------------ X_{lambda,r}


class XMode(str, enum.Enum):
    RANDOMIZED_SVD = "randomized"
    GKL_ON_PRODUCT = "gkl"


def _rank_cut(svals, scale):
    """Count singular values that are numerically nonzero."""
    if svals.size == 0 or svals[0] <= 1e-10 * scale:
        return 0
    return int(np.sum(svals > max(1e-10 * scale, 1e-12 * svals[0])))


def build_x_lambda_r(B, base_svd, E, lam, r, sketch_cols=None, mode=XMode.RANDOMIZED_SVD,
                     seed=0, cg=None):
    """Orthonormal basis of the ``r`` leading left singular directions of
    ``-(I - U_k U_k^H)(B B^H - lam I)^{-1} B E^H``.

    ``E`` holds the new rows (``s x n``). The result is orthogonal to
    ``base_svd.u``; if fewer than ``r`` independent directions exist the
    shorter basis is returned and :class:`RankDeficient` is warned.
    """
    mode = XMode(mode)
    u_k = base_svd.u
    m = B.nrows
    s = E.nrows
    if sketch_cols is None:
        sketch_cols = 2 * r
    if r > sketch_cols:
        raise ValueError(f"r={r} exceeds sketch_cols={sketch_cols}")
    rng_seed = seed
    enorm = E.frobenius_norm()
    # singular values of the product are at most ~||E|| sigma/(lam - sigma^2);
    # 1/sqrt(lam) sets the scale below which directions are round-off
    scale = enorm / np.sqrt(lam) if lam > 0 else enorm

    def resolvent(y):
        return apply_deflated_resolvent(B, u_k, lam, y, cg)

    if enorm == 0 or r == 0:
        X = np.zeros((m, 0))
    elif mode is XMode.RANDOMIZED_SVD:
        rng = np.random.default_rng(rng_seed)
        R = rng.standard_normal((m, sketch_cols))
        T = resolvent(R)
        T = matvec(B, rmatvec(E, matvec(E, rmatvec(B, T))))
        Y = resolvent(T)
        Qy = _orth_columns(Y, drop=1e-12)
        # Rayleigh-Ritz compression: SVD of Q^H M with M^H Q = E B^H B(lam) Q
        C = matvec(E, rmatvec(B, resolvent(Qy)))
        f, sv, _ = np.linalg.svd(C.T, full_matrices=False)
        keep = min(r, _rank_cut(sv, scale))
        X = flops.dense_matmul(Qy, f[:, :keep])
    else:
        n_steps = min(max(2 * r, r + 10), m, s)

        def apply(x):
            return -resolvent(matvec(B, rmatvec(E, x)))

        def apply_adjoint(y):
            return -matvec(E, rmatvec(B, resolvent(y)))

        op = LinearOperator(m, s, apply, apply_adjoint, check=False)
        fac = gkl_bidiagonalize(op, n_steps, seed=rng_seed)
        uu, sv, _ = fac.singular_triplets()
        keep = min(r, _rank_cut(sv, scale))
        X = uu[:, :keep]

    # range(X) lies in range(I - U_k U_k^H) in exact arithmetic; enforce it
    X = _project_out(u_k, X)
    X = _orth_columns(_project_out(u_k, _orth_columns(X, drop=1e-8)), drop=1e-8)
    if X.shape[1] < r:
        warnings.warn(
            RankDeficient(
                f"X_lambda_r has numerical rank {X.shape[1]} < r={r}",
                achieved_rank=X.shape[1],
                requested_rank=r,
            ),
            stacklevel=2,
        )
    return X


# ------------------------------------------------------------------ sigma_1


def estimate_sigma1(A_parts, steps=10, seed=0):
    """Largest singular value from ``steps`` GKL iterations (a lower estimate).

    ``A_parts`` may be a :class:`SparseMatrix`, a dense array, a
    :class:`LinearOperator`, or an :class:`UpdateProblem`, in which case the
    stacked matrix is never formed.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    op = aslinearoperator(A_parts)
    steps = min(steps, *op.shape)
    fac = gkl_bidiagonalize(op, steps, seed)
    if fac.steps == 0:
        return 0.0
    return float(np.linalg.svd(fac.bd, compute_uv=False)[0])
