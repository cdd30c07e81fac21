"""Reference updating schemes: Zha-Simon and the Vecharynski-Saad "SV" variant.

Both project onto ``Z = blockdiag(U_k, I_s)`` on the left. Zha-Simon takes
``W = [V_k, Q]`` with ``(I - V_k V_k^H) E^H = Q R``; the SV variant replaces
``Q`` by ``r`` leading left singular vectors of the same matrix, obtained by
Golub-Kahan-Lanczos. The small projected matrix is decomposed densely.
"""
from dataclasses import dataclass
import enum
from typing import Optional

import numpy as np

from . import flops
from .dense import jacobi_svd, mgs_qr, normalize_signs
from .krylov import LinearOperator, gkl_bidiagonalize
from .problem import Direction, TruncatedSvd
from .sparse import matvec, rmatvec

__all__ = [
    "Baseline",
    "BaselineChoice",
    "zha_simon_rows",
    "zha_simon_cols",
    "vecharynski_rows",
    "vecharynski_cols",
    "run_baseline",
]

ORACLE_LIMIT = 500


class Baseline(str, enum.Enum):
    ZHA_SIMON = "zha-simon"
    VECHARYNSKI_SV = "vecharynski"


@dataclass(frozen=True)
class BaselineChoice:
    method: Baseline
    rank_r: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "method", Baseline(self.method))
        if (self.method is Baseline.VECHARYNSKI_SV) != (self.rank_r is not None):
            raise ValueError("rank_r is required for, and only for, the SV variant")


def _inner_svd(a):
    # the Jacobi oracle is exact but slow past a few hundred columns
    if max(a.shape) <= ORACLE_LIMIT:
        return jacobi_svd(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    flops.add(14 * min(a.shape) ** 2 * max(a.shape))
    u, v = normalize_signs(u, vt.T)
    return u, s, v


def _rotate(svd, inner_f, inner_g, w_extra, s_rows, k):
    """Assemble ``blockdiag(U_k, I_s) F`` and ``[V_k, W_extra] G`` for ``k`` triplets."""
    f, g = inner_f[:, :k], inner_g[:, :k]
    kb = svd.k
    u_top = flops.dense_matmul(svd.u, f[:kb])
    u_new = np.concatenate([u_top, f[kb:]], axis=0)
    v_new = flops.dense_matmul(svd.v, g[:kb])
    if w_extra.shape[1]:
        v_new = v_new + flops.dense_matmul(w_extra, g[kb:])
    return u_new, v_new


def zha_simon_rows(problem):
    """Zha-Simon update for appended rows; exact when ``rank(B) = k``."""
    if problem.direction is not Direction.ROWS:
        raise ValueError("zha_simon_rows needs a row update")
    svd, E = problem.base_svd, problem.update
    k, s = svd.k, problem.s
    with flops.phase("build_w"):
        ev = matvec(E, svd.v)  # s x k
        et = E.T.to_dense()
        resid = et - flops.dense_matmul(svd.v, ev.T)
        q, r = mgs_qr(resid)
    q_cols = q.shape[1]
    inner = np.zeros((k + s, k + q_cols))
    inner[:k, :k] = np.diag(svd.s)
    inner[k:, :k] = ev
    inner[k:, k:] = r.T
    with flops.phase("projected_solve"):
        f, theta, g = _inner_svd(inner)
    keep = min(k, theta.size)
    with flops.phase("other"):
        u_new, v_new = _rotate(svd, f, g, q, s, keep)
    u_new, v_new = normalize_signs(u_new, v_new)
    return TruncatedSvd(u_new, theta[:keep], v_new)


def zha_simon_cols(problem):
    """Zha-Simon update for appended columns, via ``(I - U_k U_k^H) E = Q R``."""
    if problem.direction is not Direction.COLUMNS:
        raise ValueError("zha_simon_cols needs a column update")
    out = zha_simon_rows(problem.transpose())
    u, v = normalize_signs(out.v, out.u)
    return TruncatedSvd(u, out.s, v)


def vecharynski_rows(problem, r, seed=0):
    """SV variant: ``W = [V_k, X_r]`` with ``X_r`` from ``r`` GKL steps.

    Breakdown of the bidiagonalization shortens ``X_r``.
    """
    if problem.direction is not Direction.ROWS:
        raise ValueError("vecharynski_rows needs a row update")
    svd, E = problem.base_svd, problem.update
    k, s, n = svd.k, problem.s, problem.n
    V = svd.v

    def proj(y):
        return y - flops.dense_matmul(V, flops.dense_matmul(V.T, y))

    with flops.phase("build_w"):
        op = LinearOperator(n, s, lambda x: proj(rmatvec(E, x)), lambda y: matvec(E, proj(y)),
                            check=False)
        steps = min(r, n, s)
        fac = gkl_bidiagonalize(op, steps, seed)
        x_r, sv, _ = fac.singular_triplets(r)
        if sv.size:
            x_r = x_r[:, sv > 1e-12 * max(sv[0], np.finfo(float).tiny)]
        x_r = proj(x_r)
        if x_r.shape[1]:
            x_r, _ = np.linalg.qr(x_r)
        ex = matvec(E, x_r)
        ev = matvec(E, V)
    rr = x_r.shape[1]
    inner = np.zeros((k + s, k + rr))
    inner[:k, :k] = np.diag(svd.s)
    inner[k:, :k] = ev
    inner[k:, k:] = ex
    with flops.phase("projected_solve"):
        f, theta, g = _inner_svd(inner)
    keep = min(k, theta.size)
    with flops.phase("other"):
        u_new, v_new = _rotate(svd, f, g, x_r, s, keep)
    u_new, v_new = normalize_signs(u_new, v_new)
    return TruncatedSvd(u_new, theta[:keep], v_new)


def vecharynski_cols(problem, r, seed=0):
    if problem.direction is not Direction.COLUMNS:
        raise ValueError("vecharynski_cols needs a column update")
    out = vecharynski_rows(problem.transpose(), r, seed)
    u, v = normalize_signs(out.v, out.u)
    return TruncatedSvd(u, out.s, v)


def run_baseline(problem, choice, seed=0):
    choice = choice if isinstance(choice, BaselineChoice) else BaselineChoice(choice)
    rows = problem.direction is Direction.ROWS
    if choice.method is Baseline.ZHA_SIMON:
        return zha_simon_rows(problem) if rows else zha_simon_cols(problem)
    fn = vecharynski_rows if rows else vecharynski_cols
    return fn(problem, choice.rank_r, seed)
