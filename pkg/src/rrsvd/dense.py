"""Small dense factorizations.

``jacobi_svd`` is the verification oracle for everything Krylov-based in the
package, so it deliberately avoids LAPACK's SVD: one-sided Hestenes
rotations are accurate to working precision at the sizes used in tests.
"""
from typing import NamedTuple

import numpy as np
import scipy.linalg

from . import flops
from .errors import NoConvergence

__all__ = [
    "QrFactors",
    "FullSvd",
    "mgs_qr",
    "jacobi_svd",
    "jacobi_eigh",
    "tridiag_eig",
    "normalize_signs",
    "orthonormal_complement",
]


class QrFactors(NamedTuple):
    q: np.ndarray
    r: np.ndarray


class FullSvd(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def k(self):
        return self.s.size


_MGS_DROP = 1e-12


def _random_orthogonal_to(q, rng):
    """Unit vector orthogonal to the columns of ``q`` (two MGS passes)."""
    m = q.shape[0]
    for _ in range(10):
        w = rng.standard_normal(m)
        for _ in range(2):
            for j in range(q.shape[1]):
                w -= (q[:, j] @ w) * q[:, j]
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            return w / nrm
    raise NoConvergence("could not draw a vector orthogonal to the current basis")


def mgs_qr(a, seed=0):
    """Modified Gram-Schmidt QR with one reorthogonalization pass.

    Returns ``q`` with ``min(m, n)`` orthonormal columns and ``r`` upper
    trapezoidal. A column that is numerically dependent on its predecessors
    gets a zero diagonal in ``r`` and a random orthonormal replacement in
    ``q``, so ``q`` is always orthonormal.
    """
    a = np.array(a, dtype=np.float64, ndmin=2)
    m, n = a.shape
    p = min(m, n)
    q = np.zeros((m, p))
    r = np.zeros((p, n))
    rng = np.random.default_rng(seed)
    ncols = 0
    for j in range(n):
        w = a[:, j].copy()
        before = np.linalg.norm(w)
        for _ in range(2):
            for i in range(ncols):
                c = q[:, i] @ w
                w -= c * q[:, i]
                r[i, j] += c
        flops.add(8 * m * ncols + 3 * m)
        if ncols == p:
            continue
        nrm = np.linalg.norm(w)
        if nrm > _MGS_DROP * before and nrm > 0:
            q[:, ncols] = w / nrm
            r[ncols, j] = nrm
        else:
            q[:, ncols] = _random_orthogonal_to(q[:, :ncols], rng)
        ncols += 1
    return QrFactors(q, r)


def normalize_signs(u, v=None):
    """Flip each column pair so the largest-magnitude entry of ``u`` is positive."""
    u = np.array(u, dtype=np.float64)
    v = None if v is None else np.array(v, dtype=np.float64)
    if u.size == 0:
        return (u, v) if v is not None else u
    idx = np.argmax(np.abs(u), axis=0)
    sgn = np.sign(u[idx, np.arange(u.shape[1])])
    sgn[sgn == 0] = 1.0
    u *= sgn
    if v is None:
        return u
    v *= sgn
    return u, v


def orthonormal_complement(q, count, seed=0):
    """``count`` extra orthonormal columns orthogonal to ``q``."""
    rng = np.random.default_rng(seed)
    out = q
    for _ in range(count):
        out = np.column_stack([out, _random_orthogonal_to(out, rng)])
    return out[:, q.shape[1]:]


def _round_robin(n):
    """Pairings for a cyclic tournament over an even number of columns."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        rounds.append((np.array(players[:half]), np.array(players[half:][::-1])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_svd(a, tol=1e-14, max_sweeps=60):
    """Thin SVD by one-sided Jacobi rotations.

    Returns ``min(m, n)`` triplets with singular values nonincreasing and
    each ``u`` column's largest-magnitude entry positive. Rotations are
    applied in round-robin order so that a whole set of disjoint column
    pairs is processed at once.
    """
    a = np.array(a, dtype=np.float64, ndmin=2)
    m, n = a.shape
    if m < n:
        res = jacobi_svd(a.T, tol, max_sweeps)
        u, v = normalize_signs(res.v, res.u)
        return FullSvd(u, res.s, v)
    if n == 0:
        return FullSvd(np.zeros((m, 0)), np.zeros(0), np.zeros((0, 0)))

    # rounding in the column inner products is about m*eps relative
    thresh = max(tol, m * np.finfo(float).eps)
    npad = n + (n % 2)
    w = np.zeros((m, npad))
    w[:, :n] = a
    v = np.eye(npad)
    rounds = _round_robin(npad)
    for sweep in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            wp, wq = w[:, p], w[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            scale = np.sqrt(alpha * beta)
            act = (scale > 0) & (np.abs(gamma) > thresh * scale)
            if not act.any():
                continue
            rotated = True
            p, q = p[act], q[act]
            alpha, beta, gamma = alpha[act], beta[act], gamma[act]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.sign(zeta) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            t[zeta == 0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            wp, wq = w[:, p], w[:, q]
            w[:, p], w[:, q] = c * wp - s * wq, s * wp + c * wq
            vp, vq = v[:, p], v[:, q]
            v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break
    else:
        raise NoConvergence(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")
    flops.add(6 * m * n * n * (sweep + 1))

    w, v = w[:, :n], v[:n, :n]
    sv = np.linalg.norm(w, axis=0)
    order = np.argsort(-sv, kind="stable")
    sv, w, v = sv[order], w[:, order], v[:, order]
    u = np.zeros((m, n))
    tiny = sv[0] * max(m, n) * np.finfo(float).eps if sv[0] > 0 else 0.0
    good = sv > tiny
    u[:, good] = w[:, good] / sv[good]
    if not good.all():
        # zero singular values: any orthonormal completion is a valid u
        u[:, ~good] = orthonormal_complement(u[:, good], int((~good).sum()))
        sv[~good] = 0.0 if tiny == 0 else sv[~good]
    u, v = normalize_signs(u, v)
    return FullSvd(u, sv, v)


def jacobi_eigh(a, tol=1e-15, max_sweeps=60):
    """Eigen-decomposition of a symmetric matrix by cyclic two-sided Jacobi.

    Eigenvalues are returned in descending order.
    """
    a = np.array(a, dtype=np.float64, ndmin=2)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * max(np.linalg.norm(a), np.finfo(float).tiny):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :], a[q, :] = c * ap - s * aq, s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    else:
        raise NoConvergence("symmetric Jacobi did not converge")
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def tridiag_eig(alpha, beta):
    """All eigenpairs of the symmetric tridiagonal matrix, eigenvalues ascending."""
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if beta.size != max(alpha.size - 1, 0):
        raise ValueError("beta must have exactly one entry fewer than alpha")
    if alpha.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    if alpha.size == 1:
        return alpha.copy(), np.ones((1, 1))
    try:
        w, z = scipy.linalg.eigh_tridiagonal(alpha, beta, lapack_driver="stemr")
    except scipy.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return w, normalize_signs(z)
