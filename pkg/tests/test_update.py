import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rrsvd import flops
from rrsvd.dense import jacobi_svd
from rrsvd.errors import DimensionMismatch, TruncatedResult
from rrsvd.problem import Direction, TruncatedSvd, UpdateProblem
from rrsvd.sparse import SparseMatrix, split_cols
from rrsvd.synthetic import low_rank, random_sparse
from rrsvd.update import (
    LanczosSettings,
    build_z_basic,
    build_z_enhanced,
    compose_zha_operator,
    rr_svd,
    rr_svd_cols,
    rr_svd_rows,
)

from conftest import dense_stacked, max_angle, random_problem, rank_k_problem

TIGHT = LanczosSettings(tol=1e-12)


def _lam(problem):
    return 1.01 * jacobi_svd(dense_stacked(problem)).s[0] ** 2


def _enhanced(problem, r=None, seed=0):
    r = problem.k if r is None else r
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_z_enhanced(problem, _lam(problem), r, seed=seed)


# -------------------------------------------------------------------- bases


def test_basic_basis_shape_and_orthonormality():
    p = random_problem(8, 6, 2, seed=1)
    p = UpdateProblem(p.base, p.base_svd, random_sparse(3, 6, 0.5, seed=2))
    Z = build_z_basic(p.base_svd, 3)
    assert Z.total_cols == 5 and Z.r == 0
    cols = Z.apply(np.eye(5))
    assert np.linalg.norm(cols.T @ cols - np.eye(5)) < 1e-12
    assert np.allclose(Z.apply_adjoint(cols), np.eye(5))


def test_basic_basis_costs_nothing():
    p = random_problem(10, 6, 3, seed=2)
    with flops.counting() as fc:
        build_z_basic(p.base_svd, p.s)
    assert fc.total == 0


def test_basic_basis_needs_rows():
    p = random_problem(10, 6, 3, seed=2)
    with pytest.raises(ValueError):
        build_z_basic(p.base_svd, 0)


def test_enhanced_zero_update_degenerates():
    p = random_problem(12, 8, 3, seed=3)
    p = UpdateProblem(p.base, p.base_svd, SparseMatrix.zeros(4, 8))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        Z = build_z_enhanced(p, 1.01 * p.base_svd.s[0] ** 2, 3)
    assert Z.x_block is None and Z.rank_deficient and Z.total_cols == 3 + 4


def test_enhanced_exact_rank_degenerates():
    p = rank_k_problem(16, 8, 3, seed=4)
    Z = _enhanced(p)
    assert Z.r == 0 and Z.rank_deficient


def test_enhanced_block_orthonormal():
    p = random_problem(30, 20, 4, seed=5)
    Z = _enhanced(p)
    assert Z.r == 4 and not Z.rank_deficient
    dense = Z.densify()
    assert np.linalg.norm(dense.T @ dense - np.eye(Z.total_cols)) < 1e-8


def test_enhanced_contains_basic_directions():
    p = random_problem(30, 20, 4, seed=6)
    A = dense_stacked(p)
    uhat = jacobi_svd(A).u[:, :4]
    basic, enh = build_z_basic(p.base_svd, p.s).densify(), _enhanced(p).densify()
    for i in range(4):
        u = uhat[:, i]
        d_basic = np.linalg.norm(u - basic @ (basic.T @ u))
        d_enh = np.linalg.norm(u - enh @ (enh.T @ u))
        assert d_enh <= d_basic + 1e-10


def test_enhanced_columns_direction_uses_v():
    p = random_problem(20, 14, 3, seed=7).transpose()
    assert p.direction is Direction.COLUMNS
    Z = _enhanced(p)
    assert Z.direction is Direction.COLUMNS and Z.nrows == p.n + p.s


# ---------------------------------------------------------- composed operator


def test_operator_zero_update_is_blockdiag():
    p = random_problem(10, 6, 3, seed=8)
    p = UpdateProblem(p.base, p.base_svd, SparseMatrix.zeros(2, 6))
    W = compose_zha_operator(p, build_z_basic(p.base_svd, 2))
    e1 = np.zeros(5)
    e1[0] = 1.0
    assert np.allclose(W.matvec(e1), p.base_svd.s[0] ** 2 * e1, atol=1e-13)
    expected = np.diag(np.concatenate([p.base_svd.s**2, [0.0, 0.0]]))
    assert np.allclose(W.to_dense(), expected, atol=1e-12)


def test_operator_empty_base_is_eeh():
    E = random_sparse(3, 5, 0.6, seed=9)
    p = UpdateProblem(random_sparse(4, 5, 0.5, seed=10), TruncatedSvd.empty(4, 5), E)
    W = compose_zha_operator(p, build_z_basic(p.base_svd, 3))
    Ed = E.to_dense()
    assert np.allclose(W.to_dense(), Ed @ Ed.T, atol=1e-13)


@pytest.mark.parametrize("enhanced", [False, True])
def test_operator_matches_dense_assembly(enhanced):
    p = random_problem(24, 14, 4, seed=11)
    Z = _enhanced(p) if enhanced else build_z_basic(p.base_svd, p.s)
    A = dense_stacked(p)
    Zd = Z.densify()
    # top block of Z^H A uses Sigma_k V_k^H, which equals U_k^H B for an exact SVD
    ref = (Zd.T @ A) @ (Zd.T @ A).T
    W = compose_zha_operator(p, Z)
    rng = np.random.default_rng(0)
    for _ in range(3):
        c = rng.standard_normal(Z.total_cols)
        assert np.linalg.norm(W.matvec(c) - ref @ c) <= 1e-10 * np.linalg.norm(ref @ c)


def test_operator_flops_per_apply():
    p = random_problem(24, 14, 4, seed=12)
    Z = _enhanced(p)
    W = compose_zha_operator(p, Z)
    assert W.flops_per_apply == 4 * (p.n * (p.k + Z.r) + p.update.nnz)


def test_operator_dimension_check():
    p = random_problem(12, 8, 3, seed=13)
    with pytest.raises(DimensionMismatch):
        compose_zha_operator(p, build_z_basic(p.base_svd, p.s + 1))


# --------------------------------------------------------------- Algorithm 1


def test_rows_exact_when_base_has_rank_k():
    p = rank_k_problem(30, 18, 4, seed=14)
    A = dense_stacked(p)
    ref = jacobi_svd(A)
    svd, ritz = rr_svd_rows(p, build_z_basic(p.base_svd, p.s), lanczos=TIGHT)
    assert np.allclose(svd.s, ref.s[:4], rtol=1e-9)
    assert max_angle(svd.u, ref.u[:, :4]) < 1e-6
    assert max_angle(svd.v, ref.v[:, :4]) < 1e-6
    assert ritz.steps_used >= 4 and np.all(np.diff(ritz.theta) <= 0)


def test_rows_zero_update_keeps_triplets():
    p = random_problem(14, 9, 3, seed=15)
    p = UpdateProblem(p.base, p.base_svd, SparseMatrix.zeros(3, 9))
    svd, _ = rr_svd_rows(p, build_z_basic(p.base_svd, 3), lanczos=TIGHT)
    assert np.allclose(svd.s, p.base_svd.s, rtol=1e-12)
    top = np.vstack([p.base_svd.u, np.zeros((3, 3))])
    assert np.allclose(svd.u, top, atol=1e-10)


def test_rows_u_orthonormal_v_as_defined():
    p = random_problem(40, 25, 6, seed=16)
    svd, _ = rr_svd_rows(p, _enhanced(p))
    assert np.linalg.norm(svd.u.T @ svd.u - np.eye(6)) < 1e-8
    # V = A^H U / theta, no re-orthogonalization by default
    A = dense_stacked(p)
    assert np.allclose(svd.v, A.T @ svd.u / svd.s, atol=1e-12)


def test_rows_reorthogonalize_v():
    p = random_problem(40, 25, 6, seed=16)
    svd, _ = rr_svd_rows(p, build_z_basic(p.base_svd, p.s), reorthogonalize_v=True)
    assert np.linalg.norm(svd.v.T @ svd.v - np.eye(6)) < 1e-12


def test_rows_k_out_limits():
    p = random_problem(12, 8, 3, seed=17)
    Z = build_z_basic(p.base_svd, p.s)
    svd, _ = rr_svd_rows(p, Z, k_out=2)
    assert svd.k == 2
    with pytest.raises(ValueError):
        rr_svd_rows(p, Z, k_out=Z.total_cols + 1)


def test_rows_drops_zero_ritz_values():
    B = SparseMatrix.from_dense(np.diag([2.0, 1.0, 0.0, 0.0]))
    p = UpdateProblem(B, TruncatedSvd.from_full(jacobi_svd(B.to_dense()), 2), SparseMatrix.zeros(1, 4))
    with pytest.warns(TruncatedResult):
        svd, _ = rr_svd_rows(p, build_z_basic(p.base_svd, 1), k_out=3)
    assert svd.k == 2


def test_rows_rejects_column_problem():
    p = random_problem(12, 8, 3, seed=18).transpose()
    with pytest.raises(ValueError):
        rr_svd_rows(p, build_z_basic(p.base_svd, p.s, Direction.COLUMNS))


# --------------------------------------------------------------- Algorithm 2


def test_cols_zero_update_keeps_triplets():
    B = random_sparse(10, 7, 0.5, seed=19)
    base = TruncatedSvd.from_full(jacobi_svd(B.to_dense()), 3)
    p = UpdateProblem(B, base, SparseMatrix.zeros(10, 2), Direction.COLUMNS)
    svd, _ = rr_svd_cols(p, build_z_basic(base, 2, Direction.COLUMNS), lanczos=TIGHT)
    assert np.allclose(svd.s, base.s, rtol=1e-12)
    assert np.allclose(svd.v, np.vstack([base.v, np.zeros((2, 3))]), atol=1e-10)


def test_cols_transpose_symmetry():
    p = random_problem(22, 14, 4, seed=20)
    rows, _ = rr_svd_rows(p, build_z_basic(p.base_svd, p.s), lanczos=TIGHT)
    q = p.transpose()
    cols, _ = rr_svd_cols(q, build_z_basic(q.base_svd, q.s, Direction.COLUMNS), lanczos=TIGHT)
    assert np.allclose(rows.s, cols.s, rtol=1e-10)
    # each side canonicalizes signs on its own u, so compare up to column signs
    sign = np.sign(np.sum(rows.u * cols.v, axis=0))
    assert np.allclose(rows.u, cols.v * sign, atol=1e-8)
    assert np.allclose(rows.v, cols.u * sign, atol=1e-8)


def test_cols_random_against_oracle():
    B = random_sparse(20, 12, 0.4, seed=21)
    E = random_sparse(20, 4, 0.4, seed=22)
    base = TruncatedSvd.from_full(jacobi_svd(B.to_dense()), 5)
    p = UpdateProblem(B, base, E, Direction.COLUMNS)
    svd, _ = rr_svd(p, build_z_basic(base, 4, Direction.COLUMNS))
    A = dense_stacked(p)
    ref = jacobi_svd(A).s[:5]
    sB = jacobi_svd(B.to_dense()).s
    assert np.all(svd.s <= ref + 1e-8) and np.all(svd.s >= sB[5] - 1e-8)
    res = np.linalg.norm(A @ svd.v - svd.u * svd.s, axis=0) / svd.s
    assert np.all(res < 0.3)
    assert np.linalg.norm(svd.v.T @ svd.v - np.eye(5)) < 1e-8


# ------------------------------------------------------------ properties


@settings(max_examples=20, deadline=None)
@given(
    m=st.integers(8, 30),
    n=st.integers(4, 18),
    seed=st.integers(0, 10**6),
    data=st.data(),
)
def test_interlacing_ritz_below_and_orthonormal(m, n, seed, data):
    k = data.draw(st.integers(1, min(n, (m + 1) // 2) - 1))
    p = random_problem(m, n, k, seed)
    A = dense_stacked(p)
    ref = jacobi_svd(A).s
    sB = jacobi_svd(p.base.to_dense()).s
    for Z in (build_z_basic(p.base_svd, p.s), _enhanced(p, seed=seed)):
        svd, _ = rr_svd_rows(p, Z)
        assert np.all(svd.s <= ref[: svd.k] + 1e-8)
        if sB.size > k:
            assert np.all(svd.s >= sB[k] - 1e-8)
        assert np.linalg.norm(svd.u.T @ svd.u - np.eye(svd.k)) < 1e-8


@pytest.mark.parametrize("seed", range(8))
def test_enhanced_not_worse_than_basic(seed):
    p = random_problem(40, 25, 6, seed=100 + seed)
    ref = jacobi_svd(dense_stacked(p)).s[:6]
    a, _ = rr_svd_rows(p, build_z_basic(p.base_svd, p.s))
    b, _ = rr_svd_rows(p, _enhanced(p, seed=seed))
    err = lambda s: np.max(np.abs(s - ref) / ref)
    assert err(b.s) <= err(a.s) + 1e-12


def test_rr_svd_deterministic():
    p = random_problem(30, 20, 4, seed=23)
    a, _ = rr_svd(p, _enhanced(p, seed=3))
    b, _ = rr_svd(p, _enhanced(p, seed=3))
    assert np.array_equal(a.s, b.s) and np.array_equal(a.u, b.u)
