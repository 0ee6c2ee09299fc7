import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from lnksopt.linalg import (EigenSolverError, IlutParams, KrylovConfig, PatternAssembler, dense_eig, fgmres,
                            ilut_factor, match_spectra, read_matrix_market, sort_spectrum, validate_csr,
                            write_matrix_market)
from conftest import random_sparse


# -- CSR -----------------------------------------------------------------------
def test_validate_csr_accepts_canonical():
    validate_csr(random_sparse(30))


def test_validate_csr_rejects_unsorted_columns():
    A = sp.csr_matrix((np.ones(2), np.array([1, 0]), np.array([0, 2, 2])), shape=(2, 2))
    with pytest.raises(ValueError, match="strictly increasing"):
        validate_csr(A)


def test_validate_csr_rejects_bad_offsets():
    A = sp.csr_matrix(np.eye(3))
    A.indptr = np.array([0, 2, 1, 3])
    with pytest.raises(ValueError):
        validate_csr(A)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 60), st.integers(0, 10_000))
def test_pattern_assembler_matches_coo_sum(m, n, k, seed):
    rng = np.random.default_rng(seed)
    rows, cols = rng.integers(0, m, k), rng.integers(0, n, k)
    vals = rng.standard_normal(k)
    A = PatternAssembler(rows, cols, (m, n)).assemble(vals)
    validate_csr(A)
    B = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).toarray()
    np.testing.assert_allclose(A.toarray(), B, atol=1e-14)


def test_matrix_market_round_trip(tmp_path):
    A = random_sparse(25, seed=4)
    write_matrix_market(tmp_path / "a.mtx", A)
    B = read_matrix_market(tmp_path / "a.mtx")
    assert abs(A - B).max() == 0.0


# -- dense eigenvalues -----------------------------------------------------------
def test_dense_eig_sorted_and_matches_numpy():
    A = np.random.default_rng(1).standard_normal((12, 12))
    ev = dense_eig(A)
    assert np.all(np.diff(ev.real) >= 0)
    assert match_spectra(ev, np.linalg.eigvals(A)) < 1e-12


def test_dense_eig_known_spectra():
    np.testing.assert_allclose(dense_eig(np.diag([3.0, 1.0, 2.0])).real, [1, 2, 3], atol=1e-15)
    ev = dense_eig(np.array([[0.0, -1.0], [1.0, 0.0]]))
    assert match_spectra(ev, np.array([1j, -1j])) < 1e-15


def test_dense_eig_sum_equals_trace():
    A = np.random.default_rng(10).standard_normal((10, 10))
    assert abs(dense_eig(A).sum() - np.trace(A)) < 1e-10


def test_dense_eig_rejects_large_and_nonsquare():
    with pytest.raises(ValueError):
        dense_eig(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        dense_eig(np.eye(5), max_size=4)
    assert issubclass(EigenSolverError, RuntimeError)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=10), st.randoms())
def test_match_spectra_permutation_invariant(values, rnd):
    a = np.array(values, dtype=complex)
    b = a.copy()
    rnd.shuffle(b)
    assert match_spectra(a, b) == 0.0
    assert np.array_equal(sort_spectrum(a), sort_spectrum(b))


# -- FGMRES ----------------------------------------------------------------------
def test_fgmres_identity_one_iteration():
    b = np.random.default_rng(3).standard_normal(30)
    res = fgmres(lambda v: v, b)
    assert res.iters == 1 and res.converged
    np.testing.assert_allclose(res.x, b, rtol=1e-14)


def test_fgmres_diagonal_with_inverse_preconditioner():
    d = np.arange(1.0, 41.0)
    b = np.random.default_rng(4).standard_normal(40)
    res = fgmres(lambda v: d * v, b, lambda v: v / d, KrylovConfig(rel_tol=1e-14))
    assert res.iters == 1
    assert np.linalg.norm(d * res.x - b) <= 1e-14 * np.linalg.norm(b)


def test_fgmres_dense_spd_matches_lu():
    rng = np.random.default_rng(5)
    Q = rng.standard_normal((20, 20))
    A = Q @ Q.T + 20 * np.eye(20)
    b = rng.standard_normal(20)
    res = fgmres(A.dot, b, cfg=KrylovConfig(rel_tol=1e-12, restart=20))
    np.testing.assert_allclose(res.x, np.linalg.solve(A, b), rtol=1e-8)


def test_fgmres_unpreconditioned_matches_direct_solve():
    A = random_sparse(80, seed=2, dominance=1.2)
    b = np.random.default_rng(2).standard_normal(80)
    res = fgmres(A.dot, b, cfg=KrylovConfig(rel_tol=1e-12, restart=80))
    assert res.converged and res.status == "converged"
    np.testing.assert_allclose(res.x, spla.spsolve(A.tocsc(), b), rtol=1e-9, atol=1e-12)


def test_fgmres_reports_true_residual_history():
    A = random_sparse(60, seed=5, dominance=1.1)
    b = np.ones(60)
    res = fgmres(A.dot, b, cfg=KrylovConfig(rel_tol=1e-8, restart=10))
    assert res.converged
    assert np.linalg.norm(b - A @ res.x) <= 1.01e-8 * np.linalg.norm(b)
    assert res.residual_norm <= 1e-8 * np.linalg.norm(b) * 1.01


def test_fgmres_exact_preconditioner_one_iteration():
    A = random_sparse(50, seed=6).tocsc()
    lu = spla.splu(A)
    b = np.random.default_rng(6).standard_normal(50)
    res = fgmres(A.dot, b, lu.solve, KrylovConfig(rel_tol=1e-10))
    assert res.iters == 1 and res.converged


def test_fgmres_flexible_handles_varying_preconditioner():
    A = random_sparse(60, seed=7, dominance=1.05)
    b = np.random.default_rng(7).standard_normal(60)
    d = A.diagonal()
    count = [0]

    def M(v):  # alternates between two different diagonal scalings
        count[0] += 1
        return v / d if count[0] % 2 else 0.5 * v / d

    res = fgmres(A.dot, b, M, KrylovConfig(rel_tol=1e-10, flexible=True))
    assert res.converged
    assert np.linalg.norm(b - A @ res.x) <= 1.01e-10 * np.linalg.norm(b)


def test_fgmres_max_iters_status():
    A = random_sparse(100, seed=8, dominance=0.3)
    res = fgmres(A.dot, np.ones(100), cfg=KrylovConfig(rel_tol=1e-14, max_iters=3, restart=200))
    assert not res.converged and res.status == "max_iters" and res.iters == 3


def test_fgmres_zero_rhs():
    res = fgmres(lambda v: 2 * v, np.zeros(5))
    assert res.converged and not np.any(res.x)


def test_krylov_config_validation():
    with pytest.raises(ValueError):
        KrylovConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        KrylovConfig(restart=0)


# -- ILUT ------------------------------------------------------------------------
def test_ilut_without_dropping_is_exact_lu():
    # the fill budget is relative to each row's stored L/U counts, so a full
    # pattern with ratio 1 leaves room for the complete factors
    rng = np.random.default_rng(9)
    A = sp.csr_matrix(rng.standard_normal((40, 40)) + 40 * np.eye(40))
    M = ilut_factor(A, IlutParams(fill_ratio=1.0, drop_tolerance=0.0))
    b = np.random.default_rng(9).standard_normal(40)
    np.testing.assert_allclose(M.solve(b), spla.spsolve(A.tocsc(), b), rtol=1e-10)
    np.testing.assert_allclose(M.solve_transpose(b), spla.spsolve(A.T.tocsc(), b), rtol=1e-10)
    L, U = M.factors()
    assert abs(L @ U - A).max() < 1e-12


def test_ilut_tridiagonal_exact_with_default_fill():
    n = 50
    A = sp.diags([-np.ones(n - 1), 4 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")
    M = ilut_factor(A)
    x = np.random.default_rng(0).standard_normal(n)
    np.testing.assert_allclose(M.solve(A @ x), x, rtol=1e-12)
    assert M.n_perturbed == 0


def test_ilut_fill_budget_bounds_nnz():
    A = random_sparse(120, density=0.08, seed=10, dominance=0.5)
    M = ilut_factor(A, IlutParams(fill_ratio=1.0))
    assert M.nnz <= 2 * A.nnz + A.shape[0]


def test_ilut_accelerates_gmres():
    A = random_sparse(300, density=0.02, seed=11, dominance=0.6)
    b = np.ones(300)
    plain = fgmres(A.dot, b, cfg=KrylovConfig(rel_tol=1e-10))
    pre = fgmres(A.dot, b, ilut_factor(A).solve, KrylovConfig(rel_tol=1e-10))
    assert pre.converged and pre.iters < plain.iters


def test_ilut_zero_pivot_perturbed_not_failed():
    A = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 1.0]]))
    M = ilut_factor(A)
    assert M.n_perturbed >= 1
    assert np.all(np.isfinite(M.solve(np.ones(2))))


def test_ilut_rejects_rectangular():
    with pytest.raises(ValueError):
        ilut_factor(sp.csr_matrix(np.ones((2, 3))))


@settings(max_examples=20, deadline=None)
@given(st.integers(5, 40), st.integers(0, 10_000))
def test_ilut_transpose_solve_is_adjoint(n, seed):
    A = random_sparse(n, density=0.2, seed=seed)
    M = ilut_factor(A)
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    assert abs(a @ M.solve(b) - M.solve_transpose(a) @ b) <= 1e-10 * np.linalg.norm(a) * np.linalg.norm(M.solve(b)) + 1e-12
