import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from romdd import linalg
from romdd.linalg import ContractError, SingularMatrixError


def spd(n, seed=0, cond=1e3):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Q * np.geomspace(1, cond, n)) @ Q.T


def laplace_1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


@given(n=st.integers(1, 30), seed=st.integers(0, 1000))
def test_direct_solve_matches_dense_oracle(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + n * np.eye(n)
    b = rng.standard_normal(n)
    want = np.linalg.solve(A, b)
    np.testing.assert_allclose(linalg.direct_solve(A, b), want, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(linalg.direct_solve(sp.csr_matrix(A), b), want, rtol=1e-9, atol=1e-12)


def test_direct_solve_detects_singularity():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrixError):
        linalg.direct_solve(sp.csr_matrix(A), np.ones(2))
    with pytest.raises(SingularMatrixError):
        linalg.direct_solve(np.zeros((2, 2)), np.ones(2))
    with pytest.raises(ValueError):
        linalg.direct_solve(np.eye(2), np.ones(3))


@pytest.mark.parametrize("pre", [None, "jacobi", "sgs"])
def test_cg_converges(pre):
    A = laplace_1d(200) + 0.01 * sp.eye(200)
    b = np.random.default_rng(1).standard_normal(200)
    x, rep = linalg.cg_solve(A, b, preconditioner=pre)
    assert rep.converged and rep.residual <= linalg.DEFAULT_TOL
    np.testing.assert_allclose(x, linalg.direct_solve(A, b), rtol=1e-7)


def test_cg_preconditioning_reduces_iterations():
    A = sp.csr_matrix(spd(120, cond=1e4)) + sp.diags(np.geomspace(1, 1e4, 120))
    b = np.ones(120)
    plain = linalg.cg_solve(A, b)[1].iterations
    sgs = linalg.cg_solve(A, b, preconditioner="sgs")[1].iterations
    assert sgs < plain


def test_cg_rejects_nonsymmetric():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
    with pytest.raises(ContractError):
        linalg.cg_solve(A, np.ones(2))
    with pytest.raises(ValueError):
        linalg.cg_solve(laplace_1d(4), np.ones(4), preconditioner="ilu")


def test_cg_zero_rhs():
    x, rep = linalg.cg_solve(laplace_1d(5), np.zeros(5))
    assert rep.iterations == 0 and not x.any()


@given(seed=st.integers(0, 500), n=st.integers(4, 40), m=st.integers(1, 10))
def test_minres_on_saddle_point_matrices(seed, n, m):
    rng = np.random.default_rng(seed)
    m = min(m, n - 1)
    A = spd(n, seed, cond=10)
    B = rng.standard_normal((m, n))
    K = sp.csr_matrix(np.block([[A, B.T], [B, np.zeros((m, m))]]))
    b = rng.standard_normal(n + m)
    x, rep = linalg.minres_solve(K, b, tol=1e-10)
    assert rep.converged
    assert np.linalg.norm(K @ x - b) <= 1.01e-10 * np.linalg.norm(b)


def test_minres_preconditioner_blocks():
    n, m = 60, 20
    A = laplace_1d(n) * 50
    B = sp.random(m, n, density=0.2, random_state=3, format="csr") + sp.eye(m, n)
    K = sp.bmat([[A, B.T], [B, None]], format="csr")
    b = np.ones(n + m)
    pre = linalg.saddle_preconditioner(A, sp.eye(m, format="csr"), np.arange(n), np.arange(n, n + m))
    x, rep = linalg.minres_solve(K, b, preconditioner=pre)
    assert rep.converged
    np.testing.assert_allclose(x, linalg.direct_solve(K, b), rtol=1e-6, atol=1e-8)


shapes = st.tuples(st.integers(1, 40), st.integers(1, 40))


@given(shape=shapes, rank=st.integers(1, 40), seed=st.integers(0, 10_000))
def test_thin_svd_against_lapack(shape, rank, seed):
    N, S = shape
    rng = np.random.default_rng(seed)
    r = min(rank, N, S)
    Q = rng.standard_normal((N, r)) @ rng.standard_normal((r, S))
    Phi, sigma, V = linalg.thin_svd(Q)
    k = min(N, S)
    assert Phi.shape == (N, k) and V.shape == (S, k)
    ref = np.linalg.svd(Q, compute_uv=False)
    np.testing.assert_allclose(sigma, ref, atol=1e-9 * max(ref[0], 1))
    np.testing.assert_allclose(Phi.T @ Phi, np.eye(k), atol=1e-12)
    np.testing.assert_allclose((Phi * sigma) @ V.T, Q, atol=1e-9 * max(ref[0], 1))
    assert np.all(np.diff(sigma) <= 1e-12 * max(ref[0], 1))


@given(seed=st.integers(0, 10_000), R=st.integers(1, 39))
def test_eckart_young(seed, R):
    Q = np.random.default_rng(seed).standard_normal((200, 40))
    Phi, sigma, _ = linalg.thin_svd(Q)
    P = Phi[:, :R]
    err = np.linalg.norm(Q - P @ (P.T @ Q))
    assert err == pytest.approx(np.sqrt(np.sum(sigma[R:] ** 2)), rel=1e-10)


def test_thin_svd_zero_matrix():
    Phi, sigma, V = linalg.thin_svd(np.zeros((5, 3)))
    assert not sigma.any()
    np.testing.assert_allclose(Phi.T @ Phi, np.eye(3), atol=1e-14)


@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(0.01, 1.0))
def test_energy_rank_is_minimal(values, eta):
    sigma = np.sort(np.array(values))[::-1]
    R = linalg.energy_rank(sigma, eta)
    total = sigma.sum()
    if total == 0:
        assert R == 1
        return
    assert sigma[:R].sum() >= eta * total * (1 - 1e-12)
    if R > 1:
        assert sigma[: R - 1].sum() < eta * total
    with pytest.raises(ValueError):
        linalg.energy_rank(sigma, 0.0)


def test_mean_zero_constraint():
    from romdd.dgdd import GlobalSystem

    A = sp.csr_matrix(np.array([[1.0, -1.0], [-1.0, 1.0]]))  # singular, kernel = constants
    sys0 = GlobalSystem(A, np.array([1.0, -1.0]), np.array([0, 2]), "stokes")
    sys1 = linalg.add_mean_zero_constraint(sys0, np.array([1.0, 1.0]))
    x = linalg.direct_solve(sys1.matrix, sys1.rhs)
    np.testing.assert_allclose(x[:2], [0.5, -0.5])
    with pytest.raises(ContractError):
        linalg.add_mean_zero_constraint(sys1, np.ones(3))
