"""Direct and Krylov solvers, preconditioners, and the thin SVD used for POD."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .kernels import SymmetricGaussSeidel

DEFAULT_TOL = 1e-10


class SingularMatrixError(ArithmeticError):
    pass


class ContractError(ValueError):
    pass


@dataclass
class SolveReport:
    iterations: int
    residual: float
    time: float
    converged: bool


def _relres(A, x, b):
    nb = np.linalg.norm(b)
    return float(np.linalg.norm(b - A @ x) / nb if nb > 0 else np.linalg.norm(A @ x))


# --- direct ---------------------------------------------------------------------


def direct_solve(A, b: np.ndarray) -> np.ndarray:
    """LU solve of a sparse or dense square system.

    Raises :class:`SingularMatrixError` on a zero pivot or a non-finite result.
    """
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    try:
        if sp.issparse(A):
            x = splu(sp.csc_matrix(A)).solve(b)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                lu, piv = sla.lu_factor(np.asarray(A, dtype=float), check_finite=True)
            if np.any(np.diag(lu) == 0.0):
                raise SingularMatrixError("zero pivot in LU factorisation")
            x = sla.lu_solve((lu, piv), b)
    except RuntimeError as exc:  # splu reports exact singularity this way
        raise SingularMatrixError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("LU solve produced non-finite values")
    return x


# --- conjugate gradients ----------------------------------------------------------


def _check_symmetric(A, rng=None, trials=3, rtol=1e-8):
    rng = rng or np.random.default_rng(0)
    n = A.shape[0]
    for _ in range(trials):
        u, v = rng.standard_normal(n), rng.standard_normal(n)
        Au, Av = A @ u, A @ v
        scale = np.linalg.norm(Au) * np.linalg.norm(v) + np.linalg.norm(Av) * np.linalg.norm(u)
        if abs(u @ Av - v @ Au) > rtol * max(scale, np.finfo(float).tiny):
            raise ContractError("matrix is not symmetric")


def jacobi(A):
    d = np.asarray(A.diagonal(), dtype=float)
    if np.any(d == 0.0):
        raise ValueError("Jacobi needs a nonzero diagonal")
    inv = 1.0 / d
    return lambda r: inv * r


def make_preconditioner(A, kind):
    if kind is None or callable(kind):
        return kind
    kind = kind.lower()
    if kind == "jacobi":
        return jacobi(A)
    if kind in ("sgs", "symmetricgaussseidel", "gs"):
        return SymmetricGaussSeidel(A)
    raise ValueError(f"unknown preconditioner {kind!r}")


def cg_solve(A, b, tol=DEFAULT_TOL, max_iter=None, preconditioner=None, x0=None):
    """Preconditioned conjugate gradients for a symmetric positive definite ``A``."""
    start = time.perf_counter()
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    max_iter = 50 * n if max_iter is None else max_iter
    _check_symmetric(A)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, time.perf_counter() - start, True)
    M = make_preconditioner(A, preconditioner)
    r = b - A @ x
    z = M(r) if M else r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r) / nb
    it = 0
    while res > tol and it < max_iter:
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0.0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        res = np.linalg.norm(r) / nb
        if res <= tol:
            break
        z = M(r) if M else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = _relres(A, x, b)
    return x, SolveReport(it, res, time.perf_counter() - start, res <= tol)


# --- MINRES -----------------------------------------------------------------------


class BlockDiagonalPreconditioner:
    """Apply independent approximate inverses to disjoint index blocks."""

    def __init__(self, blocks):
        self.blocks = [(np.asarray(idx), op) for idx, op in blocks]

    def __call__(self, r):
        z = np.zeros_like(r)
        for idx, op in self.blocks:
            z[idx] = op(r[idx])
        return z


def saddle_preconditioner(A_uu, M_p, vel_idx, p_idx, nu=1.0, extra_idx=None, extra_scale=1.0, sweeps=1):
    """Block-diagonal SPD preconditioner for a Stokes saddle system.

    Velocity block: symmetric Gauss-Seidel on ``A_uu``.  Pressure block:
    symmetric Gauss-Seidel on ``M_p / nu``.  An optional scalar block (the
    mean-zero multiplier) is divided by ``extra_scale``.
    """
    blocks = [
        (vel_idx, SymmetricGaussSeidel(A_uu, sweeps)),
        (p_idx, SymmetricGaussSeidel(M_p / nu, sweeps)),
    ]
    if extra_idx is not None and len(extra_idx):
        blocks.append((extra_idx, lambda r: r / extra_scale))
    return BlockDiagonalPreconditioner(blocks)


def minres_solve(A, b, tol=DEFAULT_TOL, max_iter=None, preconditioner=None, x0=None):
    """Preconditioned MINRES for a symmetric, possibly indefinite ``A``.

    ``preconditioner`` must be symmetric positive definite.  Convergence is
    declared on the true relative residual ``||b - A x|| / ||b||``.
    """
    start = time.perf_counter()
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    max_iter = 50 * n if max_iter is None else max_iter
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, time.perf_counter() - start, True)
    M = make_preconditioner(A, preconditioner)
    apply_m = M if M else (lambda r: r)
    eps = np.finfo(float).eps

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r1 = b - A @ x
    y = apply_m(r1)
    beta1 = r1 @ y
    if beta1 < 0:
        raise ContractError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    if beta1 == 0.0:
        return x, SolveReport(0, _relres(A, x, b), time.perf_counter() - start, True)

    oldb, beta, dbar, epsln, phibar = 0.0, beta1, 0.0, 0.0, beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1.copy()
    res = 1.0
    converged = False
    it = 0
    next_check = 0
    while it < max_iter:
        it += 1
        v = y / beta
        y = A @ v
        if it >= 2:
            y -= (beta / oldb) * r1
        alfa = v @ y
        y -= (alfa / beta) * r2
        r1, r2 = r2, y
        y = apply_m(r2)
        oldb = beta
        beta2 = r2 @ y
        if beta2 < 0:
            raise ContractError("preconditioner is not positive definite")
        beta = np.sqrt(beta2)
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), eps)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar
        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x += phi * w
        # The recurrence tracks the residual in the preconditioner norm;
        # confirm with the true residual before stopping.
        if phibar / beta1 <= tol or it >= next_check or beta == 0.0:
            res = _relres(A, x, b)
            if res <= tol:
                converged = True
                break
            next_check = it + 25
            if beta == 0.0:
                break
    else:
        res = _relres(A, x, b)
    return x, SolveReport(it, res, time.perf_counter() - start, converged)


# --- SVD ------------------------------------------------------------------------------


def _orthonormalize(U):
    """QR re-orthonormalisation keeping the sign (direction) of each column."""
    Qf, R = np.linalg.qr(U)
    d = np.sign(np.diag(R))
    d[d == 0] = 1.0
    return Qf * d


def _complete(U, n_total):
    """Append orthonormal columns until ``U`` has ``n_total`` columns."""
    N, k = U.shape
    if k >= n_total:
        return U
    Q, _ = np.linalg.qr(np.hstack([U, np.eye(N)]))
    extra = Q[:, k:n_total]
    extra -= U @ (U.T @ extra)
    extra, _ = np.linalg.qr(extra)
    return np.hstack([U, extra])


def thin_svd(Q):
    """Thin SVD ``Q = Phi diag(sigma) V^T`` by the method of snapshots.

    The smaller Gram matrix is eigendecomposed.  Columns belonging to
    negligible singular values are completed to an orthonormal set so that
    ``Phi`` always has ``min(N, S)`` orthonormal columns.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.ndim != 2 or Q.shape[1] < 1:
        raise ValueError("need a matrix with at least one column")
    N, S = Q.shape
    k = min(N, S)
    tall = S <= N
    G = Q.T @ Q if tall else Q @ Q.T
    lam, E = np.linalg.eigh(G)
    order = np.argsort(lam)[::-1][:k]
    lam, E = np.clip(lam[order], 0.0, None), E[:, order]
    sigma = np.sqrt(lam)
    cutoff = max(sigma[0] if k else 0.0, np.finfo(float).tiny) * k * np.finfo(float).eps * 1e3
    good = sigma > cutoff
    ng = int(good.sum())
    # Singular vectors on the long side: Q E / sigma (or Q^T E / sigma).
    long_side = (Q @ E[:, :ng] if tall else Q.T @ E[:, :ng]) / sigma[:ng]
    if ng:
        # Two passes restore orthonormality lost to rounding in the Gram product.
        long_side = _orthonormalize(_orthonormalize(long_side))
    long_side = _complete(long_side, k)
    short_side = _complete(E[:, :ng], k) if ng < k else E
    sigma = np.where(good, sigma, 0.0)
    if tall:
        Phi, V = long_side, short_side
    else:
        Phi, V = short_side, long_side
    # Refine the singular values against the final vectors.
    s_ref = np.einsum("ij,ij->j", Phi, Q @ V)
    sigma = np.where(good, np.abs(s_ref), 0.0)
    flip = good & (s_ref < 0)
    V[:, flip] *= -1.0
    return Phi, sigma, V


def energy_rank(sigma, eta):
    """Smallest ``R`` with ``sum(sigma[:R]) >= eta * sum(sigma)``."""
    if not 0.0 < eta <= 1.0:
        raise ValueError("energy fraction must lie in (0, 1]")
    total = float(np.sum(sigma))
    if total == 0.0:
        return 1
    c = np.cumsum(sigma)
    if eta >= 1.0:
        return int(np.count_nonzero(sigma > 0))
    return int(np.searchsorted(c, eta * total - 1e-15 * total) + 1)


# --- constraint -----------------------------------------------------------------------


def add_mean_zero_constraint(system, w):
    """Border ``system.matrix`` with ``w`` so that ``w @ x = 0`` holds for the solution.

    ``system`` is any dataclass with ``matrix``, ``rhs``, ``constrained`` and
    ``constraint`` fields.
    """
    if system.constrained:
        raise ContractError("mean-zero constraint already applied")
    w = np.asarray(w, dtype=float)
    A = sp.csr_matrix(system.matrix)
    if w.shape != (A.shape[0],):
        raise ValueError("constraint vector length does not match the system")
    col = sp.csr_matrix(w[:, None])
    M = sp.bmat([[A, col], [col.T, None]], format="csr")
    M.sort_indices()
    rhs = np.append(system.rhs, 0.0)
    return replace(system, matrix=M, rhs=rhs, constrained=True, constraint=w)
