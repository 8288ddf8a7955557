"""Pure scipy versions of the compiled sweeps in ``_kernels``.

A forward Gauss-Seidel sweep solves ``(D + L) x_new = b - U x``; a backward
sweep solves ``(D + U) x_new = b - L x``.  Callers split the matrix once and
reuse the parts across sweeps.
"""

import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular


def split(A):
    """``(D + L, D + U, L, U)`` of a CSR matrix."""
    return (
        sp.tril(A, format="csr"),
        sp.triu(A, format="csr"),
        sp.tril(A, -1, format="csr"),
        sp.triu(A, 1, format="csr"),
    )


def gs_sweep(parts, b, x, reverse=False):
    lower, upper, strict_l, strict_u = parts
    if reverse:
        x[:] = spsolve_triangular(upper, b - strict_l @ x, lower=False)
    else:
        x[:] = spsolve_triangular(lower, b - strict_u @ x, lower=True)


def sgs_sweep(parts, b, x):
    gs_sweep(parts, b, x, False)
    gs_sweep(parts, b, x, True)
