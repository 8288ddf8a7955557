"""Backend selection for the Gauss-Seidel kernels.

The Cython extension is used when it is importable; setting ``ROMDD_PURE=1``
in the environment forces the scipy fallback.  Both backends expose the same
matrix-level functions below.
"""

import os

import numpy as np
import scipy.sparse as sp

from . import _pykernels

try:
    if os.environ.get("ROMDD_PURE", "") not in ("", "0"):
        raise ImportError("pure backend requested")
    from . import _kernels
except ImportError:
    _kernels = None

BACKEND = "cython" if _kernels is not None else "python"


def _csr_arrays(A):
    A = sp.csr_matrix(A)
    return (
        np.ascontiguousarray(A.indptr, dtype=np.int32),
        np.ascontiguousarray(A.indices, dtype=np.int32),
        np.ascontiguousarray(A.data, dtype=np.float64),
    )


def gs_sweep(A, b, x, reverse=False, backend=None):
    """One Gauss-Seidel sweep on ``A x = b``, in place on ``x`` (float64, contiguous)."""
    backend = backend or BACKEND
    b = np.ascontiguousarray(b, dtype=np.float64)
    if backend == "cython":
        if _kernels is None:
            raise RuntimeError("compiled kernels are not available")
        _kernels.gs_sweep(*_csr_arrays(A), b, x, reverse)
    else:
        _pykernels.gs_sweep(_pykernels.split(sp.csr_matrix(A)), b, x, reverse)


def sgs_sweep(A, b, x, backend=None):
    gs_sweep(A, b, x, False, backend)
    gs_sweep(A, b, x, True, backend)


class SymmetricGaussSeidel:
    """Symmetric Gauss-Seidel approximation of ``A^{-1}`` (sweeps from a zero guess)."""

    def __init__(self, A, sweeps=1, backend=None):
        self.A = sp.csr_matrix(A)
        self.A.sort_indices()
        if np.any(self.A.diagonal() == 0.0):
            raise ValueError("Gauss-Seidel needs a nonzero diagonal")
        self.sweeps = sweeps
        self.backend = backend or BACKEND
        if self.backend == "cython":
            if _kernels is None:
                raise RuntimeError("compiled kernels are not available")
            self._arrays = _csr_arrays(self.A)
        else:
            self._parts = _pykernels.split(self.A)

    def __call__(self, r):
        r = np.ascontiguousarray(r, dtype=np.float64)
        z = np.zeros_like(r)
        for _ in range(self.sweeps):
            if self.backend == "cython":
                _kernels.sgs_sweep(*self._arrays, r, z)
            else:
                _pykernels.sgs_sweep(self._parts, r, z)
        return z
