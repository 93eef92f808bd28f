"""
Complex CSR storage helpers and the matrix-vector product.

`SparseMatrixCSR` is scipy's `csr_matrix`; `as_csr` normalizes any sparse or
dense input to canonical complex CSR (sorted, duplicate-free column indices, no
explicitly stored zeros).
"""

import numpy as np
import scipy.sparse as sp

from app.errors import DimensionMismatchError

SparseMatrixCSR = sp.csr_matrix


def as_csr(matrix, dtype=np.complex128) -> SparseMatrixCSR:
    """Return `matrix` as canonical CSR with strictly increasing columns per row."""
    csr = sp.csr_matrix(matrix, dtype=dtype)
    csr.sum_duplicates()
    csr.eliminate_zeros()
    csr.sort_indices()
    return csr


def diagonal_matrix(values: np.ndarray) -> SparseMatrixCSR:
    values = np.asarray(values)
    return sp.diags(values, 0, shape=(values.size, values.size), format="csr")


def spmv(A: SparseMatrixCSR, x: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """y = A x, or y = A* x (conjugate transpose) when `adjoint` is set."""
    x = np.asarray(x)
    n_rows, n_cols = A.shape
    expected = n_rows if adjoint else n_cols
    if x.shape[0] != expected:
        raise DimensionMismatchError(
            f"spmv: operand has {x.shape[0]} rows, operator expects {expected}"
        )
    if adjoint:
        return np.conj(A.T @ np.conj(x))
    return A @ x


def inner(x: np.ndarray, y: np.ndarray) -> complex:
    """<x, y>, conjugate-linear in the first argument."""
    return complex(np.vdot(x, y))
