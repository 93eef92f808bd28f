"""
Exact sparse LU via SuperLU with partial pivoting by magnitude.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import SuperLU, splu

from app.errors import DimensionMismatchError, SingularPivotError
from app.services.sparse_la.matrix import SparseMatrixCSR, as_csr
from app.utils.logger import setup_logger
from app.utils.solve_metrics import SolveMetrics

logger = setup_logger("sparse_direct")


@dataclass(frozen=True)
class LuFactors:
    """P_r A P_c = L U, held by a SuperLU object."""

    superlu: SuperLU
    n: int
    metrics: SolveMetrics = field(default_factory=SolveMetrics, compare=False)

    @property
    def L(self) -> sp.csc_matrix:
        return self.superlu.L

    @property
    def U(self) -> sp.csc_matrix:
        return self.superlu.U

    @property
    def perm_r(self) -> np.ndarray:
        return self.superlu.perm_r

    @property
    def perm_c(self) -> np.ndarray:
        return self.superlu.perm_c

    def reassemble(self) -> sp.csc_matrix:
        """Rebuild A from the factors and permutations."""
        n = self.n
        pr = sp.csc_matrix((np.ones(n), (self.perm_r, np.arange(n))), shape=(n, n))
        pc = sp.csc_matrix((np.ones(n), (np.arange(n), self.perm_c)), shape=(n, n))
        return (pr.T @ (self.L @ self.U) @ pc.T).tocsc()


def _first_empty_line(A: SparseMatrixCSR) -> int | None:
    row_counts = np.diff(A.indptr)
    empty_rows = np.flatnonzero(row_counts == 0)
    if empty_rows.size:
        return int(empty_rows[0])
    col_counts = np.bincount(A.indices, minlength=A.shape[1])
    empty_cols = np.flatnonzero(col_counts == 0)
    if empty_cols.size:
        return int(empty_cols[0])
    return None


def lu_factor(A) -> LuFactors:
    A = as_csr(A)
    A.eliminate_zeros()
    n_rows, n_cols = A.shape
    if n_rows != n_cols:
        raise DimensionMismatchError(f"LU needs a square matrix, got {A.shape}")
    empty = _first_empty_line(A)
    if empty is not None:
        raise SingularPivotError(
            f"matrix is structurally singular at index {empty}", index=empty
        )
    start = time.perf_counter()
    try:
        superlu = splu(A.tocsc(), permc_spec="COLAMD")
    except RuntimeError as e:
        raise SingularPivotError(f"LU factorization failed: {e}") from e
    logger.debug(
        f"LU of {n_rows}x{n_cols} (nnz={A.nnz}, fill nnz={superlu.L.nnz + superlu.U.nnz}) "
        f"in {time.perf_counter() - start:.3f}s"
    )
    return LuFactors(superlu=superlu, n=n_rows)


def lu_solve(F: LuFactors, b: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """Solve A x = b (or A* x = b); `b` may hold one right-hand side per column."""
    b = np.asarray(b, dtype=np.complex128)
    if b.shape[0] != F.n:
        raise DimensionMismatchError(
            f"right-hand side has {b.shape[0]} rows, factors are {F.n}x{F.n}"
        )
    columns = 1 if b.ndim == 1 else b.shape[1]
    if columns == 0:
        return b.copy()
    start = time.perf_counter()
    x = F.superlu.solve(np.ascontiguousarray(b), trans="H" if adjoint else "N")
    F.metrics.record_solve(columns, adjoint, time.perf_counter() - start)
    return x
