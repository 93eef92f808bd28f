"""
Sparse linear algebra for the FWI engine.

- matrix: complex CSR storage and the (adjoint) matrix-vector product
- direct: exact sparse LU (SuperLU, partial pivoting)
- ilu: level-of-fill incomplete LU without pivoting
- krylov: CG and restarted left-preconditioned GMRes
- convergence: per-iteration logs shared by the Krylov solvers
"""

from app.services.sparse_la.convergence import ConvergenceLog, ConvergenceRecord
from app.services.sparse_la.direct import LuFactors, lu_factor, lu_solve
from app.services.sparse_la.ilu import (
    IluFactors,
    fill_level_bound,
    ilu_factor,
    ilu_solve,
)
from app.services.sparse_la.krylov import cg, gmres
from app.services.sparse_la.matrix import (
    SparseMatrixCSR,
    as_csr,
    diagonal_matrix,
    inner,
    spmv,
)

__all__ = [
    "ConvergenceLog",
    "ConvergenceRecord",
    "IluFactors",
    "LuFactors",
    "SparseMatrixCSR",
    "as_csr",
    "cg",
    "diagonal_matrix",
    "fill_level_bound",
    "gmres",
    "ilu_factor",
    "ilu_solve",
    "inner",
    "lu_factor",
    "lu_solve",
    "spmv",
]
